import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonsplitsum.deltasym import (
    build_kernel,
    bump,
    delta_expansion,
    delta_identity_check,
    delta_q,
    delta_q_phi,
    kernel_bound_profile,
    omega_derivative_constants,
    vanishes_beyond,
)


def direct_delta_q(kernel, q, u, rmax=5000):
    """Term-by-term sum over r = 1..rmax, ignoring the support bookkeeping."""
    r = np.arange(1, rmax + 1, dtype=float)
    return float(np.sum((kernel.omega(q * r) - kernel.omega(abs(u) / (q * r))) / (q * r)))


def test_kernel_examples():
    k = build_kernel(100, 10)
    assert k.Q == 10
    assert abs(sum(float(k.omega(r)) for r in range(1, 100)) - 1) < 1e-12
    assert build_kernel(1e4, 1e2).Q == 100
    assert build_kernel(10, 100).Q == 100
    with pytest.raises(ValueError):
        build_kernel(100, 1)


@given(st.floats(1.6, 500), st.floats(2, 1e5))
def test_lattice_normalization(Omega, U):
    k = build_kernel(U, Omega)
    assert abs(k.lattice_sum() - 1.0) < 1e-12
    r = np.linspace(0, 3 * Omega, 1001)
    outside = (r <= Omega) | (r >= 2 * Omega)
    assert np.all(k.omega(r)[outside] == 0)
    u = np.linspace(-2 * U, 2 * U, 101)
    assert np.all(k.phi(u)[np.abs(u) >= U] == 0)


def test_bump_shape():
    assert bump(0.0) == 1.0
    assert bump(1.0) == 0.0 and bump(-1.0) == 0.0
    t = np.linspace(-0.99, 0.99, 99)
    assert np.allclose(bump(t), bump(-t))


def test_delta_q_examples():
    k = build_kernel(100, 10)
    expected = sum(float(k.omega(r)) / r for r in range(11, 20))
    assert delta_q(k, 1, 0.0) == pytest.approx(expected, abs=1e-15)
    assert delta_q(k, 3, 50.0) == pytest.approx(direct_delta_q(k, 3, 50.0), abs=1e-14)
    # both omega terms are off their supports once q > 2 Omega and |u| < q Omega
    assert delta_q(k, 25, 0.0) == 0.0
    assert delta_q(k, 25, 240.0) == 0.0
    assert delta_q(k, 25, 1e6) != 0.0


@given(st.integers(1, 60), st.floats(-2000, 2000))
def test_delta_q_matches_direct_sum(q, u):
    k = build_kernel(1000, 12.5)
    assert delta_q(k, q, u) == pytest.approx(direct_delta_q(k, q, u), abs=1e-13)


def test_delta_q_vectorized():
    k = build_kernel(1000, 12.5)
    u = np.array([0.0, 3.0, -40.0, 900.0])
    assert np.allclose(delta_q(k, 4, u), [delta_q(k, 4, float(x)) for x in u], atol=1e-15)


@pytest.mark.parametrize("U,Omega", [(100, 10), (1000, 12.5), (1500, 30)])
def test_detection_identity(U, Omega):
    k = build_kernel(U, Omega)
    bound = int(min(U / 2, 500))
    for n in range(-bound, bound + 1):
        assert delta_identity_check(k, n) < 1e-8


def test_detection_examples():
    k = build_kernel(100, 10)
    assert delta_identity_check(k, 0) < 1e-8
    assert delta_identity_check(k, 5) < 1e-8
    assert delta_expansion(k, 100) == 0.0


def test_vanishing_range():
    # Delta_q phi vanishes for q >= max(2 Omega, U / Omega), not already beyond Q; see the ledger
    k = build_kernel(1e4, 1e2)
    u = np.linspace(-1e4, 1e4, 801)
    assert k.q_cutoff == 200
    assert vanishes_beyond(k, range(200, 260), u) == 0.0
    assert vanishes_beyond(k, [110, 150, 190], u) > 0
    k2 = build_kernel(1e4, 20)
    assert k2.q_cutoff == 500
    assert vanishes_beyond(k2, range(500, 560), np.linspace(-1e4, 1e4, 401)) == 0.0


def test_bound_profile_examples():
    k = build_kernel(1e4, 1e2)
    single = kernel_bound_profile(k, q_values=[1.0], u_values=[0.0])
    Om = k.Omega
    assert single.value_constant == pytest.approx(abs(delta_q(k, 1, 0.0)) / (Om**-2 + Om**-1), rel=1e-12)
    beyond = kernel_bound_profile(k, q_values=[250.0, 300.0], u_values=[0.0, 10.0])
    assert beyond.value_constant == 0.0


def test_bound_profile_scale_invariance():
    base = kernel_bound_profile(build_kernel(1e4, 1e2))
    assert math.isfinite(base.value_constant) and math.isfinite(base.derivative_constant)
    for scale in (2, 4):
        other = kernel_bound_profile(build_kernel(1e4 * scale, 1e2 * scale))
        assert other.value_constant <= 1.2 * base.value_constant
        assert other.derivative_constant <= 1.2 * base.derivative_constant
        assert other.value_constant == pytest.approx(base.value_constant, rel=0.2)
        assert other.derivative_constant == pytest.approx(base.derivative_constant, rel=0.2)


def test_omega_derivative_constants_stable():
    a = omega_derivative_constants(build_kernel(1e4, 1e2))
    b = omega_derivative_constants(build_kernel(4e4, 2e2))
    assert len(a) == 4
    assert np.allclose(a, b, rtol=0.05)


def test_delta_q_phi_support():
    k = build_kernel(1000, 12.5)
    assert np.all(delta_q_phi(k, 3, np.array([1000.0, -1200.0])) == 0)
