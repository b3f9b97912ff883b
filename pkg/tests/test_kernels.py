import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from breakfvm.kernels import (
    BreakageKernel,
    CollisionKernel,
    KernelError,
    cell_avg_K,
    eval_K,
    kernel_matrix,
    mass_weighted_integral,
    partial_breakage_integral,
    verify_H2,
)
from breakfvm.mesh import build_uniform

pos = st.floats(1e-6, 1e3)
exponents = st.tuples(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0)).map(sorted)
nu = st.floats(-0.95, 0.0)


# ---------------------------------------------------------------- collision


def test_product_kernel_value():
    k = CollisionKernel(1.0, 1.0, 1.0)
    assert k(0.5, 0.25) == 2 * 0.5 * 0.25


def test_constant_kernel_needs_flag():
    with pytest.raises(KernelError, match="H1"):
        CollisionKernel(1.0, 0.0, 0.0)
    k = CollisionKernel(0.5, 0.0, 0.0, allow_zeta_zero=True)
    assert k(3.0, 7.0) == 1.0
    assert not k.satisfies_H1


@pytest.mark.parametrize("zeta, eta", [(0.6, 0.4), (-0.1, 0.5), (0.5, 1.2)])
def test_exponent_order_enforced(zeta, eta):
    with pytest.raises(KernelError):
        CollisionKernel(1.0, zeta, eta)


def test_negative_alpha_rejected():
    with pytest.raises(KernelError):
        CollisionKernel(-1.0, 0.5, 0.5)


def test_nonpositive_arguments_rejected():
    k = CollisionKernel(1.0, 0.5, 1.0)
    with pytest.raises(KernelError):
        k(0.0, 1.0)
    with pytest.raises(KernelError):
        k(1.0, -2.0)


def test_cell_average_against_dblquad():
    mesh = build_uniform(1.0, 2)
    k = CollisionKernel(1.0, 1.0, 1.0, eval_mode="cell_average")
    ref, _ = integrate.dblquad(lambda y, x: 2 * x * y, 0, 0.5, 0, 0.5)
    assert ref / 0.25 == pytest.approx(0.125, rel=1e-12)
    assert cell_avg_K(k, mesh, 0, 0) == pytest.approx(ref / 0.25, rel=1e-12)


@pytest.mark.parametrize("zeta, eta", [(0.3, 0.7), (0.5, 0.5), (0.1, 1.0)])
def test_cell_average_general_exponents(zeta, eta):
    mesh = build_uniform(2.0, 3)
    k = CollisionKernel(0.7, zeta, eta, eval_mode="cell_average")
    e = mesh.edges
    for i, j in [(0, 0), (0, 2), (2, 1)]:
        ref, _ = integrate.dblquad(
            lambda y, x: eval_K(k, x, y), e[i], e[i + 1], e[j], e[j + 1], epsabs=0, epsrel=1e-11
        )
        ref /= mesh.widths[i] * mesh.widths[j]
        assert cell_avg_K(k, mesh, i, j) == pytest.approx(ref, rel=1e-9)
    np.testing.assert_allclose(kernel_matrix(k, mesh)[0, 2], cell_avg_K(k, mesh, 0, 2), rtol=1e-15)


def test_cell_avg_index_bounds():
    with pytest.raises(IndexError):
        cell_avg_K(CollisionKernel(1, 1, 1), build_uniform(1.0, 2), 2, 0)


def test_midpoint_matrix():
    mesh = build_uniform(1.0, 2)
    Kmat = kernel_matrix(CollisionKernel(1.0, 1.0, 1.0), mesh)
    np.testing.assert_array_equal(Kmat, [[0.125, 0.375], [0.375, 1.125]])


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 10), exponents, pos, pos)
def test_kernel_symmetric_bitwise(alpha, ex, e, r):
    k = CollisionKernel(alpha, *ex)
    assert eval_K(k, e, r) == eval_K(k, r, e)
    assert eval_K(k, e, r) >= 0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 10), exponents, st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_young_bound_where_claimed(alpha, ex, e, r):
    k = CollisionKernel(alpha, *ex)
    if k.young_bound_holds(1.0):
        assert eval_K(k, e, r) <= alpha * (e + r) * (1 + 1e-12)


def test_young_bound_fails_for_small_exponent_sum():
    k = CollisionKernel(1.0, 0.1, 0.1)
    assert not k.young_bound_holds(1.0)
    e = r = 1e-4
    assert eval_K(k, e, r) > e + r


# ---------------------------------------------------------------- breakage


def test_breakage_binary_uniform():
    b = BreakageKernel()
    assert b.coef == 2.0 and b.N == 2.0 and b.conserves_volume
    assert b(0.3, 1.0) == 2.0
    assert b(1.5, 1.0) == 0.0


def test_unit_multiplicity_family_coefficient():
    b = BreakageKernel("power_paper", -0.5)
    assert b.coef == 0.5 and b.N == 1.0 and not b.conserves_volume


@pytest.mark.parametrize("e", [-1.0, 0.1, -1.5])
def test_exponent_range(e):
    with pytest.raises(KernelError):
        BreakageKernel("power_conserving", e)


def test_partial_integral_singular_value():
    b = BreakageKernel("power_conserving", -0.5)
    assert partial_breakage_integral(b, 0.0, 1.0, 1.0) == pytest.approx(3.0, rel=1e-15)
    # singular integrand: algebraic-weight quadrature on the regular part
    q, _ = integrate.quad(lambda x: 1.5, 0, 1, weight="alg", wvar=(-0.5, 0))
    assert q == pytest.approx(3.0, rel=1e-13)


@pytest.mark.parametrize("e", [0.0, -0.3, -0.7, -0.95])
@pytest.mark.parametrize("family", ["power_conserving", "power_paper"])
def test_partial_integrals_against_quad(family, e):
    b = BreakageKernel(family, e)
    rho = 2.5
    for a, c in [(0.0, 0.3), (0.3, 1.1), (1.0, 2.5)]:
        ref, _ = integrate.quad(lambda x: b(x, rho), a, c, epsabs=0, epsrel=1e-12, limit=200)
        assert partial_breakage_integral(b, a, c, rho) == pytest.approx(ref, rel=1e-9)
        ref, _ = integrate.quad(lambda x: x * b(x, rho), a, c, epsabs=0, epsrel=1e-12, limit=200)
        assert mass_weighted_integral(b, a, c, rho) == pytest.approx(ref, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(nu, st.floats(1e-3, 1e3))
def test_multiplicity_and_volume(e, rho):
    for fam in ("power_conserving", "power_paper"):
        b = BreakageKernel(fam, e)
        assert partial_breakage_integral(b, 0, rho, rho) == pytest.approx(b.N, rel=1e-13)
        vol = mass_weighted_integral(b, 0, rho, rho)
        expected = rho if b.conserves_volume else rho * (e + 1) / (e + 2)
        assert vol == pytest.approx(expected, rel=1e-13)


@settings(max_examples=300, deadline=None)
@given(nu, st.floats(1e-3, 1e3), st.floats(0, 1), st.floats(0, 1))
def test_partial_integral_additive(e, rho, u, v):
    b = BreakageKernel("power_conserving", e)
    a, c = sorted((u * rho, v * rho))
    m = 0.5 * (a + c)
    whole = partial_breakage_integral(b, a, c, rho)
    split = partial_breakage_integral(b, a, m, rho) + partial_breakage_integral(b, m, c, rho)
    scale = partial_breakage_integral(b, 0, rho, rho)
    assert abs(whole - split) <= 4 * np.spacing(scale)


def test_partial_integral_limits_checked():
    b = BreakageKernel()
    with pytest.raises(KernelError):
        partial_breakage_integral(b, 0.5, 0.2, 1.0)
    with pytest.raises(KernelError):
        partial_breakage_integral(b, 0.0, 1.5, 1.0)


# ---------------------------------------------------------------- moment bound on b


def test_H2_sharp_constant_binary():
    res = verify_H2(BreakageKernel(), 1.0, 0.0)
    assert res.Q == 2.0 and res.holds and not res.diverging


@pytest.mark.parametrize("e, tau, ups", [(-0.5, 1.0, 0.2), (-0.3, 1.5, 0.0), (0.0, 1.2, 0.5)])
def test_H2_matches_direct_quadrature(e, tau, ups):
    b = BreakageKernel("power_conserving", e)
    res = verify_H2(b, tau, ups)
    assert res.holds and res.max_rel_err < 1e-10
    rho = 1.7
    # x = rho * y**8 turns the endpoint singularity into a smooth integrand
    direct, _ = integrate.quad(
        lambda y: b(rho * y**8, rho) ** tau * (rho * y**8) ** (-ups) * 8 * rho * y**7, 0, 1, epsabs=0, epsrel=1e-12
    )
    assert direct == pytest.approx(res.Q * rho ** (1 - ups - tau), rel=1e-9)


def test_H2_divergent():
    res = verify_H2(BreakageKernel("power_conserving", -0.5), 1.0, 0.6)
    assert res.diverging and not res.holds and math.isinf(res.Q)


def test_H2_tau_range():
    with pytest.raises(KernelError):
        verify_H2(BreakageKernel(), 2.0, 0.0)
