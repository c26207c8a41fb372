from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from instances import mixed_case2
from oracles import free_schrodinger_m_shooting, third_order_m

from weylkit.blockspace import BlockSignature, nevanlinna_defect
from weylkit.boundary import Case
from weylkit.errors import IllPosedParameter, PreconditionFailed, ShapeMismatch
from weylkit.shipped import CATALOG
from weylkit.weyl import (
    TauKind,
    WeylContext,
    base_solutions,
    boundary_residuals,
    displacement_residual,
    m_tau,
    make_tau,
    minimal_m,
    psd_bound_min_eigenvalue,
    solve_Z,
    symmetry_residual,
    triangularity_residual,
    v_tau,
    x_matrix,
)

# m at λ = 1 − 2i from the closed-form exponential oracle
THIRD_ORDER_M11 = 0.520174502305 - 1.628937145922j
THIRD_ORDER_M12 = 1.292074512673 + 0.201294312829j


@pytest.fixture(scope="module")
def mixed_ctx() -> WeylContext:
    sys, U = mixed_case2()
    return WeylContext.build(sys, U)


@pytest.fixture
def every_ctx(contexts, mixed_ctx):
    return {**contexts, "mixed_case2": mixed_ctx}


def test_mixed_instance_is_case2_with_boundary_component(mixed_ctx):
    assert mixed_ctx.trip.case is Case.CASE2
    assert mixed_ctx.trip.dot_dims == (1, 1, 0)


def test_solve_Z_third_order(contexts):
    ctx = contexts["third_order_halfline"]
    assert solve_Z(ctx, -1j).shape == (2, 2)
    assert solve_Z(ctx, 1j).shape == (1, 1)
    for lam in (-1j, 1j):
        rows = ctx.trip.Gamma0 if lam.imag < 0 else ctx.trip.P1_rows
        A = rows @ ctx.basis(lam).data()
        assert np.abs(A @ solve_Z(ctx, lam) - np.eye(A.shape[0])).max() <= 1e-9


def test_solve_Z_rejects_real(contexts):
    with pytest.raises(ValueError):
        solve_Z(contexts["dirichlet"], 1.0)


@pytest.mark.parametrize("lam", [0.4 - 0.9j, -1.2 + 0.5j])
def test_base_solution_conditions(every_ctx, lam):
    for name, ctx in every_ctx.items():
        res = boundary_residuals(ctx, x_matrix(ctx, lam))
        assert max(res.values()) <= 1e-9, (name, res)


def test_upper_u_is_empty_without_boundary_mass(contexts):
    wd = base_solutions(contexts["third_order_halfline"], 0.5 + 1j)
    assert wd.u.shape[1] == 0


def test_m0_hat_blocks(every_ctx):
    for name in ("third_order_halfline", "unequal_synthetic", "mixed_case2"):
        ctx = every_ctx[name]
        lo = x_matrix(ctx, 0.3 - 0.7j).m0
        up = x_matrix(ctx, 0.3 + 0.7j).m0
        f, h = ctx.first_cols, ctx.hat_cols
        assert np.abs(lo[np.ix_(h, f)]).max() <= 1e-12
        assert np.abs(up[np.ix_(f, h)]).max() <= 1e-12
        np.testing.assert_allclose(lo[np.ix_(h, h)], -0.5j * np.eye(h.size), atol=1e-12)
        np.testing.assert_allclose(up[np.ix_(h, h)], 0.5j * np.eye(h.size), atol=1e-12)


@pytest.mark.parametrize("lam", [0.3 + 0.7j, -0.3 - 0.7j])
def test_block_symmetry(every_ctx, lam):
    for ctx in every_ctx.values():
        assert symmetry_residual(ctx, lam) <= 1e-8


def test_tau0_pair(mixed_ctx):
    tau = make_tau(mixed_ctx.trip, "tau0")
    D0, D1 = tau.lower(-1j)
    np.testing.assert_array_equal(D0, np.eye(2))
    np.testing.assert_array_equal(D1, np.zeros((2, 1)))
    C0, C1 = tau.upper(1j)
    np.testing.assert_allclose(C0, [[0, 1]], atol=1e-14)
    np.testing.assert_allclose(C1, [[0]], atol=1e-14)


def test_truncated_identity_equals_tau0(mixed_ctx):
    trip = mixed_ctx.trip
    tr = make_tau(trip, "truncated", np.eye(1), np.zeros((1, 1)))
    t0 = make_tau(trip, "tau0")
    for lam in (0.2 - 1j, 0.2 + 1j):
        np.testing.assert_allclose(m_tau(mixed_ctx, tr, lam), m_tau(mixed_ctx, t0, lam), atol=1e-14)


def test_truncated_swap_well_posed_when_M4_invertible(mixed_ctx):
    tau = make_tau(mixed_ctx.trip, "truncated", np.zeros((1, 1)), np.eye(1))
    for lam in (0.5 - 1j, -2 - 0.3j):
        M4 = x_matrix(mixed_ctx, lam).blocks["M4"]
        assert abs(np.linalg.det(M4)) > 1e-8
        assert v_tau(mixed_ctx, tau, lam).route_residual <= 1e-8


def test_make_tau_shape_errors(mixed_ctx):
    trip = mixed_ctx.trip
    with pytest.raises(ShapeMismatch):
        make_tau(trip, "truncated", np.eye(2), np.zeros((2, 1)))
    with pytest.raises(ShapeMismatch):
        make_tau(trip, "general", np.eye(3), np.zeros((3, 1)))
    with pytest.raises(ShapeMismatch):
        make_tau(trip, "general")


def test_tau0_gives_base_solution(mixed_ctx):
    tau = make_tau(mixed_ctx.trip, "tau0")
    sol = v_tau(mixed_ctx, tau, 0.1 - 0.8j)
    np.testing.assert_allclose(sol.coef, sol.wd.v0, atol=1e-14)
    np.testing.assert_allclose(sol.m, sol.wd.m0, atol=1e-14)


def test_zero_D1_gives_base_solution(mixed_ctx, rng):
    D0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) + 3 * np.eye(2)
    tau = make_tau(mixed_ctx.trip, "general", D0, np.zeros((2, 1)))
    for lam in (0.1 - 0.8j, 0.1 + 0.8j):
        sol = v_tau(mixed_ctx, tau, lam)
        np.testing.assert_allclose(sol.m, sol.wd.m0, atol=1e-12)


def test_third_order_unique_resolvent(contexts):
    ctx = contexts["third_order_halfline"]
    tau = make_tau(ctx.trip, "general", np.array([[2.0 - 1j]]), np.zeros((1, 0)))
    for lam in (1 - 2j, 1 + 2j):
        np.testing.assert_allclose(v_tau(ctx, tau, lam).m, m_tau(ctx, make_tau(ctx.trip), lam), atol=1e-13)


def test_third_order_m_against_oracle(contexts):
    ctx = contexts["third_order_halfline"]
    m = m_tau(ctx, make_tau(ctx.trip), 1 - 2j)
    assert m.shape == (2, 2)
    assert abs(m[1, 0]) <= 1e-12
    assert m[1, 1] == pytest.approx(-0.5j, abs=1e-12)
    assert m[0, 0] == pytest.approx(THIRD_ORDER_M11, abs=1e-10)
    assert m[0, 1] == pytest.approx(THIRD_ORDER_M12, abs=1e-10)
    for lam in (-0.5 - 1j, 2 + 0.5j, 0.1 - 3j):
        np.testing.assert_allclose(m_tau(ctx, make_tau(ctx.trip), lam), third_order_m(lam), atol=1e-10)


def test_third_order_oracle_frozen_values():
    m = third_order_m(1 - 2j)
    assert m[0, 0] == pytest.approx(THIRD_ORDER_M11, abs=1e-11)
    assert m[0, 1] == pytest.approx(THIRD_ORDER_M12, abs=1e-11)


def test_truncated_triangularity(every_ctx):
    for name in ("mixed_case2", "dirichlet", "third_order_interval"):
        ctx = every_ctx[name]
        c = ctx.trip.dim_C + ctx.trip.dot_dims[2]
        D0 = np.eye(c) + 0.3 * np.ones((c, c))
        tau = make_tau(ctx.trip, "truncated", D0, 0.5 * np.ones((c, ctx.trip.dim_C)))
        for lam in (0.4 - 0.6j, -1 - 2j):
            assert triangularity_residual(ctx, m_tau(ctx, tau, lam)) <= 1e-10
            upper = m_tau(ctx, tau, np.conj(lam))
            assert triangularity_residual(ctx, upper.conj().T) <= 1e-10


@pytest.mark.parametrize("lam", [1j, -1j, 3 - 0.5j, -2 + 0.2j])
def test_free_schrodinger_minimal_m(contexts, lam):
    m = minimal_m(contexts["free_schrodinger"], lam)
    assert m.shape == (1, 1)
    assert m[0, 0] == pytest.approx(free_schrodinger_m_shooting(lam), abs=1e-4)


def test_third_order_displacement(contexts):
    assert displacement_residual(contexts["third_order_halfline"], -1j, -2j) <= 1e-6


def test_minimal_m_precondition(contexts):
    with pytest.raises(PreconditionFailed):
        minimal_m(contexts["dirichlet"], 1j)


def test_ill_posed_parameter(mixed_ctx):
    tau = make_tau(mixed_ctx.trip, "general", np.zeros((2, 2)), np.zeros((2, 1)))
    with pytest.raises(IllPosedParameter):
        v_tau(mixed_ctx, tau, 0.5 - 1j)


def test_equivalent_pairs_give_same_m(mixed_ctx, rng):
    trip = mixed_ctx.trip
    D0 = np.eye(2) + 0.2 * rng.normal(size=(2, 2))
    D1 = 0.4 * rng.normal(size=(2, 1))
    K = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) + 2 * np.eye(2)
    a = make_tau(trip, "general", D0, D1)
    b = make_tau(trip, "general", K @ D0, K @ D1)
    for lam in (0.3 - 1j, 0.3 + 1j):
        np.testing.assert_allclose(v_tau(mixed_ctx, a, lam).m, v_tau(mixed_ctx, b, lam).m, atol=1e-10)


def test_cauchy_riemann_for_holomorphic_parameter(mixed_ctx):
    tau = make_tau(
        mixed_ctx.trip,
        "general",
        lambda lam: np.array([[1.0, 0.0], [0.0, 1.0 + 0.1 * lam]]),
        lambda lam: np.array([[0.0], [0.2 * lam]]),
    )
    assert tau.cauchy_riemann_defect(0.3 - 0.9j) <= 1e-8
    assert tau.kind is TauKind.GENERAL and not tau.constant
    sol = v_tau(mixed_ctx, tau, 0.3 - 0.9j)
    assert sol.route_residual <= 1e-8
    assert psd_bound_min_eigenvalue(mixed_ctx, sol) >= -1e-7


lambdas = st.builds(
    complex, st.floats(-3.0, 3.0), st.floats(0.2, 2.0) | st.floats(-2.0, -0.2)
)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(sorted(CATALOG)), lambdas)
def test_m_function_laws(contexts, name, lam):
    ctx = contexts[name]
    tau = make_tau(ctx.trip)
    sol = v_tau(ctx, tau, lam)
    assert sol.route_residual <= 1e-8
    conj = v_tau(ctx, tau, np.conj(lam))
    assert np.abs(conj.m.conj().T - sol.m).max() <= 1e-8 * max(1.0, np.abs(sol.m).max())
    assert nevanlinna_defect([(lam, sol.m), (np.conj(lam), conj.m)]) <= 1e-7
    if lam.imag < 0:
        assert psd_bound_min_eigenvalue(ctx, sol) >= -1e-7
