from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylkit.errors import (
    EigenCrossing,
    NotSelfAdjointPair,
    SingularQ0,
    UnsupportedSubclass,
)
from weylkit.oddorder import (
    OddOrderExpression,
    case1_possible,
    check_selfadjoint_pair,
    fidelity_residual,
    l2_count_agreement,
    odd_deficiency,
    q0_inertia_factorization,
    quasi_derivatives,
    reduce_to_system,
    scalar_l2_count,
    selfadjoint_bc,
)
from weylkit.propagator import deficiency_indices
from weylkit.shipped import flagship_expression
from weylkit.system import PolynomialSampler, Regular
from weylkit.weyl import m_tau

THIRD = flagship_expression()
FIFTH = OddOrderExpression(2, p=[0.0, 0.0, 0.3], q=[1.0, 0.5, 0.0], name="fifth_order")


def _identity_residual(q0, Q1, Qh, Q2):
    rhs = -Q1.conj().T @ Q2 + Q2.conj().T @ Q1 + 1j * Qh.conj().T @ Qh
    return float(np.abs(1j * q0 - rhs).max())


# --- q₀ factorization -------------------------------------------------------


def test_unit_q0():
    fac = q0_inertia_factorization(THIRD, [0.0, 1.0])
    assert fac.Q1.shape[1] == 0 and fac.Q2.shape[1] == 0
    np.testing.assert_allclose(np.abs(fac.Qhat[:, 0, 0]), 1.0, atol=1e-14)
    assert (fac.nu0_plus, fac.nu0_minus) == (1, 0)
    assert fac.residual <= 1e-10


def test_square_root_of_q0():
    fac = q0_inertia_factorization(OddOrderExpression(1, [0.0, 0.0], [4.0, 0.0]), [0.0])
    assert abs(fac.Qhat[0, 0, 0]) == pytest.approx(2.0, abs=1e-14)


def test_hyperbolic_q0():
    q0 = np.diag([1.0, -1.0])
    expr = OddOrderExpression(1, [np.zeros((2, 2))] * 2, [q0, np.zeros((2, 2))], dimH=2)
    fac = q0_inertia_factorization(expr, [0.0])
    assert (fac.nu0_plus, fac.nu0_minus) == (1, 1)
    assert fac.Qhat.shape[1] == 0 and fac.Q1.shape[1] == 1 and fac.Q2.shape[1] == 1
    assert fac.residual <= 1e-12
    # explicit factorization checked by substitution
    Q1 = np.array([[1.0, 1.0]]) / np.sqrt(2)
    Q2 = -1j * np.array([[1.0, -1.0]]) / np.sqrt(2)
    assert _identity_residual(q0, Q1, np.zeros((0, 2)), Q2) <= 1e-15


def test_negative_scalar_q0_is_relabelled():
    fac = q0_inertia_factorization(OddOrderExpression(1, [0.0, 0.0], [-2.0, 0.0]), [0.0])
    assert fac.sign == -1 and (fac.nu0_plus, fac.nu0_minus) == (1, 0)


def test_singular_q0():
    with pytest.raises(SingularQ0):
        q0_inertia_factorization(OddOrderExpression(1, [0.0, 0.0], [0.0, 1.0]), [0.0])
    sign_change = OddOrderExpression(1, [0.0, 0.0], [PolynomialSampler([[[-0.5, 1.0]]]), 0.0])
    with pytest.raises(SingularQ0):
        q0_inertia_factorization(sign_change, [0.0, 1.0])


def test_eigen_crossing():
    q0 = PolynomialSampler([[[1.0, 1.0], [0.0]], [[0.0], [2.0, -1.0]]])
    expr = OddOrderExpression(1, [np.zeros((2, 2))] * 2, [q0, np.zeros((2, 2))], dimH=2)
    with pytest.raises(EigenCrossing):
        q0_inertia_factorization(expr, np.linspace(0.0, 1.0, 11))


hermitian_q0 = st.integers(1, 3).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.3, 3.0) | st.floats(-3.0, -0.3), min_size=n, max_size=n),
        st.integers(0, 2**31 - 1),
    )
)


@settings(max_examples=30, deadline=None)
@given(hermitian_q0)
def test_factorization_identity(data):
    eigs, seed = data
    n = len(eigs)
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    q0 = Q @ np.diag(eigs) @ Q.conj().T
    q0 = 0.5 * (q0 + q0.conj().T)
    expr = OddOrderExpression(1, [np.zeros((n, n))] * 2, [q0, np.zeros((n, n))], dimH=n)
    fac = q0_inertia_factorization(expr, [0.0])
    pos = sum(e > 0 for e in eigs)
    assert fac.residual <= 1e-10
    assert fac.dim_Hprime == min(pos, n - pos) and fac.dim_Hhat == abs(2 * pos - n)


# --- quasi-derivatives and reduction -----------------------------------------


def test_zero_jet():
    qd, bold = quasi_derivatives(reduce_to_system(THIRD), np.zeros(4))
    assert not np.any(qd) and not np.any(bold)


def test_exponential_bold_vector():
    red = reduce_to_system(THIRD)
    k = 0.7 - 0.3j
    qd, bold = quasi_derivatives(red, [1.0, k, k**2, k**3])
    np.testing.assert_allclose(bold[:2], [1.0, k], atol=1e-14)
    assert bold[2] == pytest.approx(qd[2], abs=1e-14)


@pytest.mark.parametrize("coeffs", [[1.0, 0.0, 0.0, 0.0], [0.3, -1.0, 2.0, 0.5], [0.0, 0.0, 1.0, -4.0]])
def test_top_quasi_derivative_is_the_expression(coeffs):
    red = reduce_to_system(THIRD)
    poly = np.polynomial.Polynomial(coeffs)
    t = 0.37
    jet = [poly.deriv(j)(t) for j in range(4)]
    qd, _ = quasi_derivatives(red, jet)
    assert qd[3] == pytest.approx(-1j * jet[3], abs=1e-10)


def test_third_order_reduction_shape():
    red = reduce_to_system(THIRD)
    assert (red.sys.sig.nu_plus, red.sys.sig.nu_hat) == (1, 1)
    np.testing.assert_array_equal(red.sys.Delta(0.0), np.diag([1.0, 0.0, 0.0]))
    assert red.match_residual <= 1e-10


def test_third_order_fidelity():
    red = reduce_to_system(THIRD)
    jets = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, -0.2j, 1.0]])
    assert fidelity_residual(red, 1j, jets, t_end=5.0) <= 1e-8


def test_fifth_order_fidelity():
    red = reduce_to_system(FIFTH)
    assert (red.sys.sig.nu_plus, red.sys.sig.nu_hat) == (2, 1)
    assert fidelity_residual(red, 0.5 - 1j, np.eye(5)[:3], t_end=3.0) <= 1e-8


def test_reduction_gates():
    with pytest.raises(UnsupportedSubclass):
        reduce_to_system(OddOrderExpression(3, [0.0] * 4, [1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(UnsupportedSubclass):
        reduce_to_system(OddOrderExpression(1, [0.0, 0.0], [-1.0, 0.0]))
    with pytest.raises(UnsupportedSubclass):
        reduce_to_system(OddOrderExpression(1, [np.zeros((2, 2))] * 2, [np.eye(2), np.zeros((2, 2))], dimH=2))


def test_l2_equivalence_on_test_modes():
    lams = [1j, -1j, 2 - 0.5j, -3 + 0.1j]
    assert l2_count_agreement(reduce_to_system(THIRD), lams)
    assert l2_count_agreement(reduce_to_system(FIFTH), lams)
    assert [scalar_l2_count(THIRD, lam) for lam in (1j, -1j)] == [1, 2]


# --- deficiency and Case 1 ---------------------------------------------------


def test_deficiency_half_line():
    assert odd_deficiency(THIRD) == (1, 2)


def test_deficiency_regular_interval():
    assert odd_deficiency(THIRD, Regular(1.0)) == (3, 3)


@pytest.mark.parametrize("expr", [THIRD, FIFTH])
@pytest.mark.parametrize("endpoint", [None, Regular(1.0)])
def test_deficiency_sum_rule(expr, endpoint):
    d_plus, d_minus = odd_deficiency(expr, endpoint)
    red = reduce_to_system(expr, 0.0, endpoint)
    assert deficiency_indices(red.sys) == (d_plus, d_minus)
    m = expr.m
    nu_b = 0 if endpoint is None else 2 * m + 1
    assert d_plus + d_minus == 2 * m + 1 + nu_b


@pytest.mark.parametrize("q0", [1.0, -1.0, 3.5])
def test_no_case1_for_scalar_expressions(q0):
    assert not case1_possible(OddOrderExpression(1, [0.0, 0.0], [q0, 0.0]))


# --- self-adjoint boundary conditions ----------------------------------------


def test_selfadjoint_pairs():
    check_selfadjoint_pair(np.eye(1), np.zeros((1, 1)))
    check_selfadjoint_pair(np.zeros((1, 1)), np.eye(1))
    with pytest.raises(NotSelfAdjointPair):
        check_selfadjoint_pair(np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(NotSelfAdjointPair):
        check_selfadjoint_pair(np.eye(1), 1j * np.eye(1))
    with pytest.raises(NotSelfAdjointPair):
        selfadjoint_bc(THIRD, np.eye(2), np.zeros((2, 2)))


@pytest.mark.parametrize("C0, C1", [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)])
def test_selfadjoint_eigenvalues_are_poles_of_m(contexts, C0, C1):
    ctx = contexts["third_order_interval"]
    bc = selfadjoint_bc(THIRD, [[C0]], [[C1]])
    assert len(bc.description) == 3
    eigs = bc.eigenvalues(-300.0, 300.0, 600)
    assert eigs.size >= 2
    tau = bc.tau(ctx.trip)
    for s in eigs:
        r1, r2 = (eps * np.abs(m_tau(ctx, tau, complex(s, -eps))).max() for eps in (1e-3, 1e-4))
        assert r1 > 1.0 and r2 == pytest.approx(r1, rel=1e-3)


coef = st.floats(-1.0, 1.0)


@settings(max_examples=15, deadline=None)
@given(coef, coef, coef, st.floats(0.5, 3.0))
def test_reduction_fidelity_random_coefficients(p0, p1, q1, q0):
    expr = OddOrderExpression(1, p=[p0, p1], q=[q0, q1])
    red = reduce_to_system(expr)
    jets = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.5j]])
    assert fidelity_residual(red, 0.3 + 1j, jets, t_end=2.0) <= 1e-8
