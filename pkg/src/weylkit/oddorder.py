"""Odd-order expressions l[y], their quasi-derivatives and reduction to a symmetric system.

For constant scalar coefficients the expression is the polynomial

    l = Σ_k (−1)^k (i q_{m−k} D^{2k+1} + p_{m−k} D^{2k}),   D = d/dt,

and every quasi-derivative is a polynomial in D applied to y.  The matrix 𝐁
of the reduced system is found by matching these polynomials, and the
reduction is certified against direct integration of l[y] = λy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .blockspace import BlockSignature, herm, inertia
from .boundary import (
    BoundaryOperatorU,
    U_from_hermitian,
    build_endpoint_form,
    extend_U,
    hyperbolic_realization,
)
from .errors import (
    ConsistencyError,
    EigenCrossing,
    MatchFailure,
    NotSelfAdjointPair,
    SingularQ0,
    UnsupportedSubclass,
)
from .propagator import Propagation, deficiency_indices, l2_basis
from .system import ConstantTail, Regular, Sampler, SymmetricSystem, as_sampler

MATCH_TOL = 1e-10
FIDELITY_TOL = 1e-8
Q0_TOL = 1e-10


# ---------------------------------------------------------------------------
# Expression
# ---------------------------------------------------------------------------


@dataclass
class OddOrderExpression:
    """Order 2m+1 expression with Hermitian coefficients p_0..p_m, q_0..q_m on H."""

    m: int
    p: Sequence
    q: Sequence
    dimH: int = 1
    name: str = "oddorder"
    p_s: list[Sampler] = field(init=False, repr=False)
    q_s: list[Sampler] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be positive")
        if len(self.p) != self.m + 1 or len(self.q) != self.m + 1:
            raise ValueError(f"need {self.m + 1} coefficients p_k and q_k")
        self.p_s = [as_sampler(np.reshape(c, (self.dimH, self.dimH)) if not isinstance(c, Sampler) else c) for c in self.p]
        self.q_s = [as_sampler(np.reshape(c, (self.dimH, self.dimH)) if not isinstance(c, Sampler) else c) for c in self.q]
        for s in self.p_s + self.q_s:
            if s.shape != (self.dimH, self.dimH):
                raise ValueError("coefficient shape does not match dim H")

    @property
    def order(self) -> int:
        return 2 * self.m + 1

    @property
    def is_constant(self) -> bool:
        return all(s.is_constant for s in self.p_s + self.q_s)

    @property
    def scalar_constant(self) -> bool:
        return self.dimH == 1 and self.is_constant

    def scalar_coeffs(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.scalar_constant:
            raise UnsupportedSubclass("only scalar constant-coefficient expressions reduce fully")
        p = np.array([complex(s(0.0)[0, 0]) for s in self.p_s])
        q = np.array([complex(s(0.0)[0, 0]) for s in self.q_s])
        if np.abs(p.imag).max() > 1e-14 or np.abs(q.imag).max() > 1e-14:
            raise ValueError("scalar coefficients must be real")
        return p.real, q.real

    def symbol(self) -> np.ndarray:
        """Coefficients c_j of D^j in l (scalar constant case), j = 0..2m+1."""
        p, q = self.scalar_coeffs()
        m = self.m
        c = np.zeros(2 * m + 2, dtype=complex)
        for k in range(m + 1):
            c[2 * k + 1] += (-1) ** k * 1j * q[m - k]
            c[2 * k] += (-1) ** k * p[m - k]
        return c


# ---------------------------------------------------------------------------
# q₀ factorization
# ---------------------------------------------------------------------------


@dataclass
class QFactorization:
    """Q₁, Q̂, Q₂ on a grid with i·s·q₀ = −Q₁*Q₂ + Q₂*Q₁ + iQ̂*Q̂, s = ``sign``."""

    grid: np.ndarray
    Q1: np.ndarray
    Qhat: np.ndarray
    Q2: np.ndarray
    nu0_plus: int
    nu0_minus: int
    sign: int
    residual: float

    @property
    def dim_Hprime(self) -> int:
        return min(self.nu0_plus, self.nu0_minus)

    @property
    def dim_Hhat(self) -> int:
        return abs(self.nu0_plus - self.nu0_minus)


def q0_inertia_factorization(expr: OddOrderExpression, grid: Sequence[float]) -> QFactorization:
    ts = np.atleast_1d(np.asarray(grid, dtype=float))
    q0 = expr.q_s[0].at(ts)
    scale = max(1.0, float(np.abs(q0).max()))
    counts = set()
    spectra = []
    for Q in q0:
        w = np.linalg.eigvalsh(herm(Q))
        if np.abs(w).min() <= Q0_TOL * scale:
            raise SingularQ0("q0 is not invertible on the grid")
        counts.add(inertia(Q).as_tuple())
        spectra.append(w)
    if len(counts) > 1:
        raise SingularQ0("the inertia of q0 changes along the grid")
    pos, neg, _ = counts.pop()
    sign = 1 if pos >= neg else -1
    spectra = np.array(spectra)
    if expr.dimH > 1 and ts.size > 1:
        # eigen-tracking needs the eigenvalue gaps either to stay open or to stay closed
        gaps = np.diff(spectra, axis=1)
        closed = gaps <= 1e-8 * scale
        if np.any(closed.any(axis=0) & ~closed.all(axis=0)):
            raise EigenCrossing("eigenvalues of q0 cross on the grid")
    Q1s, Qhs, Q2s = [], [], []
    res = 0.0
    for Q in q0:
        real = hyperbolic_realization(sign * Q)
        Q1s.append(real.G0)
        Qhs.append(real.Ghat)
        Q2s.append(real.G1)
        lhs = 1j * sign * Q
        rhs = -real.G0.conj().T @ real.G1 + real.G1.conj().T @ real.G0 + 1j * real.Ghat.conj().T @ real.Ghat
        res = max(res, float(np.abs(lhs - rhs).max()) / scale)
        stacked = np.vstack([real.G0, real.Ghat, real.G1])
        if np.linalg.matrix_rank(stacked) < stacked.shape[1]:
            raise SingularQ0("Q(t) is not injective")
    n0p, n0m = (pos, neg) if sign > 0 else (neg, pos)
    return QFactorization(ts, np.array(Q1s), np.array(Qhs), np.array(Q2s), n0p, n0m, sign, res)


# ---------------------------------------------------------------------------
# Polynomials in D that are affine in the unknown entries of 𝐁
# ---------------------------------------------------------------------------


class _Affine:
    """c(θ) = c₀ + Σ θ_i c_i with c's coefficient vectors of D^0..D^N."""

    def __init__(self, const: np.ndarray, lin: np.ndarray):
        self.const = const
        self.lin = lin

    @classmethod
    def monomial(cls, j: int, size: int, nparam: int, coeff: complex = 1.0) -> "_Affine":
        c = np.zeros(size, dtype=complex)
        c[j] = coeff
        return cls(c, np.zeros((nparam, size), dtype=complex))

    @classmethod
    def param_times(cls, i: int, poly: np.ndarray, nparam: int, coeff: complex = 1.0) -> "_Affine":
        lin = np.zeros((nparam, poly.size), dtype=complex)
        lin[i] = coeff * poly
        return cls(np.zeros(poly.size, dtype=complex), lin)

    def __add__(self, o: "_Affine") -> "_Affine":
        return _Affine(self.const + o.const, self.lin + o.lin)

    def __sub__(self, o: "_Affine") -> "_Affine":
        return _Affine(self.const - o.const, self.lin - o.lin)

    def scale(self, a: complex) -> "_Affine":
        return _Affine(a * self.const, a * self.lin)

    def D(self) -> "_Affine":
        c = np.roll(self.const, 1)
        L = np.roll(self.lin, 1, axis=1)
        if abs(c[0]) > 0 or np.any(L[:, 0]):
            raise OverflowError("polynomial degree exceeds the jet size")
        return _Affine(c, L)

    def at(self, theta: np.ndarray) -> np.ndarray:
        return self.const + theta @ self.lin


@dataclass
class _Params:
    """Real parametrization of B₁₁ (Hermitian m×m), B_{Ĥ1} (1×m) and b."""

    m: int

    @property
    def count(self) -> int:
        return self.m * self.m + 2 * self.m + 1

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        m = self.m
        B11 = np.zeros((m, m), dtype=complex)
        k = 0
        for j in range(m):
            B11[j, j] = theta[k]
            k += 1
        for j in range(m):
            for l in range(j + 1, m):
                B11[j, l] = theta[k] + 1j * theta[k + 1]
                B11[l, j] = theta[k] - 1j * theta[k + 1]
                k += 2
        Bh1 = theta[k : k + m] + 1j * theta[k + m : k + 2 * m]
        k += 2 * m
        return B11, Bh1, float(theta[k])

    def b11_entry(self, j: int, l: int) -> list[tuple[int, complex]]:
        """Entry (j,l) of B₁₁ as Σ coeff·θ_i."""
        m = self.m
        if j == l:
            return [(j, 1.0)]
        a, c = (j, l) if j < l else (l, j)
        k = m
        for jj in range(m):
            for ll in range(jj + 1, m):
                if (jj, ll) == (a, c):
                    return [(k, 1.0), (k + 1, 1j if j < l else -1j)]
                k += 2
        raise IndexError

    def bh1_entry(self, j: int, conj: bool = False) -> list[tuple[int, complex]]:
        base = self.m * self.m
        return [(base + j, 1.0), (base + self.m + j, -1j if conj else 1j)]

    @property
    def b_index(self) -> int:
        return self.count - 1


def _quasi_polys(m: int, q0: float, theta: np.ndarray | None = None):
    """Quasi-derivatives y^{[0]}..y^{[2m+1]} and w = √q₀ y^{(m)} as affine polynomials."""
    par = _Params(m)
    P = par.count
    size = 2 * m + 2
    r = np.sqrt(q0)
    y0 = [_Affine.monomial(j, size, P) for j in range(m)]
    w = _Affine.monomial(m, size, P, r)

    def combo(entries, poly):
        out = _Affine(np.zeros(size, dtype=complex), np.zeros((P, size), dtype=complex))
        for i, c in entries:
            out = out + _Affine.param_times(i, poly, P, c)
        return out

    # y^{[m+1]} = √q₀ (i w' − B_{Ĥ1}𝐲₀ − b w)
    acc = w.D().scale(1j)
    for j in range(m):
        acc = acc - combo(par.bh1_entry(j), y0[j].const)
    acc = acc - combo([(par.b_index, 1.0)], w.const)
    qd = {m + 1: acc.scale(r)}
    # y^{[2m−j+1]} = −D y^{[2m−j]} − (B₁₁𝐲₀)_j − B_{1Ĥ,j} w, j = m−1, …, 0
    for j in range(m - 1, -1, -1):
        cur = qd[2 * m - j].D().scale(-1.0)
        for l in range(m):
            cur = cur - combo(par.b11_entry(j, l), y0[l].const)
        cur = cur - combo(par.bh1_entry(j, conj=True), w.const)
        qd[2 * m - j + 1] = cur
    for j in range(m):
        qd[j] = y0[j]
    qd[m] = _Affine.monomial(m, size, P)
    return qd, w, par


@dataclass
class Reduction:
    """Reduced system of a scalar constant-coefficient expression and its maps."""

    expr: OddOrderExpression
    sys: SymmetricSystem
    B: np.ndarray
    theta: np.ndarray
    match_residual: float
    quasi: np.ndarray  # (2m+2) × (2m+2): row k gives y^{[k]} over the jet (y, …, y^{(2m+1)})
    bold: np.ndarray  # n × (2m+1): 𝐲 over the jet (y, …, y^{(2m)})

    def bold_vector(self, jet: np.ndarray) -> np.ndarray:
        """𝐲 = (y, …, y^{[m−1]}, Q̂y^{(m)}, y^{[2m]}, …, y^{[m+1]}) from (y, …, y^{(2m)})."""
        jet = np.asarray(jet, dtype=complex)
        return self.bold @ jet[: self.bold.shape[1]]

    def jet_from_bold(self, yb: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.bold, yb)


def reduce_to_system(
    expr: OddOrderExpression,
    a: float = 0.0,
    endpoint: Regular | ConstantTail | None = None,
) -> Reduction:
    """Symmetric system with 𝐉 on 𝐇 ⊕ Ĥ ⊕ 𝐇 and 𝚫 = diag(𝐏, 0, 0).

    The default endpoint is the constant tail from ``a`` (a half-line problem).
    """
    if not expr.scalar_constant:
        raise UnsupportedSubclass("full reduction is available for scalar constant coefficients")
    if expr.m > 2:
        raise UnsupportedSubclass("full reduction is certified for m ≤ 2")
    p, q = expr.scalar_coeffs()
    if q[0] <= 0:
        raise UnsupportedSubclass("reduction expects q0 > 0; negate the expression and λ")
    m = expr.m
    qd, w, par = _quasi_polys(m, q[0])
    target = expr.symbol()
    top = qd[2 * m + 1]
    diff_const = top.const - target
    A = np.vstack([top.lin.T.real, top.lin.T.imag])
    rhs = -np.concatenate([diff_const.real, diff_const.imag])
    theta, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = float(np.abs(top.at(theta) - target).max())
    if resid > MATCH_TOL:
        raise MatchFailure(f"coefficient matching residual {resid:.3e}")
    B11, Bh1, b = par.unpack(theta)
    n = 2 * m + 1
    B = np.zeros((n, n), dtype=complex)
    s0, sh, s1 = slice(0, m), m, slice(m + 1, n)
    B[s0, s0] = B11
    B[sh, s0] = Bh1
    B[s0, sh] = Bh1.conj()
    B[sh, sh] = b
    S = np.eye(m, k=1)
    B[s1, s0] = S
    B[s0, s1] = S.T
    em = np.zeros(m)
    em[-1] = 1.0 / np.sqrt(q[0])
    B[s1, sh] = em
    B[sh, s1] = em
    Delta = np.zeros((n, n), dtype=complex)
    Delta[0, 0] = 1.0
    if endpoint is None:
        endpoint = ConstantTail(a, B, Delta)
    sig = BlockSignature(m, 1)
    sys = SymmetricSystem(sig, a, endpoint, B, Delta, name=expr.name)
    size = 2 * m + 2
    quasi = np.array([qd[k].at(theta) for k in range(size)])
    rows = [quasi[j] for j in range(m)] + [w.const] + [quasi[2 * m - j] for j in range(m)]
    bold = np.array(rows)[:, : 2 * m + 1]
    if np.any(np.abs(np.array(rows)[:, 2 * m + 1]) > 0):
        raise MatchFailure("bold vector needs derivatives beyond order 2m")
    return Reduction(expr, sys, B, theta, resid, quasi, bold)


def quasi_derivatives(red: Reduction, jet: Sequence[complex]) -> tuple[np.ndarray, np.ndarray]:
    """(y^{[0]}, …, y^{[2m+1]}) and the bold vector 𝐲 from the jet (y, …, y^{(2m+1)})."""
    jet = np.asarray(jet, dtype=complex)
    size = 2 * red.expr.m + 2
    if jet.size < size:
        jet = np.concatenate([jet, np.zeros(size - jet.size, dtype=complex)])
    return red.quasi @ jet[:size], red.bold_vector(jet)


# ---------------------------------------------------------------------------
# Certification against the scalar equation
# ---------------------------------------------------------------------------


def scalar_solution(expr: OddOrderExpression, lam: complex, jet0: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Jets (y, …, y^{(2m)}) of l[y] = λy integrated as a companion system."""
    c = expr.symbol()
    N = expr.order
    lead = c[N]

    def rhs(t, u):
        top = (lam * u[0] - c[:N] @ u) / lead
        return np.concatenate([u[1:], [top]])

    sol = solve_ivp(
        rhs, (ts[0], ts[-1]), np.asarray(jet0, dtype=complex), method="DOP853",
        rtol=1e-13, atol=1e-15, t_eval=ts,
    )
    if not sol.success:
        raise ConsistencyError(f"scalar integration failed: {sol.message}")
    return sol.y.T


def fidelity_residual(
    red: Reduction, lam: complex, jets: np.ndarray, t_end: float = 5.0, samples: int = 41
) -> float:
    """max_t |𝐘(t)𝐲(a) − 𝐲(t)| / max|𝐲| with 𝐲(t) from direct scalar integration."""
    sys = red.sys
    ts = np.linspace(sys.a, sys.a + t_end, samples)
    Y = Propagation(_interval_copy(sys, sys.a + t_end), lam).Y(ts)
    worst = 0.0
    for jet0 in np.atleast_2d(jets):
        direct = scalar_solution(red.expr, lam, jet0, ts)
        bold_direct = direct @ red.bold.T
        bold_sys = Y @ red.bold_vector(jet0)
        scale = max(1.0, float(np.abs(bold_direct).max()))
        worst = max(worst, float(np.abs(bold_sys - bold_direct).max()) / scale)
    return worst


def _interval_copy(sys: SymmetricSystem, b: float) -> SymmetricSystem:
    return SymmetricSystem(sys.sig, sys.a, Regular(b), sys.B, sys.Delta, sys.name)


def scalar_l2_count(expr: OddOrderExpression, lam: complex, mode_tol: float = 1e-6) -> int:
    """Number of characteristic roots of l = λ with Re κ < 0."""
    c = expr.symbol().copy()
    c[0] -= lam
    roots = np.roots(c[::-1])
    return int(np.sum(roots.real < -mode_tol))


def l2_count_agreement(red: Reduction, lambdas: Sequence[complex]) -> bool:
    return all(
        scalar_l2_count(red.expr, lam) == l2_basis(red.sys, lam).k for lam in lambdas
    )


# ---------------------------------------------------------------------------
# Deficiency indices
# ---------------------------------------------------------------------------


def odd_deficiency(
    expr: OddOrderExpression, endpoint: Regular | ConstantTail | None = None, a: float = 0.0
) -> tuple[int, int]:
    """d₊ = m·dim H + ν₀₋ + ν_b+, d₋ = m·dim H + ν₀₊ + ν_b−, checked on the reduced system."""
    fac = q0_inertia_factorization(expr, [a])
    red = reduce_to_system(expr, a, endpoint)
    form = build_endpoint_form(red.sys)
    d_plus = expr.m * expr.dimH + fac.nu0_minus + form.nu_b_plus
    d_minus = expr.m * expr.dimH + fac.nu0_plus + form.nu_b_minus
    if deficiency_indices(red.sys) != (d_plus, d_minus):
        raise ConsistencyError(
            f"index formula gives {(d_plus, d_minus)}, reduced system {deficiency_indices(red.sys)}"
        )
    return d_plus, d_minus


def case1_possible(expr: OddOrderExpression, grid: Sequence[float] = (0.0,)) -> bool:
    """Whether ν₀₊ − ν₀₋ > ν_b+ − ν_b− > 0 has an integer solution for this expression."""
    fac = q0_inertia_factorization(expr, grid)
    return fac.dim_Hhat >= 2


# ---------------------------------------------------------------------------
# Self-adjoint boundary conditions on a regular interval
# ---------------------------------------------------------------------------


@dataclass
class SelfAdjointBC:
    """Γ_{1a}y = 0, Γ̂_a y = Γ̂_b y, C₀Γ_{0b}y + C₁Γ_{1b}y = 0 on the reduced system."""

    red: Reduction
    U: BoundaryOperatorU
    C0: np.ndarray
    C1: np.ndarray
    rows_a: np.ndarray
    rows_b: np.ndarray
    description: list[str]

    @property
    def sys(self) -> SymmetricSystem:
        return self.red.sys

    def char(self, lam: complex) -> complex:
        Yb = Propagation(self.sys, lam).Y_end
        return complex(np.linalg.det(self.rows_a + self.rows_b @ Yb))

    def eigenvalues(self, lo: float, hi: float, samples: int = 400) -> np.ndarray:
        """Real zeros of the characteristic determinant on [lo, hi]."""
        probe = complex(0.5 * (lo + hi), 1.0)
        c = self.char(probe.conjugate()) / np.conj(self.char(probe))
        phase = np.exp(-0.5j * np.angle(c))
        grid = np.linspace(lo, hi, samples)
        vals = np.array([self.char(s) * phase for s in grid])
        scale = float(np.abs(vals).max())
        realness = float(np.abs(vals.imag).max()) / scale
        if realness > 1e-6:
            raise ConsistencyError(f"characteristic function is not real on ℝ ({realness:.2e})")
        roots = []
        f = lambda s: float((self.char(s) * phase).real)  # noqa: E731
        for i in range(samples - 1):
            v0, v1 = vals[i].real, vals[i + 1].real
            if v0 == 0.0:
                roots.append(grid[i])
            elif v0 * v1 < 0:
                roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-13, rtol=1e-15))
        return np.array(roots)

    def tau(self, trip):
        """The same conditions as a constant boundary parameter of the triplet."""
        from .weyl import make_tau

        return make_tau(trip, "general", self.C0, self.C1)


def check_selfadjoint_pair(C0: np.ndarray, C1: np.ndarray, tol: float = 1e-10) -> None:
    C0 = np.atleast_2d(np.asarray(C0, dtype=complex))
    C1 = np.atleast_2d(np.asarray(C1, dtype=complex))
    if C0.shape != C1.shape or C0.shape[0] != C0.shape[1]:
        raise NotSelfAdjointPair("C0 and C1 must be square of equal size")
    X = C1 @ C0.conj().T
    scale = max(1.0, float(np.linalg.norm(C0, 2) * np.linalg.norm(C1, 2)))
    if float(np.linalg.norm(X - X.conj().T, 2)) > tol * scale:
        raise NotSelfAdjointPair("C1 C0* is not Hermitian")
    for s in (1j, -1j):
        M = C0 + s * C1
        sv = np.linalg.svd(M, compute_uv=False)
        if sv.size and sv[-1] <= tol * max(1.0, sv[0]):
            raise NotSelfAdjointPair("C0 ± iC1 is not invertible")


def selfadjoint_bc(
    expr: OddOrderExpression,
    C0,
    C1,
    a: float = 0.0,
    b: float = 1.0,
    U: BoundaryOperatorU | None = None,
) -> SelfAdjointBC:
    C0 = np.atleast_2d(np.asarray(C0, dtype=complex))
    C1 = np.atleast_2d(np.asarray(C1, dtype=complex))
    check_selfadjoint_pair(C0, C1)
    red = reduce_to_system(expr, a, Regular(b))
    sys = red.sys
    sig = sys.sig
    form = build_endpoint_form(sys)
    if form.nu_b_plus - form.nu_b_minus != sig.nu_hat:
        raise ConsistencyError("self-adjoint conditions of this form need equal indices")
    if C0.shape[0] != form.dim_C:
        raise NotSelfAdjointPair(f"C0, C1 must act on a space of dimension {form.dim_C}")
    if U is None:
        U = U_from_hermitian(sig, np.zeros((sig.nu_plus, sig.nu_plus)))
    elif not U.extended:
        U = extend_U(U)
    real = form.real
    n = sig.n
    rows_a = np.vstack([U.U_one, U.U_hat, np.zeros((form.dim_C, n))])
    rows_b = np.vstack([
        np.zeros((sig.nu_plus, n)),
        -real.Ghat,
        C0 @ real.G0 + C1 @ real.G1,
    ])
    desc = [
        "Gamma_1a y = 0",
        "Gamma_hat_a y = Gamma_hat_b y",
        "C0 Gamma_0b y + C1 Gamma_1b y = 0",
    ]
    return SelfAdjointBC(red, U, C0, C1, rows_a, rows_b.astype(complex), desc)


__all__ = [
    "OddOrderExpression",
    "QFactorization",
    "Reduction",
    "SelfAdjointBC",
    "case1_possible",
    "check_selfadjoint_pair",
    "fidelity_residual",
    "l2_count_agreement",
    "odd_deficiency",
    "q0_inertia_factorization",
    "quasi_derivatives",
    "reduce_to_system",
    "scalar_l2_count",
    "scalar_solution",
    "selfadjoint_bc",
]
