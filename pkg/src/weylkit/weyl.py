"""Base solutions, the X(λ) block matrices, boundary parameters and m-functions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .blockspace import im_part
from .boundary import (
    CB,
    FIRST,
    HAT,
    HB,
    BoundaryOperatorU,
    DecomposingTriplet,
    triplet_for,
)
from .errors import (
    ConsistencyError,
    IllPosedParameter,
    PreconditionFailed,
    ShapeMismatch,
    SingularBoundaryMatrix,
)
from .propagator import MODE_TOL, SolutionBasis, gram, l2_basis
from .system import SymmetricSystem

COND_LIMIT = 1e12
BLOCK_TOL = 1e-7
ROUTE_TOL = 1e-8
BASIS_CACHE = 64


def _cond(A: np.ndarray) -> float:
    if A.size == 0:
        return 1.0
    s = np.linalg.svd(A, compute_uv=False)
    return float(np.inf) if s[-1] == 0 else float(s[0] / s[-1])


def _rel(x: np.ndarray, scale: float = 1.0) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2)) / max(1.0, scale)


# ---------------------------------------------------------------------------
# Context: system, U and triplet with a per-λ basis cache
# ---------------------------------------------------------------------------


@dataclass
class WeylContext:
    sys: SymmetricSystem
    U: BoundaryOperatorU
    trip: DecomposingTriplet
    mode_tol: float = MODE_TOL
    _bases: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, sys: SymmetricSystem, U: BoundaryOperatorU, mode_tol: float = MODE_TOL):
        return cls(sys, U, triplet_for(sys, U), mode_tol)

    @property
    def sig(self):
        return self.sys.sig

    def basis(self, lam: complex) -> SolutionBasis:
        lam = complex(lam)
        if lam not in self._bases:
            if len(self._bases) >= BASIS_CACHE:
                self._bases.pop(next(iter(self._bases)))
            self._bases[lam] = l2_basis(self.sys, lam, self.mode_tol)
        return self._bases[lam]

    # selectors on H₀ = H ⊕ Ĥ
    @property
    def P_H(self) -> np.ndarray:
        s = self.sig
        return np.eye(s.nu_minus, dtype=complex)[: s.nu_plus]

    @property
    def P_Hhat(self) -> np.ndarray:
        """Orthogonal projector onto Ĥ inside H₀ (ν₋×ν₋)."""
        s = self.sig
        P = np.zeros((s.nu_minus, s.nu_minus), dtype=complex)
        P[s.nu_plus :, s.nu_plus :] = np.eye(s.nu_hat)
        return P

    @property
    def hat_cols(self) -> np.ndarray:
        """Coordinates of H₀ forming the ``hat`` slot (Ĥ₂ or Ĥ)."""
        s = self.sig
        return np.arange(s.nu_minus - self.trip.dims0[HAT], s.nu_minus)

    @property
    def first_cols(self) -> np.ndarray:
        return np.arange(0, self.trip.dims0[FIRST])

    def P_hat_rows(self) -> np.ndarray:
        """Rows of the identity on H₀ selecting the ``hat`` slot."""
        return np.eye(self.sig.nu_minus, dtype=complex)[self.hat_cols]


# ---------------------------------------------------------------------------
# Z solves and base solutions
# ---------------------------------------------------------------------------


def solve_Z(ctx: WeylContext, lam: complex) -> np.ndarray:
    """Coefficient matrix Z with (interpolation rows)·data·Z = I.

    Upper half-plane: rows P₁Γ₀ (dimension n₊).  Lower half-plane: rows Γ₀
    (dimension n₋).  Columns of Z are coefficients over ``ctx.basis(lam)``.
    """
    lam = complex(lam)
    if lam.imag == 0.0:
        raise ValueError("λ must be nonreal")
    basis = ctx.basis(lam)
    rows = ctx.trip.P1_rows if lam.imag > 0 else ctx.trip.Gamma0
    A = rows @ basis.data()
    if A.shape[0] != A.shape[1]:
        raise ConsistencyError(
            f"{A.shape[1]} square-integrable solutions but {A.shape[0]} boundary conditions at λ={lam}"
        )
    c = _cond(A)
    if c > COND_LIMIT:
        raise SingularBoundaryMatrix(f"boundary matrix condition {c:.3e} at λ={lam}")
    Z = np.linalg.solve(A, np.eye(A.shape[0], dtype=complex))
    r = _rel(A @ Z - np.eye(A.shape[0]))
    # a backward-stable solve leaves a residual of order eps·cond(A)
    if r > max(1e-9, 100 * np.finfo(float).eps * c):
        raise SingularBoundaryMatrix(f"Z residual {r:.3e} at λ={lam}")
    return Z


@dataclass
class WeylData:
    """Everything attached to one λ: base solutions and the X(λ) blocks.

    ``v0`` and ``u`` are coefficient matrices over ``basis``; ``u`` is u₊ on the
    upper and u₋ on the lower half-plane.
    """

    lam: complex
    basis: SolutionBasis
    Z: np.ndarray
    v0: np.ndarray
    u: np.ndarray
    m0: np.ndarray | None = None
    Phi: np.ndarray | None = None
    Psi: np.ndarray | None = None
    Mdot: np.ndarray | None = None
    M: np.ndarray | None = None
    blocks: dict[str, np.ndarray] = field(default_factory=dict)
    block_residual: float = 0.0

    @property
    def upper(self) -> bool:
        return self.lam.imag > 0

    def eval_v0(self, t) -> np.ndarray:
        return self.basis.eval(t) @ self.v0

    def eval_u(self, t) -> np.ndarray:
        return self.basis.eval(t) @ self.u


def base_solutions(ctx: WeylContext, lam: complex) -> WeylData:
    lam = complex(lam)
    trip = ctx.trip
    Z = solve_Z(ctx, lam)
    basis = ctx.basis(lam)
    if lam.imag > 0:
        v0 = np.hstack([Z[:, trip.idx1(FIRST)], np.zeros((Z.shape[0], trip.dims0[HAT]), dtype=complex)])
        u = Z[:, trip.idx1(CB)]
    else:
        v0 = Z[:, trip.idx0(FIRST, HAT)]
        u = Z[:, trip.idx0(HAT, CB, HB)]
    return WeylData(lam, basis, Z, v0, u)


def boundary_residuals(ctx: WeylContext, wd: WeylData) -> dict[str, float]:
    """Boundary conditions characterizing v₀ and u± (each should vanish)."""
    r = ctx.trip.rows
    D = wd.basis.data()
    V, Uc = D @ wd.v0, D @ wd.u
    trip = ctx.trip
    P_hat = ctx.P_hat_rows()
    out: dict[str, float] = {}
    out["G1a v0 = -P_H"] = _rel(r["G1a"] @ V + ctx.P_H)
    out["G1a u = 0"] = _rel(r["G1a"] @ Uc)
    if trip.case1_layout:
        P1 = np.eye(ctx.sig.nu_minus, dtype=complex)[ctx.sig.nu_plus : ctx.sig.nu_plus + trip.d]
        out["i(Gha1-Ghb) v0 = P_Hhat1"] = _rel(1j * (r["Gha1"] - r["Ghb"]) @ V - P1)
        out["i(Gha1-Ghb) u = 0"] = _rel(1j * (r["Gha1"] - r["Ghb"]) @ Uc)
    if wd.upper:
        out["G0b v0 = 0"] = _rel(r["G0b"] @ V)
        out["G0b u = I"] = _rel(r["G0b"] @ Uc - np.eye(trip.dim_C))
    else:
        dot = trip.dot_dim0
        out["i Ghat v0 = P_hat"] = _rel(1j * r["Ghat"] @ V - P_hat)
        out["G0b v0 = 0"] = _rel(r["G0b"] @ V)
        if not trip.case1_layout:
            out["Ghb v0 = 0"] = _rel(r["Ghb"] @ V)
        out["boundary rows u = I"] = _rel(_rows_dot(ctx) @ Uc - np.eye(dot))
    return out


# ---------------------------------------------------------------------------
# X(λ) blocks
# ---------------------------------------------------------------------------


def _rows_dot(ctx: WeylContext) -> np.ndarray:
    """Rows (i Γ̂_hat; Γ_{0b}; Γ̂_b) mapping data to 𝓗̇₀ (the last only in the case-2 layout)."""
    r = ctx.trip.rows
    hb = r["Ghb"] if not ctx.trip.case1_layout else r["Ghb"][:0]
    return np.vstack([1j * r["Ghat"], r["G0b"], hb])


def x_matrix(ctx: WeylContext, lam: complex, check: bool = True) -> WeylData:
    """Assemble m₀, Φ, Ψ, Ṁ from their defining formulas and cross-check them
    against the blocks of M(λ) = (EΓ₁ − iP₂Γ₀)Z₊ or Γ₁Z₋."""
    wd = base_solutions(ctx, lam)
    trip = ctx.trip
    r = trip.rows
    D = wd.basis.data()
    V, Uc = D @ wd.v0, D @ wd.u
    top = np.vstack([r["G0a"], r["Gha"]])
    wd.m0 = top @ V + 0.5j * ctx.P_Hhat
    wd.Phi = top @ Uc
    case2 = not trip.case1_layout
    if wd.upper:
        P_hat = ctx.P_hat_rows()
        parts = [r["Ghat"] @ V + 1j * P_hat, -r["G1b"] @ V]
        mparts = [r["Ghat"] @ Uc, -r["G1b"] @ Uc]
        if case2:
            parts.append(-1j * r["Ghb"] @ V)
            mparts.append(-1j * r["Ghb"] @ Uc)
        wd.Psi = np.vstack(parts)
        wd.Mdot = np.vstack(mparts)
        wd.M = (trip.embed1 @ trip.Gamma1 - 1j * trip.P2 @ trip.Gamma0) @ D @ wd.Z
    else:
        wd.Psi = -r["G1b"] @ V
        wd.Mdot = -r["G1b"] @ Uc
        wd.M = trip.Gamma1 @ D @ wd.Z
    wd.blocks, wd.block_residual = _block_check(ctx, wd)
    if check and wd.block_residual > BLOCK_TOL:
        raise ConsistencyError(f"X(λ) block identities violated by {wd.block_residual:.3e} at λ={lam}")
    return wd


def _block_check(ctx: WeylContext, wd: WeylData) -> tuple[dict[str, np.ndarray], float]:
    trip = ctx.trip
    M = wd.M
    f, h = trip.dims0[FIRST], trip.dims0[HAT]
    scale = max(1.0, float(np.linalg.norm(M, 2)) if M.size else 1.0)
    if wd.upper:
        rf, rh, rr = trip.idx0(FIRST), trip.idx0(HAT), trip.idx0(CB, HB)
        cf, cc = trip.idx1(FIRST), trip.idx1(CB)
        b = {
            "M1": M[np.ix_(rf, cf)],
            "M2": M[np.ix_(rf, cc)],
            "N1": M[np.ix_(rh, cf)],
            "N2": M[np.ix_(rh, cc)],
            "M3": M[np.ix_(rr, cf)],
            "M4": M[np.ix_(rr, cc)],
        }
        m0 = np.block([[b["M1"], np.zeros((f, h))], [b["N1"], 0.5j * np.eye(h)]])
        Phi = np.vstack([b["M2"], b["N2"]])
        Psi = np.block([[b["N1"], 1j * np.eye(h)], [b["M3"], np.zeros((b["M3"].shape[0], h))]])
        Mdot = np.vstack([b["N2"], b["M4"]])
    else:
        rf, rc = trip.idx1(FIRST), trip.idx1(CB)
        cf, ch, cr = trip.idx0(FIRST), trip.idx0(HAT), trip.idx0(CB, HB)
        b = {
            "M1": M[np.ix_(rf, cf)],
            "N1": M[np.ix_(rf, ch)],
            "M2": M[np.ix_(rf, cr)],
            "M3": M[np.ix_(rc, cf)],
            "N2": M[np.ix_(rc, ch)],
            "M4": M[np.ix_(rc, cr)],
        }
        m0 = np.block([[b["M1"], b["N1"]], [np.zeros((h, f)), -0.5j * np.eye(h)]])
        Phi = np.block([[b["N1"], b["M2"]], [-1j * np.eye(h), np.zeros((h, b["M2"].shape[1]))]])
        Psi = np.hstack([b["M3"], b["N2"]])
        Mdot = np.hstack([b["N2"], b["M4"]])
    res = max(
        _rel(wd.m0 - m0, scale),
        _rel(wd.Phi - Phi, scale),
        _rel(wd.Psi - Psi, scale),
        _rel(wd.Mdot - Mdot, scale),
    )
    return b, res


def symmetry_residual(ctx: WeylContext, lam: complex) -> float:
    """Largest violation of m₀*(λ̄)=m₀(λ), Φ₊*(λ̄)=Ψ₋, Ψ₊*(λ̄)=Φ₋, Ṁ₊*(λ̄)=Ṁ₋ at λ ∈ ℂ₋."""
    lam = complex(lam)
    if lam.imag > 0:
        lam = lam.conjugate()
    lo = x_matrix(ctx, lam)
    up = x_matrix(ctx, lam.conjugate())
    scale = max(1.0, float(np.linalg.norm(lo.m0, 2)))
    return max(
        _rel(up.m0.conj().T - lo.m0, scale),
        _rel(up.Phi.conj().T - lo.Psi, scale),
        _rel(up.Psi.conj().T - lo.Phi, scale),
        _rel(up.Mdot.conj().T - lo.Mdot, scale),
    )


# ---------------------------------------------------------------------------
# Boundary parameters
# ---------------------------------------------------------------------------


class TauKind(enum.Enum):
    TAU0 = "tau0"
    TRUNCATED = "truncated"
    GENERAL = "general"


MatrixFn = Callable[[complex], np.ndarray]


def _as_fn(x) -> MatrixFn:
    if callable(x):
        return lambda lam: np.atleast_2d(np.asarray(x(complex(lam)), dtype=complex))
    mat = np.atleast_2d(np.asarray(x, dtype=complex))
    return lambda lam: mat


@dataclass
class BoundaryParameter:
    """Holomorphic pair (D₀(λ), D₁(λ)) on ℂ₋; the ℂ₊ pair (C₀, C₁) is derived.

    D₀ acts on 𝓗̇₀ = hat ⊕ 𝒞_b ⊕ Ĥ_b and D₁ maps 𝒞_b into 𝓗̇₀.
    """

    kind: TauKind
    D0_fn: MatrixFn
    D1_fn: MatrixFn
    dot_dims: tuple[int, int, int]
    constant: bool = False

    @property
    def dot_dim(self) -> int:
        return sum(self.dot_dims)

    @property
    def dim_C(self) -> int:
        return self.dot_dims[1]

    @property
    def truncated(self) -> bool:
        return self.kind in (TauKind.TAU0, TauKind.TRUNCATED)

    def lower(self, lam: complex) -> tuple[np.ndarray, np.ndarray]:
        lam = complex(lam)
        if lam.imag >= 0:
            raise ValueError("the defining pair lives on the lower half-plane")
        D0 = self.D0_fn(lam).reshape(self.dot_dim, self.dot_dim)
        D1 = self.D1_fn(lam).reshape(self.dot_dim, self.dim_C)
        return D0, D1

    def upper(self, lam: complex) -> tuple[np.ndarray, np.ndarray]:
        """(C₀(λ), C₁(λ)) for λ ∈ ℂ₊: the rows annihilating the adjoint of τ₋(λ̄)."""
        lam = complex(lam)
        if lam.imag <= 0:
            raise ValueError("the derived pair lives on the upper half-plane")
        D0, D1 = self.lower(lam.conjugate())
        h, c, hb = self.dot_dims
        dd = self.dot_dim
        if c and not np.any(D1):
            # D₁ = 0: the adjoint conditions reduce to C₀P₂ = 0 and C₁ = 0
            if _cond(D0) > COND_LIMIT:
                raise IllPosedParameter("D0 is singular while D1 vanishes")
            C0 = np.zeros((c, dd), dtype=complex)
            C0[:, h : h + c] = np.eye(c)
            return C0, np.zeros((c, c), dtype=complex)
        iota1 = np.zeros((dd, c), dtype=complex)
        iota1[h : h + c] = np.eye(c)
        P2 = np.zeros((dd, dd), dtype=complex)
        P2[:h, :h] = np.eye(h)
        P2[h + c :, h + c :] = np.eye(hb)
        P1 = np.zeros((c, dd), dtype=complex)
        P1[:, h : h + c] = np.eye(c)
        A = np.vstack([iota1 @ D1.conj().T + 1j * P2 @ D0.conj().T, -P1 @ D0.conj().T])
        # left null space of A has dimension dim 𝒞_b
        if c == 0:
            return np.zeros((0, dd), dtype=complex), np.zeros((0, 0), dtype=complex)
        Uu, s, _ = np.linalg.svd(A, full_matrices=True)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
        N = Uu[:, rank:].conj().T
        if N.shape[0] != c:
            raise IllPosedParameter(f"derived upper pair has {N.shape[0]} rows, expected {c}")
        C0, C1 = N[:, :dd], N[:, dd:]
        # normalize so that τ₀ reproduces C₀ = P_{𝒞_b}, C₁ = 0 exactly
        G = C0[:, h : h + c] + 1j * C1
        if _cond(G) < COND_LIMIT:
            Gi = np.linalg.inv(G)
            C0, C1 = Gi @ C0, Gi @ C1
        return C0, C1

    def cauchy_riemann_defect(self, lam: complex, h: float = 1e-5) -> float:
        """Finite-difference holomorphy defect of D₀ and D₁ at λ ∈ ℂ₋."""
        lam = complex(lam)
        out = 0.0
        for fn in (self.D0_fn, self.D1_fn):
            dx = (fn(lam + h) - fn(lam - h)) / (2 * h)
            dy = (fn(lam + 1j * h) - fn(lam - 1j * h)) / (2j * h)
            out = max(out, _rel(dx - dy, max(1.0, float(np.abs(dx).max(initial=0.0)))))
        return out


def make_tau(
    trip: DecomposingTriplet,
    kind: TauKind | str = TauKind.TAU0,
    D0=None,
    D1=None,
) -> BoundaryParameter:
    """τ₀, a truncated pair (D̄₀, D̄₁) on 𝒞_b ⊕ Ĥ_b, or a general pair on 𝓗̇₀."""
    kind = TauKind(kind) if isinstance(kind, str) else kind
    h, c, hb = trip.dot_dims
    dd = h + c + hb
    if kind is TauKind.TAU0:
        I = np.eye(dd, dtype=complex)
        Z = np.zeros((dd, c), dtype=complex)
        return BoundaryParameter(kind, _as_fn(I), _as_fn(Z), trip.dot_dims, True)
    if D0 is None or D1 is None:
        raise ShapeMismatch("both D0 and D1 are required")
    const = not callable(D0) and not callable(D1)
    f0, f1 = _as_fn(D0), _as_fn(D1)
    probe = complex(0.0, -1.0)
    s0, s1 = f0(probe).shape, f1(probe).shape
    if kind is TauKind.TRUNCATED:
        if s0 != (c + hb, c + hb) or s1 != (c + hb, c):
            raise ShapeMismatch(f"truncated pair must be {(c + hb, c + hb)} and {(c + hb, c)}, got {s0}, {s1}")

        def D0_full(lam, f0=f0):
            out = np.zeros((dd, dd), dtype=complex)
            out[:h, :h] = np.eye(h)
            out[h:, h:] = f0(lam)
            return out

        def D1_full(lam, f1=f1):
            out = np.zeros((dd, c), dtype=complex)
            out[h:] = f1(lam)
            return out

        return BoundaryParameter(kind, D0_full, D1_full, trip.dot_dims, const)
    if s0 != (dd, dd) or s1 != (dd, c):
        raise ShapeMismatch(f"general pair must be {(dd, dd)} and {(dd, c)}, got {s0}, {s1}")
    return BoundaryParameter(kind, f0, f1, trip.dot_dims, const)


# ---------------------------------------------------------------------------
# v_τ and m_τ
# ---------------------------------------------------------------------------


def _guarded_solve(A: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    c = _cond(A)
    if c > COND_LIMIT:
        raise IllPosedParameter(f"{what} is singular (condition {c:.3e})")
    return np.linalg.solve(A, B) if A.size else np.zeros((A.shape[0], B.shape[1]), dtype=complex)


@dataclass
class TauSolution:
    """v_τ as coefficients over the L² basis and m_τ computed both ways."""

    lam: complex
    wd: WeylData
    coef: np.ndarray
    m_formula: np.ndarray
    m_direct: np.ndarray
    coef_direct: np.ndarray
    cond: float = 1.0

    @property
    def m(self) -> np.ndarray:
        return self.m_formula

    @property
    def route_residual(self) -> float:
        return _rel(self.m_formula - self.m_direct, float(np.linalg.norm(self.m_formula, 2)))

    def route_tol(self, tol: float = ROUTE_TOL) -> float:
        """Agreement expected of the two routes; loosened near poles by the BVP condition."""
        return max(tol, 100.0 * np.finfo(float).eps * self.cond)

    @property
    def routes_agree(self) -> bool:
        return self.route_residual <= self.route_tol()

    def eval(self, t) -> np.ndarray:
        return self.wd.basis.eval(t) @ self.coef


def _correction(tau: BoundaryParameter, wd: WeylData) -> np.ndarray:
    """K with m_τ = m₀ + Φ K and v_τ = v₀ + u K."""
    lam = wd.lam
    if tau.dim_C == 0:
        return np.zeros((wd.u.shape[1], wd.m0.shape[1]), dtype=complex)
    if wd.upper:
        D0, D1 = tau.lower(lam.conjugate())
        D0s, D1s = D0.conj().T, D1.conj().T
        inner = _guarded_solve(D0s - wd.Mdot @ D1s, np.eye(D0s.shape[0], dtype=complex), "D0* − Ṁ₊D1*")
        T = -D1s @ inner
        return -T @ wd.Psi
    D0, D1 = tau.lower(lam)
    return _guarded_solve(D0 - D1 @ wd.Mdot, D1 @ wd.Psi, "D0 − D1Ṁ₋")


def _direct(ctx: WeylContext, tau: BoundaryParameter, wd: WeylData) -> np.ndarray:
    """Solve the boundary value problem for v_τ directly over the L² basis."""
    trip = ctx.trip
    r = trip.rows
    s = ctx.sig
    D = wd.basis.data()
    blocks_A = [r["G1a"] @ D]
    blocks_b = [-ctx.P_H]
    if trip.case1_layout:
        P1 = np.eye(s.nu_minus, dtype=complex)[s.nu_plus : s.nu_plus + trip.d]
        blocks_A.append(1j * (r["Gha1"] - r["Ghb"]) @ D)
        blocks_b.append(P1)
    rows_dot = _rows_dot(ctx) @ D
    rhs_dot = np.zeros((trip.dot_dim0, s.nu_minus), dtype=complex)
    rhs_dot[: trip.dims0[HAT]] = ctx.P_hat_rows()
    if wd.upper:
        C0, C1 = tau.upper(wd.lam)
        blocks_A.append(C0 @ rows_dot + C1 @ (r["G1b"] @ D))
        blocks_b.append(C0 @ rhs_dot)
    else:
        D0, D1 = tau.lower(wd.lam)
        blocks_A.append(D0 @ rows_dot + D1 @ (r["G1b"] @ D))
        blocks_b.append(D0 @ rhs_dot)
    A = np.vstack(blocks_A)
    b = np.vstack(blocks_b)
    if A.shape[0] != A.shape[1]:
        raise ConsistencyError(f"boundary value problem is {A.shape[0]}×{A.shape[1]}")
    return _guarded_solve(A, b, "boundary value problem"), _cond(A)


def v_tau(ctx: WeylContext, tau: BoundaryParameter, lam: complex) -> TauSolution:
    wd = x_matrix(ctx, lam)
    K = _correction(tau, wd)
    coef = wd.v0 + wd.u @ K
    m_formula = wd.m0 + wd.Phi @ K
    coef_direct, cond = _direct(ctx, tau, wd)
    r = ctx.trip.rows
    D = wd.basis.data()
    m_direct = np.vstack([r["G0a"], r["Gha"]]) @ D @ coef_direct + 0.5j * ctx.P_Hhat
    return TauSolution(complex(lam), wd, coef, m_formula, m_direct, coef_direct, cond)


def m_tau(
    ctx: WeylContext, tau: BoundaryParameter, lam: complex, tol: float = ROUTE_TOL
) -> np.ndarray:
    sol = v_tau(ctx, tau, lam)
    if sol.route_residual > sol.route_tol(tol):
        raise ConsistencyError(f"m_τ routes disagree by {sol.route_residual:.3e} at λ={lam}")
    return sol.m


def triangularity_residual(ctx: WeylContext, m: np.ndarray) -> float:
    """‖lower-left‖ + ‖lower-right + (i/2)I‖ in the first ⊕ hat split (lower half-plane)."""
    f = ctx.first_cols
    h = ctx.hat_cols
    if h.size == 0:
        return 0.0
    ll = m[np.ix_(h, f)]
    lr = m[np.ix_(h, h)] + 0.5j * np.eye(h.size)
    return _rel(ll) + _rel(lr)


def psd_bound_min_eigenvalue(ctx: WeylContext, sol: TauSolution, tol: float = 1e-11) -> float:
    """Smallest eigenvalue of (Im λ)⁻¹ Im m_τ − ∫ v_τ* Δ v_τ."""
    G = gram(ctx.sys, sol.wd.basis, sol.wd.basis, sol.coef, sol.coef, tol=tol)
    X = im_part(sol.m) / sol.lam.imag - G
    X = 0.5 * (X + X.conj().T)
    return float(np.linalg.eigvalsh(X).min())


# ---------------------------------------------------------------------------
# Minimal-index path
# ---------------------------------------------------------------------------


def minimal_m(ctx: WeylContext, lam: complex) -> np.ndarray:
    """The unique m-function when ν_{b+} = 0 (so 𝒞_b = {0} and m = m₀)."""
    if ctx.trip.form.nu_b_plus != 0:
        raise PreconditionFailed("the minimal-index path needs ν_b+ = 0")
    return x_matrix(ctx, lam).m0


def displacement_residual(ctx: WeylContext, mu: complex, lam: complex, tol: float = 1e-11) -> float:
    """m(μ) − m*(λ) − (μ − λ̄)∫ v₀*(λ)Δ v₀(μ), relative to ‖m(μ)‖."""
    form = ctx.trip.form
    if form.nu_b_plus != 0 or form.nu_b_minus != 0:
        raise PreconditionFailed("the displacement identity needs ν_b± = 0")
    a = x_matrix(ctx, lam)
    b = x_matrix(ctx, mu)
    G = gram(ctx.sys, a.basis, b.basis, a.v0, b.v0, tol=tol)
    lhs = b.m0 - a.m0.conj().T
    rhs = (complex(mu) - complex(lam).conjugate()) * G
    return _rel(lhs - rhs, float(np.linalg.norm(b.m0, 2)))


__all__ = [
    "BoundaryParameter",
    "TauKind",
    "TauSolution",
    "WeylContext",
    "WeylData",
    "base_solutions",
    "boundary_residuals",
    "displacement_residual",
    "m_tau",
    "make_tau",
    "minimal_m",
    "psd_bound_min_eigenvalue",
    "solve_Z",
    "symmetry_residual",
    "triangularity_residual",
    "v_tau",
    "x_matrix",
]
