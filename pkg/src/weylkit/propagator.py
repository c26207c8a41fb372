"""Fundamental matrices, square-integrable solution bases and weighted Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, schur, solve_sylvester, solve_triangular

from .errors import ConsistencyError, IndeterminateMode, IntegratorFailure
from .system import AbstractForm, ConstantTail, Regular, SymmetricSystem

RTOL = 1e-11
ATOL = 1e-13
MODE_TOL = 1e-6
DICHOTOMY_COND = 1e8
DICHOTOMY_EXPONENT = 40.0  # ρ·length beyond which single-shot propagation is skipped
GL_NODES = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


# ---------------------------------------------------------------------------
# Matrix exponentials on arrays of times
# ---------------------------------------------------------------------------


def expm_series(A: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """exp(A τ) for every τ in ``taus``; shape (m, n, n).

    Uses an eigendecomposition when it is well conditioned and falls back to
    a batched Padé exponential otherwise (defective or nearly defective A).
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    n = A.shape[0]
    w, V = np.linalg.eig(A)
    if np.linalg.cond(V) < 1e6:
        Vinv = np.linalg.inv(V)
        return np.einsum("ij,mj,jk->mik", V, np.exp(np.outer(taus, w)), Vinv)
    if taus.size == 0:
        return np.zeros((0, n, n), dtype=complex)
    return expm(A[None, :, :] * taus[:, None, None])


# ---------------------------------------------------------------------------
# Fundamental matrix
# ---------------------------------------------------------------------------


def _integrate(
    sys: SymmetricSystem, lam: complex, y0: np.ndarray, t_from: float, t_to: float
):
    """Dense solution of Y' = -J(B + λΔ)Y from t_from to t_to (either direction)."""
    n, k = y0.shape
    J = sys.J

    def rhs(t, y):
        A = -J @ (sys.B(t) + lam * sys.Delta(t))
        return (A @ y.reshape(n, k)).ravel()

    sol = solve_ivp(
        rhs,
        (t_from, t_to),
        y0.astype(complex).ravel(),
        method="DOP853",
        rtol=RTOL,
        atol=ATOL,
        dense_output=True,
    )
    if not sol.success:
        raise IntegratorFailure(f"integration failed at λ={lam}: {sol.message}")
    return sol.sol


class Propagation:
    """Fundamental matrix Y(t,λ) with Y(a,λ) = I."""

    def __init__(self, sys: SymmetricSystem, lam: complex):
        self.sys = sys
        self.lam = complex(lam)
        n = sys.n
        self._A0 = None
        self._dense = None
        if sys.interval_constant:
            self._A0 = -sys.J @ (sys.B(sys.a) + self.lam * sys.Delta(sys.a))
        elif sys.end > sys.a:
            self._dense = _integrate(sys, self.lam, np.eye(n), sys.a, sys.end)
        tail = sys.tail_coefficients()
        self._A_tail = None if tail is None else -sys.J @ (tail[0] + self.lam * tail[1])

    def _inner(self, ts: np.ndarray) -> np.ndarray:
        n = self.sys.n
        if self._A0 is not None:
            return expm_series(self._A0, ts - self.sys.a)
        if self._dense is None:
            return np.broadcast_to(np.eye(n, dtype=complex), (ts.size, n, n)).copy()
        return np.moveaxis(self._dense(ts), -1, 0).reshape(ts.size, n, n)

    @cached_property
    def Y_end(self) -> np.ndarray:
        return self._inner(np.array([self.sys.end]))[0]

    def Y(self, t) -> np.ndarray:
        """Y at a scalar t (n×n) or an array of t (m×n×n)."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        sys = self.sys
        if np.any(ts < sys.a - 1e-12):
            raise ValueError("t precedes the regular endpoint a")
        out = np.empty((ts.size, sys.n, sys.n), dtype=complex)
        inside = ts <= sys.end
        if np.any(inside):
            out[inside] = self._inner(ts[inside])
        if np.any(~inside):
            if self._A_tail is None:
                raise ValueError("t lies beyond the regular endpoint")
            if sys.is_constant:
                out[~inside] = self._inner(ts[~inside])
            else:
                out[~inside] = expm_series(self._A_tail, ts[~inside] - sys.end) @ self.Y_end
        return out[0] if scalar else out


def fundamental_matrix(sys: SymmetricSystem, lam: complex, t) -> np.ndarray:
    return Propagation(sys, lam).Y(t)


def phi_psi(sys: SymmetricSystem, U, lam: complex, t) -> tuple[np.ndarray, np.ndarray]:
    """The solutions φ_U and ψ with initial values fixed by U (n×ν₋ each)."""
    Y = Propagation(sys, lam).Y(t)
    return Y @ U.phi_a, Y @ U.psi_a


# ---------------------------------------------------------------------------
# Square-integrable solutions
# ---------------------------------------------------------------------------


@dataclass
class TailModes:
    """Solutions V exp(K (t - t0)) beyond t0; the first ``k_neutral`` are Δ-null."""

    t0: float
    V: np.ndarray
    K: np.ndarray
    k_neutral: int
    D_tail: np.ndarray

    def eval(self, ts: np.ndarray) -> np.ndarray:
        return self.V @ expm_series(self.K, ts - self.t0)


@dataclass
class SolutionBasis:
    """Columns spanning the square-integrable solutions at λ.

    ``at_a`` holds the values at a, ``endpoint_data`` the data entering the
    form at b (values at b or t_cut; empty for a limit-point tail).
    """

    lam: complex
    n: int
    k: int
    at_a: np.ndarray
    endpoint_data: np.ndarray
    evaluator: Callable[[np.ndarray], np.ndarray]
    interval_end: float
    tail: TailModes | None = None
    decay_rates: tuple[complex, ...] | None = None
    jordan_flag: bool = False
    mode_coef: np.ndarray | None = None  # columns = tail modes @ mode_coef beyond t0

    def eval(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.evaluator(ts)
        return out[0] if scalar else out

    def data(self) -> np.ndarray:
        """Joint boundary data (y(a); endpoint data) of the columns."""
        return np.vstack([self.at_a, self.endpoint_data])


def _tail_modes(
    A: np.ndarray, mode_tol: float, allow_neutral: bool
) -> tuple[np.ndarray, np.ndarray, int, tuple[complex, ...], bool]:
    """Invariant subspace of A for Re κ < 0 (neutral modes first when allowed)."""
    w = np.linalg.eigvals(A)
    neutral = np.abs(w.real) <= mode_tol
    if np.any(neutral) and not allow_neutral:
        raise IndeterminateMode(
            f"tail mode with Re κ = {w[neutral][0].real:.2e} inside ±{mode_tol:g}"
        )
    if allow_neutral:
        T, Z, k = schur(A, output="complex", sort=lambda x: x.real <= mode_tol)
        K1, V1 = T[:k, :k], Z[:, :k]
        T2, Q, k_neu = schur(K1, output="complex", sort=lambda x: abs(x.real) <= mode_tol)
        V, K = V1 @ Q, T2
    else:
        T, Z, k = schur(A, output="complex", sort=lambda x: x.real < -mode_tol)
        V, K, k_neu = Z[:, :k], T[:k, :k], 0
    scale = max(1.0, float(np.abs(w).max()))
    gaps = np.abs(w[:, None] - w[None, :]) + np.eye(w.size) * scale
    jordan = bool(gaps.min() < 1e-8 * scale)
    return V, K, k_neu, tuple(np.diag(K)), jordan


def _two_sided_basis(sys: SymmetricSystem, lam: complex, prop: Propagation | None) -> SolutionBasis:
    """Basis whose columns are O(1) at one end of [a, b] and decay towards the other.

    Used when Y(b) is badly conditioned: forward-growing directions are
    anchored at b, backward-growing ones at a, so no column carries the
    exponential growth across the interval.
    """
    n, a, b = sys.n, sys.a, sys.end
    if sys.interval_constant:
        w, V = np.linalg.eig(-sys.J @ (sys.B(a) + lam * sys.Delta(a)))
        if np.linalg.cond(V) < 1e6:
            anchor = np.where(w.real > 0, b, a)

            def evaluator(ts):
                return V[None, :, :] * np.exp(w[None, :] * (ts[:, None] - anchor[None, :]))[:, None, :]

            ends = evaluator(np.array([a, b]))
            return SolutionBasis(lam, n, n, ends[0], ends[1], evaluator, b)
    return _sweep_basis(sys, lam, np.eye(n, dtype=complex), b)


def _growth_rate(sys: SymmetricSystem, lam: complex, t_end: float) -> float:
    """Largest |eigenvalue| of −J(B + λΔ) sampled on [a, t_end]."""
    return max(
        float(np.abs(np.linalg.eigvals(-sys.J @ (sys.B(t) + lam * sys.Delta(t)))).max())
        for t in np.linspace(sys.a, t_end, 5)
    )


class _Sweep:
    """Orthonormalized backward sweep of a solution subspace from t0 to a.

    Frames Q_j at the edges e_0 = t0 > … > e_N = a satisfy
    Y(e_{j+1}) Q_j = Q_{j+1} R_{j+1}; each basis column is stored as frame
    coordinates D_j, scaled so that its largest value over the edges is O(1).
    """

    def __init__(self, sys: SymmetricSystem, lam: complex, V: np.ndarray, t0: float):
        a = sys.a
        self.sys, self.lam, self.k = sys, lam, V.shape[1]
        rho = _growth_rate(sys, lam, t0)
        self.edges = np.linspace(t0, a, max(1, int(np.ceil(rho * (t0 - a) / 4.0))) + 1)
        self.A0 = -sys.J @ (sys.B(a) + lam * sys.Delta(a)) if sys.interval_constant else None
        frames, Rs, self.dense = [V], [], []
        for t1, t2 in zip(self.edges[:-1], self.edges[1:]):
            Y, dense = self._segment(frames[-1], t1, t2)
            Q, R = np.linalg.qr(Y)
            frames.append(Q)
            Rs.append(R)
            self.dense.append(dense)
        self.frames = frames
        k = self.k
        start = np.linalg.qr(np.random.default_rng(0).normal(size=(k, k)) + 0j)[0]
        # forward sweep of coordinates from a: dominant (growing towards t0) columns first
        E, S_f, logf = [start], [], np.zeros(k)
        for R in reversed(Rs):
            Q, S = np.linalg.qr(solve_triangular(R, E[-1]))
            E.append(Q)
            S_f.append(S)
            logf += np.log(np.abs(np.diag(S)))
        E.reverse()
        S_f.reverse()  # now E[j] is the frame at edge j and c_j = S_f[j] c_{j+1}
        kf = int(np.sum(logf > 0.0))
        # backward sweep of coordinates from t0: columns growing towards a first
        H, S_b = [start], []
        for R in Rs:
            Q, S = np.linalg.qr(R @ H[-1])
            H.append(Q)
            S_b.append(S)
        kb = k - kf
        fwd = self._anchored([s_[:kf, :kf] for s_ in S_f], kf, reverse=False)
        bwd = self._anchored([s_[:kb, :kb] for s_ in S_b], kb, reverse=True)
        self.D = [
            np.hstack([E[j][:, :kf] @ fwd[j], H[j][:, :kb] @ bwd[j]]) for j in range(len(frames))
        ]

    @staticmethod
    def _anchored(steps: list[np.ndarray], m: int, reverse: bool) -> list[np.ndarray]:
        """Coefficients p_j over the dominant frame columns, unit at the anchor edge.

        Forward-dominant columns are anchored at t0 (edge 0) and follow
        p_{j+1} = S_j⁻¹ p_j; backward-dominant ones at a with p_j = S_{j+1}⁻¹ p_{j+1}.
        Each column is rescaled in log space so its largest value is one.
        """
        N = len(steps)
        p = np.eye(m, dtype=complex)
        logs = np.zeros(m)
        out, logsum = [p], [logs.copy()]
        order = range(N - 1, -1, -1) if reverse else range(N)
        for j in order:
            p = solve_triangular(steps[j], p) if m else p
            nrm = np.linalg.norm(p, axis=0)
            nrm[nrm == 0] = 1.0
            p = p / nrm
            logs = logs + np.log(nrm)
            out.append(p)
            logsum.append(logs.copy())
        if reverse:
            out.reverse()
            logsum.reverse()
        top = np.max(np.array(logsum), axis=0) if m else np.zeros(0)
        return [c * np.exp(l - top)[None, :] for c, l in zip(out, logsum)]

    def _segment(self, Q: np.ndarray, t1: float, t2: float):
        if self.A0 is not None:
            A0 = self.A0
            return expm(A0 * (t2 - t1)) @ Q, lambda ts, Q=Q, t1=t1: expm_series(A0, ts - t1) @ Q
        n, k = Q.shape
        sol = _integrate(self.sys, self.lam, Q, t1, t2)
        return sol(t2).reshape(n, k), lambda ts, sol=sol: np.moveaxis(sol(ts), -1, 0).reshape(ts.size, n, k)

    def eval(self, ts: np.ndarray) -> np.ndarray:
        out = np.empty((ts.size, self.sys.n, self.k), dtype=complex)
        # segment j covers [e_{j+1}, e_j]
        idx = np.clip(np.searchsorted(-self.edges, -ts, side="right") - 1, 0, len(self.dense) - 1)
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.dense[j](ts[sel]) @ self.D[j]
        return out


def _sweep_basis(
    sys: SymmetricSystem, lam: complex, V: np.ndarray, t0: float, tail: TailModes | None = None,
    rates=None, jordan: bool = False,
) -> SolutionBasis:
    sw = _Sweep(sys, lam, V, t0)
    n, k = sys.n, V.shape[1]
    mode_coef = sw.D[0]

    def evaluator(ts: np.ndarray) -> np.ndarray:
        out = np.empty((ts.size, n, k), dtype=complex)
        beyond = ts >= t0
        if np.any(beyond):
            out[beyond] = tail.eval(ts[beyond]) @ mode_coef if tail is not None else V @ mode_coef
        if np.any(~beyond):
            out[~beyond] = sw.eval(ts[~beyond])
        return out

    at_a = sw.frames[-1] @ sw.D[-1]
    at_end = V @ mode_coef
    if tail is None:
        return SolutionBasis(lam, n, k, at_a, at_end, evaluator, t0)
    edata = at_end if isinstance(sys.endpoint, AbstractForm) else np.zeros((0, k), dtype=complex)
    return SolutionBasis(lam, n, k, at_a, edata, evaluator, t0, tail, rates, jordan, mode_coef)


def l2_basis(sys: SymmetricSystem, lam: complex, mode_tol: float = MODE_TOL) -> SolutionBasis:
    lam = complex(lam)
    if lam.imag == 0.0:
        raise ValueError("λ must be nonreal")
    ep = sys.endpoint
    n = sys.n
    tail_coeffs = sys.tail_coefficients()
    if isinstance(ep, Regular) or (isinstance(ep, AbstractForm) and not ep.has_tail):
        if _growth_rate(sys, lam, sys.end) * (sys.end - sys.a) > DICHOTOMY_EXPONENT:
            return _two_sided_basis(sys, lam, None)
        prop = Propagation(sys, lam)
        if np.linalg.cond(prop.Y_end) <= DICHOTOMY_COND:
            return SolutionBasis(
                lam, n, n, np.eye(n, dtype=complex), prop.Y_end.copy(), prop.Y, sys.end
            )
        return _two_sided_basis(sys, lam, prop)

    B_inf, D_inf = tail_coeffs
    A = -sys.J @ (B_inf + lam * D_inf)
    allow_neutral = isinstance(ep, AbstractForm)
    V, K, k_neu, rates, jordan = _tail_modes(A, mode_tol, allow_neutral)
    if k_neu and np.linalg.norm(D_inf @ V[:, :k_neu]) > 1e3 * mode_tol:
        raise IndeterminateMode("neutral tail mode is not Δ-null")
    k = V.shape[1]
    t0 = sys.end
    tail = TailModes(t0, V, K, k_neu, D_inf)
    if not sys.is_constant and t0 > sys.a and _growth_rate(sys, lam, t0) * (t0 - sys.a) > DICHOTOMY_EXPONENT:
        return _sweep_basis(sys, lam, V, t0, tail, rates, jordan)
    if sys.is_constant or t0 <= sys.a:
        inner = tail.eval
    elif sys.interval_constant:
        A0 = -sys.J @ (sys.B(sys.a) + lam * sys.Delta(sys.a))

        def inner(ts):
            return expm_series(A0, ts - t0) @ V

    else:
        dense = _integrate(sys, lam, V, t0, sys.a)

        def inner(ts):
            return np.moveaxis(dense(ts), -1, 0).reshape(ts.size, n, k)

    def evaluator(ts: np.ndarray) -> np.ndarray:
        out = np.empty((ts.size, n, k), dtype=complex)
        beyond = ts >= t0
        if np.any(beyond):
            out[beyond] = tail.eval(ts[beyond])
        if np.any(~beyond):
            out[~beyond] = inner(ts[~beyond])
        return out

    at_a = evaluator(np.array([sys.a]))[0]
    if not sys.is_constant and t0 > sys.a and np.linalg.cond(at_a) > DICHOTOMY_COND:
        return _sweep_basis(sys, lam, V, t0, tail, rates, jordan)
    edata = V.copy() if isinstance(ep, AbstractForm) else np.zeros((0, k), dtype=complex)
    return SolutionBasis(lam, n, k, at_a, edata, evaluator, t0, tail, rates, jordan)


# ---------------------------------------------------------------------------
# Gram matrices ∫ N1* Δ N2
# ---------------------------------------------------------------------------


def adaptive_gl(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    min_panels: int = 8,
    max_depth: int = 16,
    abs_tol: float = 0.0,
) -> np.ndarray:
    """Composite 16-point Gauss–Legendre with bisection of unresolved panels.

    ``f`` maps an array of points to an array whose leading axis runs over them.
    """
    if hi <= lo:
        return 0.0 * f(np.array([lo]))[0]

    def panel(x0, x1):
        h = 0.5 * (x1 - x0)
        ts = x0 + h * (_GL_X + 1.0)
        vals = f(ts)
        return h * np.tensordot(_GL_W, vals, axes=(0, 0))

    edges = np.linspace(lo, hi, min_panels + 1)
    stack = [(edges[i], edges[i + 1], panel(edges[i], edges[i + 1]), 0) for i in range(min_panels)]
    scale = max(sum(float(np.abs(p[2]).max()) for p in stack), 1e-300)
    total = 0.0
    while stack:
        x0, x1, coarse, depth = stack.pop()
        xm = 0.5 * (x0 + x1)
        left, right = panel(x0, xm), panel(xm, x1)
        fine = left + right
        err = float(np.abs(fine - coarse).max())
        frac = max((x1 - x0) / (hi - lo), 1e-3)
        if err <= max(tol * scale, abs_tol) * frac or depth >= max_depth:
            total = total + fine
        else:
            stack.append((x0, xm, left, depth + 1))
            stack.append((xm, x1, right, depth + 1))
    return total


def tail_gram(t1: TailModes, t2: TailModes) -> np.ndarray:
    """∫_{t0}^∞ of the tail Gram, by a Sylvester solve on the decaying blocks."""
    k1, k2 = t1.V.shape[1], t2.V.shape[1]
    out = np.zeros((k1, k2), dtype=complex)
    n1, n2 = t1.k_neutral, t2.k_neutral
    if k1 == n1 or k2 == n2:
        return out
    V1, K1 = t1.V[:, n1:], t1.K[n1:, n1:]
    V2, K2 = t2.V[:, n2:], t2.K[n2:, n2:]
    # the decaying coordinates evolve autonomously in the block-triangular K
    Q = -(V1.conj().T @ t1.D_tail @ V2)
    X = solve_sylvester(K1.conj().T, K2, Q)
    out[n1:, n2:] = X
    return out


def gram(
    sys: SymmetricSystem,
    N1: SolutionBasis,
    N2: SolutionBasis,
    C1: np.ndarray | None = None,
    C2: np.ndarray | None = None,
    tol: float = 1e-12,
) -> np.ndarray:
    """∫_a^b (N1 C1)* Δ (N2 C2) dt including the closed-form tail."""
    C1 = np.eye(N1.k, dtype=complex) if C1 is None else np.asarray(C1, dtype=complex)
    C2 = np.eye(N2.k, dtype=complex) if C2 is None else np.asarray(C2, dtype=complex)
    hi = min(N1.interval_end, N2.interval_end)

    def integrand(ts):
        Y1 = N1.eval(ts) @ C1
        Y2 = N2.eval(ts) @ C2
        D = sys.Delta.at(ts)
        return np.conj(np.swapaxes(Y1, 1, 2)) @ D @ Y2

    G = adaptive_gl(integrand, sys.a, hi, tol=tol) if hi > sys.a else 0.0
    G = np.zeros((C1.shape[1], C2.shape[1]), dtype=complex) + G
    if N1.tail is not None and N2.tail is not None:
        M1 = np.eye(N1.k) if N1.mode_coef is None else N1.mode_coef
        M2 = np.eye(N2.k) if N2.mode_coef is None else N2.mode_coef
        G = G + (M1 @ C1).conj().T @ tail_gram(N1.tail, N2.tail) @ (M2 @ C2)
    return G


# ---------------------------------------------------------------------------
# Deficiency indices
# ---------------------------------------------------------------------------


def deficiency_indices(sys: SymmetricSystem, mode_tol: float = MODE_TOL) -> tuple[int, int]:
    """(n₊, n₋) from the solution bases at ±i, cross-checked against the endpoint form."""
    from .boundary import build_endpoint_form

    n_plus = l2_basis(sys, 1j, mode_tol).k
    n_minus = l2_basis(sys, -1j, mode_tol).k
    form = build_endpoint_form(sys)
    expected = (sys.sig.nu_plus + form.nu_b_plus, sys.sig.nu_minus + form.nu_b_minus)
    if (n_plus, n_minus) != expected:
        raise ConsistencyError(
            f"solution counts {(n_plus, n_minus)} disagree with index formula {expected}"
        )
    return n_plus, n_minus
