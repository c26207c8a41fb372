"""Symmetric systems J y' - B(t) y = λ Δ(t) y, their endpoints and coefficient samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .blockspace import BlockSignature, build_J, herm, hermitian_residual

DEFINITE_TOL = 1e-8


# ---------------------------------------------------------------------------
# Coefficient samplers
# ---------------------------------------------------------------------------


class Sampler:
    """Matrix-valued function of t, evaluated pointwise or on arrays."""

    shape: tuple[int, int]
    is_constant: bool = False

    def at(self, ts: np.ndarray) -> np.ndarray:  # (m,) -> (m, r, c)
        raise NotImplementedError

    def __call__(self, t: float) -> np.ndarray:
        return self.at(np.array([float(t)]))[0]


class ConstantSampler(Sampler):
    is_constant = True

    def __init__(self, value: np.ndarray):
        self.value = np.atleast_2d(np.asarray(value, dtype=complex))
        self.shape = self.value.shape

    def at(self, ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(ts)
        return np.broadcast_to(self.value, (ts.size, *self.shape)).copy()


class PolynomialSampler(Sampler):
    """Entrywise polynomials; ``coeffs[i][j]`` lists c0, c1, ... in powers of t."""

    def __init__(self, coeffs: Sequence[Sequence[Sequence[complex]]]):
        rows = len(coeffs)
        cols = len(coeffs[0]) if rows else 0
        deg = max((len(c) for row in coeffs for c in row), default=1)
        deg = max(deg, 1)
        arr = np.zeros((deg, rows, cols), dtype=complex)
        for i, row in enumerate(coeffs):
            if len(row) != cols:
                raise ValueError("ragged coefficient table")
            for j, c in enumerate(row):
                arr[: len(c), i, j] = np.asarray(c, dtype=complex)
        self.coeffs = arr
        self.shape = (rows, cols)
        self.is_constant = bool(deg == 1 or not np.any(arr[1:]))

    def at(self, ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((ts.size, *self.shape), dtype=complex)
        for c in self.coeffs[::-1]:  # Horner
            out = out * ts[:, None, None] + c
        return out


class TableSampler(Sampler):
    """Cubic-spline interpolation of tabulated matrices; constant extension outside."""

    def __init__(self, ts: Sequence[float], values: np.ndarray):
        ts = np.asarray(ts, dtype=float)
        vals = np.asarray(values, dtype=complex)
        if vals.ndim != 3 or vals.shape[0] != ts.size:
            raise ValueError("values must have shape (len(ts), rows, cols)")
        if ts.size < 2 or np.any(np.diff(ts) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        self.ts = ts
        self.shape = vals.shape[1:]
        self._re = CubicSpline(ts, vals.real, axis=0)
        self._im = CubicSpline(ts, vals.imag, axis=0)

    def at(self, ts: np.ndarray) -> np.ndarray:
        ts = np.clip(np.atleast_1d(np.asarray(ts, dtype=float)), self.ts[0], self.ts[-1])
        return self._re(ts) + 1j * self._im(ts)


class FunctionSampler(Sampler):
    """Wrap a Python callable t -> matrix (used by tests and programmatic callers)."""

    def __init__(self, fn: Callable[[float], np.ndarray], shape: tuple[int, int]):
        self.fn = fn
        self.shape = shape

    def at(self, ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(ts)
        return np.array([np.asarray(self.fn(float(t)), dtype=complex) for t in ts]).reshape(
            ts.size, *self.shape
        )


def as_sampler(x: Union[Sampler, np.ndarray, Sequence]) -> Sampler:
    if isinstance(x, Sampler):
        return x
    return ConstantSampler(np.asarray(x, dtype=complex))


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Regular:
    b: float


@dataclass(frozen=True)
class ConstantTail:
    """Coefficients equal (B∞, Δ∞) on [t0, ∞)."""

    t0: float
    B_inf: np.ndarray
    D_inf: np.ndarray


@dataclass(frozen=True)
class AbstractForm:
    """Declared endpoint form [y,z]_b = i z(t_cut)* Ω_b y(t_cut).

    Without a tail, solutions live on [a, t_cut] only.  With ``B_tail`` and
    ``D_tail`` the coefficients are constant beyond ``t_cut`` and the square
    integrable solutions are the decaying modes plus neutral modes that are
    Δ-null on the tail.
    """

    t_cut: float
    omega_b: np.ndarray
    B_tail: np.ndarray | None = None
    D_tail: np.ndarray | None = None

    @property
    def has_tail(self) -> bool:
        return self.B_tail is not None


Endpoint = Union[Regular, ConstantTail, AbstractForm]


# ---------------------------------------------------------------------------
# System
# ---------------------------------------------------------------------------


@dataclass
class SymmetricSystem:
    sig: BlockSignature
    a: float
    endpoint: Endpoint
    B: Sampler
    Delta: Sampler
    name: str = "system"
    J: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.B = as_sampler(self.B)
        self.Delta = as_sampler(self.Delta)
        n = self.sig.n
        if self.B.shape != (n, n) or self.Delta.shape != (n, n):
            raise ValueError(f"coefficients must be {n}x{n}")
        ep = self.endpoint
        if isinstance(ep, ConstantTail):
            if np.shape(ep.B_inf) != (n, n) or np.shape(ep.D_inf) != (n, n):
                raise ValueError("tail coefficients have the wrong shape")
            if ep.t0 < self.a:
                raise ValueError("t0 must not precede a")
        elif isinstance(ep, AbstractForm):
            if np.shape(ep.omega_b) != (n, n):
                raise ValueError("declared endpoint form has the wrong shape")
            if hermitian_residual(np.asarray(ep.omega_b)) > 1e-12 * max(
                1.0, float(np.linalg.norm(ep.omega_b))
            ):
                raise ValueError("declared endpoint form must be Hermitian")
            if ep.has_tail and (np.shape(ep.B_tail) != (n, n) or np.shape(ep.D_tail) != (n, n)):
                raise ValueError("tail coefficients have the wrong shape")
            if ep.t_cut <= self.a:
                raise ValueError("t_cut must exceed a")
        elif isinstance(ep, Regular):
            if not np.isfinite(ep.b) or ep.b <= self.a:
                raise ValueError("regular endpoint must be finite and exceed a")
        self.J = build_J(self.sig)

    @property
    def n(self) -> int:
        return self.sig.n

    @property
    def end(self) -> float:
        """Right end of the interval on which solutions are integrated numerically."""
        ep = self.endpoint
        if isinstance(ep, Regular):
            return float(ep.b)
        if isinstance(ep, ConstantTail):
            return float(ep.t0)
        return float(ep.t_cut)

    @property
    def interval_constant(self) -> bool:
        """True when B and Δ are constant on [a, end]."""
        return bool(self.B.is_constant and self.Delta.is_constant)

    @property
    def is_constant(self) -> bool:
        """True when B and Δ are constant on [a, end] (and match any constant tail)."""
        if not self.interval_constant:
            return False
        tail = self.tail_coefficients()
        if tail is not None:
            return bool(
                np.allclose(self.B(self.a), tail[0], atol=1e-15)
                and np.allclose(self.Delta(self.a), tail[1], atol=1e-15)
            )
        return True

    def tail_coefficients(self) -> tuple[np.ndarray, np.ndarray] | None:
        ep = self.endpoint
        if isinstance(ep, ConstantTail):
            return np.asarray(ep.B_inf, dtype=complex), np.asarray(ep.D_inf, dtype=complex)
        if isinstance(ep, AbstractForm) and ep.has_tail:
            return np.asarray(ep.B_tail, dtype=complex), np.asarray(ep.D_tail, dtype=complex)
        return None

    def _coeff_at(self, sampler: Sampler, tail_index: int, ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = sampler.at(ts)
        tail = self.tail_coefficients()
        if tail is not None:
            beyond = ts > self.end
            if np.any(beyond):
                out[beyond] = tail[tail_index]
        return out

    def B_at(self, ts: np.ndarray) -> np.ndarray:
        """B on an array of points, switching to the tail value beyond ``end``."""
        return self._coeff_at(self.B, 0, ts)

    def Delta_at(self, ts: np.ndarray) -> np.ndarray:
        return self._coeff_at(self.Delta, 1, ts)

    def generator(self, lam: complex, t: float) -> np.ndarray:
        """A(t,λ) = -J(B(t) + λΔ(t)), so that y' = A y."""
        return -self.J @ (self.B_at(t)[0] + lam * self.Delta_at(t)[0])


@dataclass(frozen=True)
class CoefficientReport:
    b_hermitian: float
    delta_hermitian: float
    delta_negativity: float

    @property
    def max_residual(self) -> float:
        return max(self.b_hermitian, self.delta_hermitian, self.delta_negativity)


def validate_coefficients(sys: SymmetricSystem, grid: Sequence[float]) -> CoefficientReport:
    """Hermiticity of B and Δ and positivity of Δ on a grid."""
    ts = np.asarray(grid, dtype=float)
    Bs = sys.B_at(ts)
    Ds = sys.Delta_at(ts)
    rb = max(hermitian_residual(b) for b in Bs)
    rd = max(hermitian_residual(d) for d in Ds)
    neg = max(float(max(0.0, -np.linalg.eigvalsh(herm(d)).min())) for d in Ds)
    return CoefficientReport(rb, rd, neg)


def check_definite(
    sys: SymmetricSystem,
    lambdas: Sequence[complex],
    grid: Sequence[float],
    tol: float = DEFINITE_TOL,
) -> bool:
    """Certify on a grid that no nontrivial solution is Δ-null.

    For each λ the stacked map c -> (Δ(t_i)^{1/2} Y(t_i,λ) c)_i must have
    smallest singular value above ``tol`` times the largest.
    """
    from .propagator import Propagation

    ts = np.sort(np.asarray(grid, dtype=float))
    if ts.size < 1:
        return False
    Ds = sys.Delta_at(ts)
    roots = []
    for d in Ds:
        w, v = np.linalg.eigh(herm(d))
        roots.append((v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T)
    for lam in lambdas:
        Y = Propagation(sys, complex(lam)).Y(ts)
        stacked = np.concatenate([r @ y for r, y in zip(roots, Y)], axis=0)
        s = np.linalg.svd(stacked, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= tol * s[0]:
            return False
    return True
