"""Green kernel, Stieltjes inversion, Fourier transform and SF₀ criteria."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .blockspace import herm
from .errors import NoConvergence, NonMonotone
from .propagator import Propagation, adaptive_gl
from .system import AbstractForm, Regular, SymmetricSystem
from .weyl import BoundaryParameter, TauSolution, WeylContext, v_tau, x_matrix

GL_X, GL_W = np.polynomial.legendre.leggauss(16)
DENS_TOL = 1e-5  # relative to the mean spectral mass density on the grid
JUMP_FRACTION = 1e-3
MONOTONE_TOL = 1e-6
CONFIRM_SPREAD = 1e-4
CONFIRMED_FLOOR = 1e-12
MID_EPS_FRACTION = 1e-6


# ---------------------------------------------------------------------------
# Weighted functions
# ---------------------------------------------------------------------------


@dataclass
class WeightedFunction:
    """Vector function f on [a, b) supported in [lo, hi]; ``fn`` maps an array of t to (m, n)."""

    fn: Callable[[np.ndarray], np.ndarray]
    lo: float
    hi: float

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(self.fn(ts), dtype=complex)
        out = np.where(((ts >= self.lo) & (ts <= self.hi))[:, None], out, 0.0)
        return out[0] if scalar else out

    def __add__(self, other: "WeightedFunction") -> "WeightedFunction":
        return WeightedFunction(
            lambda ts: self(ts) + other(ts), min(self.lo, other.lo), max(self.hi, other.hi)
        )


def bump(sys: SymmetricSystem, lo: float, hi: float, component: int = 0) -> WeightedFunction:
    """Smooth compactly supported bump exp(−1/(1−x²)) in one coordinate."""
    n = sys.n
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def fn(ts):
        x = (ts - mid) / half
        out = np.zeros((ts.size, n), dtype=complex)
        inside = np.abs(x) < 1
        out[inside, component] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return out

    return WeightedFunction(fn, lo, hi)


def gl_nodes(lo: float, hi: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(lo, hi, panels + 1)
    h = 0.5 * np.diff(edges)
    ts = (edges[:-1, None] + h[:, None] * (GL_X[None, :] + 1.0)).ravel()
    ws = (h[:, None] * GL_W[None, :]).ravel()
    return ts, ws


def delta_inner(sys: SymmetricSystem, f, g, lo: float, hi: float, panels: int = 64) -> complex:
    """∫ (Δf, g) dt = ∫ g* Δ f over [lo, hi] by composite Gauss–Legendre."""
    ts, ws = gl_nodes(lo, hi, panels)
    F, G = f(ts), g(ts)
    D = sys.Delta_at(ts)
    return complex(np.sum(ws * np.einsum("mi,mij,mj->m", G.conj(), D, F)))


def delta_norm2(sys: SymmetricSystem, f, lo: float, hi: float, panels: int = 64) -> float:
    return float(delta_inner(sys, f, f, lo, hi, panels).real)


# ---------------------------------------------------------------------------
# Green kernel and resolvent
# ---------------------------------------------------------------------------


@dataclass
class GreenKernel:
    """G(x,t,λ) = v_τ(x,λ)φ_U*(t,λ̄) for x > t and φ_U(x,λ)v_τ*(t,λ̄) for x < t."""

    ctx: WeylContext
    tau: BoundaryParameter
    lam: complex
    sol: TauSolution = field(init=False, repr=False)
    sol_bar: TauSolution = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.lam = complex(self.lam)
        if self.lam.imag == 0.0:
            raise ValueError("λ must be nonreal")
        self.sol = v_tau(self.ctx, self.tau, self.lam)
        self.sol_bar = v_tau(self.ctx, self.tau, self.lam.conjugate())
        self._prop = Propagation(self.ctx.sys, self.lam)
        self._prop_bar = Propagation(self.ctx.sys, self.lam.conjugate())

    def phi(self, ts: np.ndarray, conj: bool = False) -> np.ndarray:
        prop = self._prop_bar if conj else self._prop
        return prop.Y(np.atleast_1d(ts)) @ self.ctx.U.phi_a

    def v(self, ts: np.ndarray, conj: bool = False) -> np.ndarray:
        sol = self.sol_bar if conj else self.sol
        return sol.eval(np.atleast_1d(ts))

    def __call__(self, x: float, t: float) -> np.ndarray:
        if x > t:
            return self.v(x)[0] @ self.phi(t, conj=True)[0].conj().T
        return self.phi(x)[0] @ self.v(t, conj=True)[0].conj().T

    def jump_residual(self, ts: Sequence[float]) -> float:
        """max ‖G(t+0,t) − G(t−0,t) + J‖: the kernel jump equals J⁻¹ = −J."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        V, P = self.v(ts), self.phi(ts)
        Vb, Pb = self.v(ts, conj=True), self.phi(ts, conj=True)
        J = self.ctx.sys.J
        jumps = V @ np.conj(np.swapaxes(Pb, 1, 2)) - P @ np.conj(np.swapaxes(Vb, 1, 2))
        return float(np.abs(jumps + J).max())

    def symmetry_residual(self, pairs: Sequence[tuple[float, float]]) -> float:
        """max ‖G(x,t,λ)* − G(t,x,λ̄)‖ over sampled pairs."""
        other = GreenKernel(self.ctx, self.tau, self.lam.conjugate())
        worst = 0.0
        for x, t in pairs:
            a = self(x, t).conj().T
            b = other(t, x)
            worst = max(worst, float(np.abs(a - b).max()) / max(1.0, float(np.abs(a).max())))
        return worst


@dataclass
class ResolventSolution:
    """y_f = ∫ G(·,t,λ)Δ(t)f(t) dt with the pieces needed for checks."""

    kernel: GreenKernel
    f: WeightedFunction
    _nodes: np.ndarray
    _cum_a: np.ndarray
    _cum_b: np.ndarray

    def __call__(self, x) -> np.ndarray:
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        alpha, beta = self._split(xs)
        out = np.einsum("mij,mj->mi", self.kernel.v(xs), alpha) + np.einsum(
            "mij,mj->mi", self.kernel.phi(xs), beta
        )
        return out[0] if scalar else out

    def _split(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """α(x) = ∫_a^x φ̄*Δf, β(x) = ∫_x^b v̄*Δf by cumulative quadrature plus a partial panel."""
        k = self.kernel
        f = self.f
        sys = k.ctx.sys
        alpha = np.empty((xs.size, self._cum_a.shape[1]), dtype=complex)
        beta = np.empty_like(alpha)
        tot_b = self._cum_b[-1]
        for i, x in enumerate(xs):
            xc = min(max(x, f.lo), f.hi)
            j = int(np.searchsorted(self._nodes, xc, side="right")) - 1
            j = min(max(j, 0), self._nodes.size - 1)
            a0 = self._cum_a[j]
            b0 = self._cum_b[j]
            x0 = self._nodes[j]
            if xc > x0:
                ts, ws = gl_nodes(x0, xc, 1)
                w = ws[:, None]
                Df = np.einsum("mij,mj->mi", sys.Delta_at(ts), f(ts))
                a0 = a0 + np.sum(w * np.einsum("mji,mj->mi", k.phi(ts, conj=True).conj(), Df), axis=0)
                b0 = b0 + np.sum(w * np.einsum("mji,mj->mi", k.v(ts, conj=True).conj(), Df), axis=0)
            alpha[i] = a0
            beta[i] = tot_b - b0
        return alpha, beta


def green_apply(
    ctx: WeylContext,
    tau: BoundaryParameter,
    lam: complex,
    f: WeightedFunction,
    panels: int = 64,
) -> ResolventSolution:
    """Resolvent of the boundary value problem applied to f (f supported in [lo, hi])."""
    k = GreenKernel(ctx, tau, lam)
    sys = ctx.sys
    if f.hi > sys.end and isinstance(sys.endpoint, (Regular, AbstractForm)) and not (
        isinstance(sys.endpoint, AbstractForm) and sys.endpoint.has_tail
    ):
        raise ValueError("support of f extends beyond the interval")
    nodes = np.linspace(f.lo, f.hi, panels + 1)
    ts, ws = gl_nodes(f.lo, f.hi, panels)
    Df = np.einsum("mij,mj->mi", sys.Delta_at(ts), f(ts))
    ia = ws[:, None] * np.einsum("mji,mj->mi", k.phi(ts, conj=True).conj(), Df)
    ib = ws[:, None] * np.einsum("mji,mj->mi", k.v(ts, conj=True).conj(), Df)
    g = GL_X.size
    pa = ia.reshape(panels, g, -1).sum(axis=1)
    pb = ib.reshape(panels, g, -1).sum(axis=1)
    zero = np.zeros((1, pa.shape[1]), dtype=complex)
    cum_a = np.vstack([zero, np.cumsum(pa, axis=0)])
    cum_b = np.vstack([zero, np.cumsum(pb, axis=0)])
    return ResolventSolution(k, f, nodes, cum_a, cum_b)


def resolvent_residual(y: ResolventSolution, xs: Sequence[float], h: float = 1e-4) -> float:
    """max |J y′ − B y − λΔy − Δf| at interior points, y′ by a 4th-order central difference."""
    sys = y.kernel.ctx.sys
    lam = y.kernel.lam
    worst = 0.0
    for x in np.atleast_1d(xs):
        pts = x + h * np.array([-2.0, -1.0, 1.0, 2.0])
        Y = y(pts)
        dy = (Y[0] - 8 * Y[1] + 8 * Y[2] - Y[3]) / (12 * h)
        y0 = y(np.array([x]))[0]
        B, D = sys.B_at(np.array([x]))[0], sys.Delta_at(np.array([x]))[0]
        r = sys.J @ dy - B @ y0 - lam * D @ y0 - D @ y.f(np.array([x]))[0]
        worst = max(worst, float(np.linalg.norm(r)) / max(1.0, float(np.linalg.norm(y0))))
    return worst


def boundary_residual_a(y: ResolventSolution) -> float:
    """|Γ_{1a} y_f|."""
    ctx = y.kernel.ctx
    ya = y(np.array([ctx.sys.a]))[0]
    return float(np.abs(ctx.U.U_one @ ya).max(initial=0.0))


# ---------------------------------------------------------------------------
# Distribution functions
# ---------------------------------------------------------------------------


@dataclass
class Jump:
    location: float
    weight: np.ndarray
    spread: float = 0.0  # |W(ε) − W(2ε)| before extrapolation


@dataclass
class DistributionFunction:
    """Σ on a grid: continuous increments per cell and detected point masses."""

    grid: np.ndarray
    increments: np.ndarray  # (K, r, r)
    jumps: list[Jump]
    eps: tuple[float, float] = (0.0, 0.0)
    hat_cols: np.ndarray | None = None
    density_mid: np.ndarray | None = None  # pointwise continuous density at cell midpoints

    def mid_weights(self) -> np.ndarray:
        """Midpoint-rule weights Σ′(s_mid)·h, falling back to the cell increments."""
        if self.density_mid is None:
            return self.increments
        return self.density_mid * self.widths[:, None, None]

    @property
    def size(self) -> int:
        return self.increments.shape[1]

    @property
    def mids(self) -> np.ndarray:
        return 0.5 * (self.grid[1:] + self.grid[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.grid)

    def cell_mass(self, tol: float = 1e-9) -> np.ndarray:
        """Increment plus jumps in each cell; a jump on a cell edge is split between neighbours."""
        out = self.increments.copy()
        scale = max(1.0, float(np.abs(self.grid).max()))
        for jp in self.jumps:
            on_edge = np.where(np.abs(self.grid - jp.location) <= tol * scale)[0]
            if on_edge.size:
                e = int(on_edge[0])
                for c in (e - 1, e):
                    if 0 <= c < out.shape[0]:
                        out[c] = out[c] + 0.5 * jp.weight
                continue
            c = int(np.searchsorted(self.grid, jp.location, side="right")) - 1
            if 0 <= c < out.shape[0]:
                out[c] = out[c] + jp.weight
        return out

    def __call__(self, s: float) -> np.ndarray:
        """Left-continuous Σ(s) with Σ(0) = 0 (s and 0 inside the grid)."""
        return self._F(s) - self._F(0.0) if self.grid[0] <= 0.0 <= self.grid[-1] else self._F(s)

    def _F(self, s: float) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=complex)
        for j in range(self.increments.shape[0]):
            a, b = self.grid[j], self.grid[j + 1]
            if s >= b:
                out += self.increments[j]
            elif s > a:
                out += self.increments[j] * (s - a) / (b - a)
        for jp in self.jumps:
            if jp.location < s:
                out += jp.weight
        return out

    def total_mass(self) -> float:
        return float(np.trace(self.cell_mass().sum(axis=0)).real)

    def block(self, rows: np.ndarray, cols: np.ndarray) -> "DistributionFunction":
        inc = self.increments[:, rows][:, :, cols]
        jumps = [Jump(j.location, j.weight[np.ix_(rows, cols)], j.spread) for j in self.jumps]
        return DistributionFunction(self.grid, inc, jumps, self.eps)

    def min_eigenvalue(self) -> float:
        if self.increments.shape[0] == 0:
            return 0.0
        return float(min(np.linalg.eigvalsh(herm(x)).min() for x in self.increments))


# ---------------------------------------------------------------------------
# Stieltjes inversion
# ---------------------------------------------------------------------------


def _im(m: np.ndarray) -> np.ndarray:
    return (m - m.conj().T) / 2j


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _locate_pole(
    m_fn, s0: float, eps0: float, window: float, eps_min: float, max_iter: int = 80
) -> Jump | None:
    """Newton on 1/tr m from s0 − iε while ε shrinks; returns the residue −lim (c−λ)m."""
    s = float(s0)
    eps = float(eps0)
    for _ in range(max_iter):
        lam = complex(s, -eps)
        eta = 0.1 * eps
        g = np.trace(m_fn(lam))
        gp = (np.trace(m_fn(lam + eta)) - np.trace(m_fn(lam - eta))) / (2 * eta)
        if g == 0 or gp == 0:
            return None
        c = lam + g / gp  # Newton step for h = 1/g: λ − h/h′ = λ + g/g′
        if not np.isfinite(c) or abs(c.real - s0) > window:
            return None
        moved = abs(c.real - s)
        s = c.real
        if eps <= eps_min and moved <= 1e-13 * max(1.0, abs(s)):
            break
        eps = max(eps_min, min(eps / 4.0, max(10.0 * moved, eps_min)))
    else:
        return None
    W1 = herm(1j * eps * m_fn(complex(s, -eps)))
    W2 = herm(2j * eps * m_fn(complex(s, -2 * eps)))
    W = 2 * W1 - W2
    return Jump(s, W, float(np.abs(W1 - W2).max()))


def stieltjes_inversion(
    m_fn: Callable[[complex], np.ndarray],
    s_grid: Sequence[float],
    eps_schedule: Sequence[float] | None = None,
    jump_tol: float | None = None,
    detect: bool = True,
    workers: int = 1,
    hat_cols: Sequence[int] | None = None,
    quad_tol: float = 1e-9,
) -> DistributionFunction:
    """Σ([s_j, s_{j+1})) = −lim (1/π)∫ Im m(σ − iε) dσ, point masses detected and split off.

    Jumps are found by scanning −ε Im tr m(σ − iε), refined by Newton on 1/tr m
    with ε → 0, and their Poisson smoothing is subtracted exactly.  The
    remainder is integrated per cell at two ε values and extrapolated linearly.
    """
    grid = np.asarray(s_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("s_grid must be strictly increasing with at least two points")
    widths = np.diff(grid)
    if eps_schedule is None:
        # relative to each cell width
        eps_cells = np.stack([widths / 8.0, widths / 16.0], axis=1)
    else:
        eps = sorted((float(e) for e in eps_schedule), reverse=True)
        if len(eps) < 2 or eps[-1] <= 0:
            raise ValueError("eps_schedule needs two positive values")
        eps_cells = np.tile([eps[0], eps[-1]], (widths.size, 1))
    probe = np.atleast_2d(m_fn(complex(grid[0], -float(eps_cells[0, 0]))))
    r = probe.shape[0]

    ss, es, F = _scan(m_fn, grid, workers)
    jumps = _detect_jumps(m_fn, grid, ss, es, F, workers) if detect else []

    def remainder(lam_eps: float):
        def f(ss: np.ndarray) -> np.ndarray:
            out = np.empty((ss.size, r, r), dtype=complex)
            for i, s in enumerate(ss):
                lam = complex(s, -lam_eps)
                M = np.atleast_2d(m_fn(lam))
                for jp in jumps:
                    M = M - jp.weight / (jp.location - lam)
                out[i] = -_im(M) / np.pi
            return out

        return f

    # absolute floor from the scanned trace mass: Σ F δ/(πε) with δ = ε/2
    raw = float(np.abs(F).sum()) / (2 * np.pi)
    floor = quad_tol * max(raw, 1e-12)

    def cell(j: int) -> np.ndarray:
        a, b = grid[j], grid[j + 1]
        e1, e2 = eps_cells[j]
        I1 = adaptive_gl(remainder(e1), a, b, tol=quad_tol, min_panels=1, abs_tol=floor)
        I2 = adaptive_gl(remainder(e2), a, b, tol=quad_tol, min_panels=1, abs_tol=floor)
        return herm((e1 * I2 - e2 * I1) / (e1 - e2))

    inc = np.array(_map(cell, range(grid.size - 1), workers))
    mids = 0.5 * (grid[1:] + grid[:-1])
    ea = np.minimum(eps_cells[:, 1], MID_EPS_FRACTION * widths)
    d1 = np.array(_map(lambda k: remainder(ea[k])(mids[k : k + 1])[0], range(mids.size), workers))
    d2 = np.array(_map(lambda k: remainder(0.5 * ea[k])(mids[k : k + 1])[0], range(mids.size), workers))
    dens = np.array([herm(x) for x in 2.0 * d2 - d1])
    inside = [jp for jp in jumps if grid[0] - 1e-12 <= jp.location <= grid[-1] + 1e-12]
    sig = DistributionFunction(
        grid, inc, inside, tuple(eps_cells.min(axis=0)), None if hat_cols is None else np.asarray(hat_cols), dens
    )
    mass = max(sig.total_mass(), 1e-300)
    if jump_tol is None:
        jump_tol = JUMP_FRACTION * mass

    def keep(jp: Jump) -> bool:
        wmax = float(np.linalg.eigvalsh(jp.weight).max())
        confirmed = jp.spread <= CONFIRM_SPREAD * wmax
        return wmax > jump_tol or (confirmed and wmax > CONFIRMED_FLOOR * mass)

    sig.jumps = [jp for jp in inside if keep(jp)]
    dropped = [jp for jp in inside if jp not in sig.jumps]
    for jp in dropped:  # sub-threshold masses stay in the continuous part
        c = int(np.clip(np.searchsorted(grid, jp.location, side="right") - 1, 0, inc.shape[0] - 1))
        sig.increments[c] = sig.increments[c] + jp.weight
    lo = sig.min_eigenvalue()
    if lo < -MONOTONE_TOL * max(1.0, mass):
        raise NonMonotone(f"increment eigenvalue {lo:.3e} after extrapolation")
    return sig


def _scan(m_fn, grid: np.ndarray, workers: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """F(σ) = −ε tr Im m(σ − iε) at 8 points per cell with ε = width/4; two cells of margin."""
    w = np.diff(grid)
    edges = np.concatenate([[grid[0] - 2 * w[0], grid[0] - w[0]], grid, [grid[-1] + w[-1], grid[-1] + 2 * w[-1]]])
    cw = np.diff(edges)
    ss = (edges[:-1, None] + cw[:, None] * (np.arange(8)[None, :] + 0.5) / 8.0).ravel()
    es = np.repeat(cw / 4.0, 8)
    F = np.array(
        _map(
            lambda se: float(-se[1] * np.trace(_im(np.atleast_2d(m_fn(complex(se[0], -se[1]))))).real),
            list(zip(ss, es)),
            workers,
        )
    )
    return ss, es, F


def _detect_jumps(
    m_fn, grid: np.ndarray, ss: np.ndarray, es: np.ndarray, F: np.ndarray, workers: int
) -> list[Jump]:
    span = grid[-1] - grid[0]
    peaks = [
        i
        for i in range(1, ss.size - 1)
        if F[i] >= F[i - 1] and F[i] > F[i + 1] and F[i] > 0
    ]
    scale = max(1.0, abs(grid[0]), abs(grid[-1]))
    eps_min = 1e-9 * scale
    found: list[Jump] = []
    for jp in _map(lambda i: _locate_pole(m_fn, ss[i], es[i], 4.0 * es[i], eps_min), peaks, workers):
        if jp is None:
            continue
        w = np.linalg.eigvalsh(jp.weight)
        if w.max() <= 0 or w.min() < -1e-6 * w.max():
            continue
        if jp.spread > 1e-2 * w.max():
            continue
        if any(abs(jp.location - q.location) <= 1e-9 * max(1.0, span) for q in found):
            continue
        found.append(jp)
    found.sort(key=lambda j: j.location)
    return found


# ---------------------------------------------------------------------------
# Fourier transform, Parseval, inverse transform
# ---------------------------------------------------------------------------


def _panels_for(sys: SymmetricSystem, s_max: float, lo: float, hi: float) -> int:
    """Panel count resolving oscillations of real-axis solutions up to |s| = s_max."""
    B = sys.B_at(np.array([lo]))[0]
    D = sys.Delta_at(np.array([lo]))[0]
    A = -sys.J @ (B + s_max * D)
    k = float(np.abs(np.linalg.eigvals(A)).max())
    return int(max(16, np.ceil(k * (hi - lo) / 4.0)))


def phi_real(ctx: WeylContext, s: float, ts: np.ndarray) -> np.ndarray:
    """φ_U(t, s) at real s by direct propagation (n×ν₋ per t)."""
    return Propagation(ctx.sys, complex(s)).Y(ts) @ ctx.U.phi_a


def fourier(
    ctx: WeylContext,
    f: WeightedFunction,
    s_grid: Sequence[float],
    workers: int = 1,
    panels: int | None = None,
) -> np.ndarray:
    """f̂(s) = ∫ φ_U*(t,s)Δ(t)f(t) dt for each s; shape (len(s), ν₋)."""
    ss = np.atleast_1d(np.asarray(s_grid, dtype=float))
    sys = ctx.sys
    if panels is None:
        panels = _panels_for(sys, float(np.abs(ss).max(initial=1.0)), f.lo, f.hi)
    ts, ws = gl_nodes(f.lo, f.hi, panels)
    Df = np.einsum("mij,mj->mi", sys.Delta_at(ts), f(ts)) * ws[:, None]

    def one(s):
        P = phi_real(ctx, s, ts)
        return np.einsum("mji,mj->i", P.conj(), Df)

    return np.array(_map(one, ss, workers)).reshape(ss.size, ctx.sig.nu_minus)


@dataclass
class Transform:
    """f̂ at the cell midpoints and at the jump locations of Σ."""

    sigma: DistributionFunction
    at_mids: np.ndarray
    at_jumps: np.ndarray

    def norm2(self) -> float:
        inc = self.sigma.mid_weights()
        total = np.einsum("ki,kij,kj->", self.at_mids.conj(), inc, self.at_mids).real
        for jp, v in zip(self.sigma.jumps, self.at_jumps):
            total += float((v.conj() @ jp.weight @ v).real)
        return float(total)


def transform(ctx: WeylContext, sigma: DistributionFunction, f: WeightedFunction, workers: int = 1) -> Transform:
    locs = np.array([jp.location for jp in sigma.jumps])
    mids = fourier(ctx, f, sigma.mids, workers)
    at_j = fourier(ctx, f, locs, workers) if locs.size else np.zeros((0, ctx.sig.nu_minus), dtype=complex)
    return Transform(sigma, mids, at_j)


def parseval_defect(
    ctx: WeylContext,
    sigma: DistributionFunction,
    f: WeightedFunction,
    workers: int = 1,
    fhat: Transform | None = None,
) -> float:
    """|‖f̂‖²_Σ − ‖f‖²_Δ| / ‖f‖²_Δ."""
    nf = delta_norm2(ctx.sys, f, f.lo, f.hi, _panels_for(ctx.sys, 1.0, f.lo, f.hi))
    if nf == 0.0:
        return 0.0
    fh = fhat if fhat is not None else transform(ctx, sigma, f, workers)
    return abs(fh.norm2() - nf) / nf


def inverse_fourier(ctx: WeylContext, fhat: Transform, workers: int = 1) -> WeightedFunction:
    """f̃(t) = ∫ φ_U(t,s) dΣ(s) f̂(s) as a midpoint sum plus jump terms."""
    sig = fhat.sigma
    coeffs = [
        (s, w @ v) for s, w, v in zip(sig.mids, sig.mid_weights(), fhat.at_mids)
    ] + [(jp.location, jp.weight @ v) for jp, v in zip(sig.jumps, fhat.at_jumps)]

    def fn(ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(ts)

        def one(item):
            s, c = item
            return phi_real(ctx, s, ts) @ c

        parts = _map(one, coeffs, workers)
        return np.sum(parts, axis=0) if parts else np.zeros((ts.size, ctx.sys.n), dtype=complex)

    hi = ctx.sys.end if isinstance(ctx.sys.endpoint, Regular) else np.inf
    return WeightedFunction(fn, ctx.sys.a, hi)


def roundtrip_error(
    ctx: WeylContext,
    sigma: DistributionFunction,
    f: WeightedFunction,
    window: tuple[float, float] | None = None,
    workers: int = 1,
    fhat: Transform | None = None,
) -> float:
    """‖f − f̃‖_Δ / ‖f‖_Δ on a window (the whole interval when regular)."""
    fh = fhat if fhat is not None else transform(ctx, sigma, f, workers)
    ft = inverse_fourier(ctx, fh, workers)
    if window is None:
        if isinstance(ctx.sys.endpoint, Regular):
            window = (ctx.sys.a, ctx.sys.end)
        else:
            window = (ctx.sys.a, f.hi + (f.hi - f.lo))
    lo, hi = window
    smax = float(np.abs(sig_range(sigma)).max())
    panels = _panels_for(ctx.sys, smax, lo, hi)
    ts, ws = gl_nodes(lo, hi, panels)
    D = ctx.sys.Delta_at(ts)
    F = f(ts)
    E = F - ft.fn(ts)
    num = np.sum(ws * np.einsum("mi,mij,mj->m", E.conj(), D, E).real)
    den = np.sum(ws * np.einsum("mi,mij,mj->m", F.conj(), D, F).real)
    return float(np.sqrt(num / den)) if den > 0 else 0.0


def sig_range(sigma: DistributionFunction) -> np.ndarray:
    return np.array([sigma.grid[0], sigma.grid[-1]])


def nyquist_check(sys: SymmetricSystem, s_grid: Sequence[float]) -> bool:
    """Warn when cells are too wide to resolve f̂ on the interval length."""
    ss = np.asarray(s_grid, dtype=float)
    length = sys.end - sys.a if isinstance(sys.endpoint, Regular) else max(1.0, sys.end - sys.a)
    ok = bool(np.diff(ss).max() <= max(1.0, np.abs(ss).max()) / max(length, 1.0))
    if not ok:
        warnings.warn("s-grid is coarse relative to the interval length", RuntimeWarning, stacklevel=2)
    return ok


# ---------------------------------------------------------------------------
# SF₀ criteria
# ---------------------------------------------------------------------------


@dataclass
class SF0Report:
    ys: np.ndarray
    B_samples: list[np.ndarray]
    Bhat_samples: list[np.ndarray]
    B_limit: np.ndarray
    Bhat_limit: np.ndarray
    verdict: bool

    @property
    def B_norm(self) -> float:
        return float(np.abs(self.B_limit).max(initial=0.0))

    @property
    def Bhat_norm(self) -> float:
        return float(np.abs(self.Bhat_limit).max(initial=0.0))


def _aitken(seq: list[np.ndarray]) -> np.ndarray:
    x0, x1, x2 = seq[-3], seq[-2], seq[-1]
    den = x2 - 2 * x1 + x0
    out = x2.copy()
    ok = np.abs(den) > 1e-300
    out[ok] = x2[ok] - (x2[ok] - x1[ok]) ** 2 / den[ok]
    return out


def sf0_samples(ctx: WeylContext, tau: BoundaryParameter, y: float) -> tuple[np.ndarray, np.ndarray]:
    """(1/iy)A⁻¹C₁ and (1/iy)M₄A⁻¹C_{0b} with A = C_{0b} − C₁M₄ + iC₀₂N₊ at λ = iy."""
    trip = ctx.trip
    h, c, hb = trip.dot_dims
    if c == 0:
        return np.zeros((0, 0), dtype=complex), np.zeros((0, 0), dtype=complex)
    lam = complex(0.0, y)
    wd = x_matrix(ctx, lam, check=False)
    C0, C1 = tau.upper(lam)
    Md = wd.Mdot
    rows_n = np.r_[np.arange(h), np.arange(h + c, h + c + hb)]
    N = Md[rows_n]
    M4 = Md[h : h + c]
    C0b = C0[:, h : h + c]
    C02 = C0[:, rows_n]
    A = C0b - C1 @ M4 + 1j * C02 @ N
    Ai = np.linalg.inv(A)
    return Ai @ C1 / (1j * y), M4 @ Ai @ C0b / (1j * y)


def sf0_criteria(
    ctx: WeylContext,
    tau: BoundaryParameter,
    ys: Sequence[float] = (1e1, 1e2, 1e3, 1e4),
    tol: float = 1e-6,
) -> SF0Report:
    ys = np.asarray(ys, dtype=float)
    Bs, Bhs = [], []
    for y in ys:
        b, bh = sf0_samples(ctx, tau, float(y))
        Bs.append(b)
        Bhs.append(bh)
    if Bs[0].size == 0:
        z = np.zeros((0, 0), dtype=complex)
        return SF0Report(ys, Bs, Bhs, z, z, True)
    limits = []
    for seq in (Bs, Bhs):
        if len(seq) >= 3:
            lim = _aitken(seq)
            early = _aitken(seq[:-1]) if len(seq) >= 4 else seq[-2]
        else:
            lim, early = seq[-1], seq[0]
        scale = max(tol, float(np.abs(lim).max()))
        if float(np.abs(lim - early).max()) > 10.0 * max(scale, float(np.abs(seq[-1]).max())):
            raise NoConvergence("SF0 limit does not settle along iy")
        limits.append(lim)
    verdict = bool(np.abs(limits[0]).max() < tol and np.abs(limits[1]).max() < tol)
    return SF0Report(ys, Bs, Bhs, limits[0], limits[1], verdict)


# ---------------------------------------------------------------------------
# Spectrum readout
# ---------------------------------------------------------------------------


@dataclass
class SpectrumReport:
    ac_cells: list[tuple[float, float]]
    point_masses: list[tuple[float, np.ndarray]]
    support_cells: list[tuple[float, float]]
    ac_covers_grid: bool
    singular_from_first_block: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "ac_intervals": _merge(self.ac_cells),
            "point_masses": [
                {"s": s, "weight_trace": float(np.trace(w).real)} for s, w in self.point_masses
            ],
            "support": _merge(self.support_cells),
            "ac_covers_grid": self.ac_covers_grid,
            "singular_first_block": self.singular_from_first_block,
        }


def _merge(cells: list[tuple[float, float]]) -> list[list[float]]:
    out: list[list[float]] = []
    for a, b in cells:
        if out and abs(out[-1][1] - a) <= 1e-12 * max(1.0, abs(a)):
            out[-1][1] = b
        else:
            out.append([a, b])
    return out


def spectrum_readout(
    sigma: DistributionFunction,
    dens_tol: float = DENS_TOL,
    first_cols: Sequence[int] | None = None,
) -> SpectrumReport:
    span = float(sigma.grid[-1] - sigma.grid[0])
    total = float(np.trace(sigma.increments.sum(axis=0)).real) + sum(
        float(np.trace(jp.weight).real) for jp in sigma.jumps
    )
    threshold = dens_tol * max(1.0, total / span)
    ac = []
    for a, b, inc in zip(sigma.grid[:-1], sigma.grid[1:], sigma.increments):
        if np.linalg.eigvalsh(herm(inc)).max() / (b - a) > threshold:
            ac.append((float(a), float(b)))
    pts = [(jp.location, jp.weight) for jp in sigma.jumps]
    support = sorted(set(ac) | {(p, p) for p, _ in pts})
    sing_first = []
    if first_cols is not None:
        fc = np.asarray(first_cols)
        for jp in sigma.jumps:
            w = herm(jp.weight[np.ix_(fc, fc)])
            if w.size and np.linalg.eigvalsh(w).max() > 0:
                sing_first.append(jp.location)
    covers = len(ac) == sigma.increments.shape[0]
    return SpectrumReport(ac, pts, support, covers, sing_first)


def hat_block_residual(sigma: DistributionFunction, hat_cols: Sequence[int]) -> float:
    """max over cells of ‖Σ_hat([α,β)) − (β−α)/(2π) I‖ (the lower-right block law)."""
    hc = np.asarray(hat_cols)
    if hc.size == 0:
        return 0.0
    cm = sigma.cell_mass()
    worst = 0.0
    for a, b, inc in zip(sigma.grid[:-1], sigma.grid[1:], cm):
        blk = inc[np.ix_(hc, hc)]
        worst = max(worst, float(np.abs(blk - (b - a) / (2 * np.pi) * np.eye(hc.size)).max()))
    return worst


__all__ = [
    "DistributionFunction",
    "GreenKernel",
    "Jump",
    "ResolventSolution",
    "SF0Report",
    "SpectrumReport",
    "Transform",
    "WeightedFunction",
    "boundary_residual_a",
    "bump",
    "delta_norm2",
    "fourier",
    "green_apply",
    "hat_block_residual",
    "inverse_fourier",
    "nyquist_check",
    "parseval_defect",
    "resolvent_residual",
    "roundtrip_error",
    "sf0_criteria",
    "spectrum_readout",
    "stieltjes_inversion",
    "transform",
]
