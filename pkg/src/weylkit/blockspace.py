"""Block bookkeeping for H ⊕ Ĥ ⊕ H, the matrix J, inertia and Nevanlinna checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NonHermitian

DEFAULT_INERTIA_TOL = 1e-10


@dataclass(frozen=True)
class BlockSignature:
    """Dimensions of H (``nu_plus``) and Ĥ (``nu_hat``).

    ``nu_minus`` is dim H₀ = dim(H ⊕ Ĥ) and ``n`` is dim ℍ = dim(H ⊕ Ĥ ⊕ H).
    """

    nu_plus: int
    nu_hat: int

    def __post_init__(self) -> None:
        if self.nu_plus < 0 or self.nu_hat < 0:
            raise ValueError("block dimensions must be nonnegative")
        if self.n < 1:
            raise ValueError("the signature must describe a nonzero space")

    @property
    def nu_minus(self) -> int:
        return self.nu_plus + self.nu_hat

    @property
    def n(self) -> int:
        return 2 * self.nu_plus + self.nu_hat

    # Index ranges of the three coordinate blocks of ℍ.
    @property
    def s0(self) -> slice:
        return slice(0, self.nu_plus)

    @property
    def shat(self) -> slice:
        return slice(self.nu_plus, self.nu_minus)

    @property
    def s1(self) -> slice:
        return slice(self.nu_minus, self.n)

    def __str__(self) -> str:
        return f"sig({self.nu_plus},{self.nu_hat})"


def build_J(sig: BlockSignature) -> np.ndarray:
    """Return J = [[0,0,-I],[0,iI,0],[I,0,0]] for the given signature."""
    J = np.zeros((sig.n, sig.n), dtype=complex)
    p = sig.nu_plus
    J[sig.s0, sig.s1] = -np.eye(p)
    J[sig.s1, sig.s0] = np.eye(p)
    J[sig.shat, sig.shat] = 1j * np.eye(sig.nu_hat)
    return J


@dataclass(frozen=True)
class Inertia:
    pos: int
    neg: int
    zero: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.pos, self.neg, self.zero)


def hermitian_residual(h: np.ndarray) -> float:
    h = np.asarray(h)
    if h.size == 0:
        return 0.0
    return float(np.linalg.norm(h - h.conj().T, 2))


def herm(h: np.ndarray) -> np.ndarray:
    """Hermitian part (h + h*)/2."""
    return 0.5 * (h + h.conj().T)


def im_part(m: np.ndarray) -> np.ndarray:
    """Operator imaginary part (m - m*)/(2i)."""
    return (m - m.conj().T) / 2j


def inertia(h: np.ndarray, tol: float = DEFAULT_INERTIA_TOL) -> Inertia:
    """Count eigenvalues of a Hermitian matrix above, below and inside ±tol·‖h‖."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.size == 0:
        return Inertia(0, 0, 0)
    scale = float(np.linalg.norm(h, 2))
    if hermitian_residual(h) > tol * max(scale, 1.0):
        raise NonHermitian(f"matrix is not Hermitian (residual {hermitian_residual(h):.3e})")
    if scale == 0.0:
        return Inertia(0, 0, h.shape[0])
    w = np.linalg.eigvalsh(herm(h))
    cut = tol * scale
    pos = int(np.sum(w > cut))
    neg = int(np.sum(w < -cut))
    return Inertia(pos, neg, h.shape[0] - pos - neg)


def nevanlinna_defect(
    samples: Iterable[tuple[complex, np.ndarray]], pair_tol: float = 1e-12
) -> float:
    """Largest violation of Im λ·Im m(λ) ≥ 0 plus largest symmetry violation.

    The symmetry term ‖m(λ̄)* − m(λ)‖ is taken over all conjugate pairs
    present in ``samples`` (matched up to ``pair_tol``).
    """
    pts: list[tuple[complex, np.ndarray]] = [
        (complex(lam), np.atleast_2d(np.asarray(m, dtype=complex))) for lam, m in samples
    ]
    sign_defect = 0.0
    for lam, m in pts:
        if m.size == 0:
            continue
        w = np.linalg.eigvalsh(herm(lam.imag * im_part(m)))
        sign_defect = max(sign_defect, float(-min(w.min(), 0.0)))
    sym_defect = 0.0
    for lam, m in pts:
        for mu, mm in pts:
            if abs(mu - lam.conjugate()) <= pair_tol * max(1.0, abs(lam)) and m.size:
                sym_defect = max(sym_defect, float(np.linalg.norm(mm.conj().T - m, 2)))
    return sign_defect + sym_defect


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    """Block-diagonal matrix; empty blocks contribute their (possibly zero) shape."""
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def selector(dims: Sequence[int], which: Sequence[int]) -> np.ndarray:
    """Rows of the identity picking the listed summands out of ⊕ dims."""
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    idx = [i for w in which for i in range(offsets[w], offsets[w + 1])]
    return np.eye(int(offsets[-1]), dtype=complex)[idx]
