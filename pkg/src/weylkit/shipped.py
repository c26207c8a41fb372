"""Reference problems used by the tests, the acceptance suite and the example configs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockspace import BlockSignature
from .boundary import BoundaryOperatorU, U_from_hermitian
from .oddorder import OddOrderExpression, Reduction, reduce_to_system
from .system import (
    AbstractForm,
    ConstantTail,
    PolynomialSampler,
    Regular,
    SymmetricSystem,
)
from .weyl import WeylContext


@dataclass
class Problem:
    name: str
    sys: SymmetricSystem
    U: BoundaryOperatorU
    reduction: Reduction | None = None

    def context(self) -> WeylContext:
        return WeylContext.build(self.sys, self.U)


def _schrodinger(endpoint, name: str) -> Problem:
    """−y″ = λy as J y′ − B y = λΔy with y = (y, y′), B = diag(0, 1), Δ = diag(1, 0)."""
    sig = BlockSignature(1, 0)
    B = np.diag([0.0, 1.0]).astype(complex)
    D = np.diag([1.0, 0.0]).astype(complex)
    if endpoint == "tail":
        endpoint = ConstantTail(0.0, B, D)
    sys = SymmetricSystem(sig, 0.0, endpoint, B, D, name=name)
    return Problem(name, sys, U_from_hermitian(sig, np.zeros((1, 1))))


def dirichlet() -> Problem:
    """−y″ on [0, 1]; U and τ₀ give y(0) = y(1) = 0."""
    return _schrodinger(Regular(1.0), "dirichlet")


def free_schrodinger() -> Problem:
    """−y″ on [0, ∞) with y(0) = 0; m(λ) = i√λ."""
    return _schrodinger("tail", "free_schrodinger")


def flagship_expression() -> OddOrderExpression:
    """l[y] = −i y‴ (q₀ = 1, all other coefficients zero)."""
    return OddOrderExpression(1, p=[0.0, 0.0], q=[1.0, 0.0], name="third_order")


def third_order_halfline() -> Problem:
    expr = flagship_expression()
    red = reduce_to_system(expr, 0.0)
    return Problem("third_order_halfline", red.sys, U_from_hermitian(red.sys.sig, np.zeros((1, 1))), red)


def third_order_interval(b: float = 1.0) -> Problem:
    expr = flagship_expression()
    red = reduce_to_system(expr, 0.0, Regular(b))
    return Problem("third_order_interval", red.sys, U_from_hermitian(red.sys.sig, np.zeros((1, 1))), red)


def unequal_synthetic() -> Problem:
    """sig(1,2) with a declared endpoint form of inertia (1, 0) and a constant tail.

    Coordinates (y₀, ŷ₁, ŷ₂, y₁); on [0, 2] B carries a linear Hermitian coupling
    between ŷ₁ and ŷ₂.
    """
    sig = BlockSignature(1, 2)
    n = sig.n
    coeffs = [[[0.0] for _ in range(n)] for _ in range(n)]
    coeffs[0][0] = [0.3]
    coeffs[3][3] = [1.0]
    coeffs[1][2] = [0.0, 0.2 + 0.1j]
    coeffs[2][1] = [0.0, 0.2 - 0.1j]
    B = PolynomialSampler(coeffs)
    D = np.diag([1.0, 1.0, 1.0, 0.0]).astype(complex)
    ep = AbstractForm(
        t_cut=2.0,
        omega_b=np.diag([0.0, 1.0, 0.0, 0.0]),
        B_tail=np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex),
        D_tail=np.diag([1.0, 0.0, 0.5, 0.0]).astype(complex),
    )
    sys = SymmetricSystem(sig, 0.0, ep, B, D, name="unequal_synthetic")
    return Problem("unequal_synthetic", sys, U_from_hermitian(sig, np.array([[0.4]])))


CATALOG = {
    "dirichlet": dirichlet,
    "free_schrodinger": free_schrodinger,
    "third_order_halfline": third_order_halfline,
    "third_order_interval": third_order_interval,
    "unequal_synthetic": unequal_synthetic,
}


def dirichlet_oracle(k: int) -> tuple[float, float]:
    """Eigenvalue (kπ)² and point mass 2(kπ)² of Σ for the Dirichlet problem."""
    lam = (k * np.pi) ** 2
    return lam, 2.0 * lam
