"""Boundary operator U, its J-unitary extension, endpoint forms and decomposing triplets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .blockspace import BlockSignature, build_J, herm, inertia
from .errors import (
    CaseMismatch,
    ConsistencyError,
    ExtensionFailure,
    OutOfScope,
    RelationViolated,
    UnsupportedEndpoint,
)
from .system import AbstractForm, ConstantTail, Regular, SymmetricSystem

RELATION_TOL = 1e-10


def _rel_residual(x: np.ndarray, scale: float) -> float:
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2)) / max(1.0, scale)


# ---------------------------------------------------------------------------
# The operator U and its extension
# ---------------------------------------------------------------------------


@dataclass
class BoundaryOperatorU:
    """U = [[u1,u2,u3],[u4,u5,u6]] : H ⊕ Ĥ ⊕ H → Ĥ ⊕ H, optionally extended by W = (u7,u8,u9).

    ``Ut`` stacks the rows as (W; Û; U₁), so that Ũ y(a) = (Γ_{0a}, Γ̂_a, Γ_{1a}).
    """

    sig: BlockSignature
    U_hat: np.ndarray
    U_one: np.ndarray
    W: np.ndarray | None = None
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def extended(self) -> bool:
        return self.W is not None

    @property
    def Ut(self) -> np.ndarray:
        if self.W is None:
            raise ExtensionFailure("U has not been extended")
        return np.vstack([self.W, self.U_hat, self.U_one])

    @property
    def blocks(self) -> dict[str, np.ndarray]:
        s = self.sig
        out = {}
        for name, row in (("1", self.U_hat), ("4", self.U_one)):
            base = int(name)
            out[f"u{base}"] = row[:, s.s0]
            out[f"u{base + 1}"] = row[:, s.shat]
            out[f"u{base + 2}"] = row[:, s.s1]
        if self.W is not None:
            out["u7"], out["u8"], out["u9"] = self.W[:, s.s0], self.W[:, s.shat], self.W[:, s.s1]
        return out

    @property
    def phi_a(self) -> np.ndarray:
        """Initial value of φ_U, written in the blocks of U only (n×ν₋)."""
        b = self.blocks
        s = self.sig
        out = np.zeros((s.n, s.nu_minus), dtype=complex)
        cH, cHat = slice(0, s.nu_plus), slice(s.nu_plus, s.nu_minus)
        out[s.s0, cH] = b["u6"].conj().T
        out[s.s0, cHat] = 1j * b["u3"].conj().T
        out[s.shat, cH] = -1j * b["u5"].conj().T
        out[s.shat, cHat] = b["u2"].conj().T
        out[s.s1, cH] = -b["u4"].conj().T
        out[s.s1, cHat] = -1j * b["u1"].conj().T
        return out

    @property
    def psi_a(self) -> np.ndarray:
        """Initial value of ψ: Ũψ(a) = (−(i/2)P_Ĥ; −P_H)."""
        s = self.sig
        rhs = np.zeros((s.n, s.nu_minus), dtype=complex)
        rhs[s.shat, s.nu_plus :] = -0.5j * np.eye(s.nu_hat)
        rhs[s.s1, : s.nu_plus] = -np.eye(s.nu_plus)
        return np.linalg.solve(self.Ut, rhs)


def validate_U(
    sig: BlockSignature, U_hat: np.ndarray, U_one: np.ndarray, tol: float = RELATION_TOL
) -> BoundaryOperatorU:
    """Check the three row relations of U and its surjectivity."""
    U_hat = np.asarray(U_hat, dtype=complex).reshape(sig.nu_hat, sig.n)
    U_one = np.asarray(U_one, dtype=complex).reshape(sig.nu_plus, sig.n)
    J = build_J(sig)
    scale = float(np.linalg.norm(np.vstack([U_hat, U_one]), 2)) ** 2
    checks = {
        "Uhat J Uhat* = iI": U_hat @ J @ U_hat.conj().T - 1j * np.eye(sig.nu_hat),
        "Uhat J U1* = 0": U_hat @ J @ U_one.conj().T,
        "U1 J U1* = 0": U_one @ J @ U_one.conj().T,
    }
    residuals = {}
    for name, mat in checks.items():
        r = _rel_residual(mat, scale)
        residuals[name] = r
        if r > tol:
            raise RelationViolated(name, r)
    stacked = np.vstack([U_hat, U_one])
    if stacked.shape[0] and np.linalg.matrix_rank(stacked, tol=1e-10 * max(scale, 1.0)) < stacked.shape[0]:
        raise RelationViolated("full row rank", 1.0)
    return BoundaryOperatorU(sig, U_hat, U_one, residuals=residuals)


def extend_U(U: BoundaryOperatorU, tol: float = RELATION_TOL) -> BoundaryOperatorU:
    """Complete U by a row block W so that Ũ = (W; Û; U₁) is J-unitary.

    W₀ is the least-norm solution of W₀ J (Û; U₁)* = (0, −I); correcting by
    −½ (W₀ J W₀*) U₁ makes W J W* vanish without disturbing the other relations.
    """
    sig = U.sig
    J = build_J(sig)
    M = J @ np.vstack([U.U_hat, U.U_one]).conj().T
    R = np.hstack([np.zeros((sig.nu_plus, sig.nu_hat)), -np.eye(sig.nu_plus)]).astype(complex)
    W0 = R @ np.linalg.pinv(M)
    S0 = W0 @ J @ W0.conj().T
    W = W0 - 0.5 * S0 @ U.U_one
    out = BoundaryOperatorU(sig, U.U_hat, U.U_one, W, dict(U.residuals))
    check_extension(out, tol)
    return out


def check_extension(U: BoundaryOperatorU, tol: float = RELATION_TOL) -> float:
    J = build_J(U.sig)
    Ut = U.Ut
    scale = float(np.linalg.norm(Ut, 2)) ** 2
    r = max(
        _rel_residual(Ut.conj().T @ J @ Ut - J, scale),
        _rel_residual(Ut @ J @ Ut.conj().T - J, scale),
    )
    U.residuals["Ut* J Ut = J"] = r
    if r > tol:
        raise ExtensionFailure(f"J-unitarity residual {r:.3e}")
    return r


def U_from_hermitian(sig: BlockSignature, Bmat: np.ndarray) -> BoundaryOperatorU:
    """The family Ũ = [[sin B, 0, −cos B], [0, I, 0], [cos B, 0, sin B]], B Hermitian on H."""
    Bmat = np.atleast_2d(np.asarray(Bmat, dtype=complex))
    w, V = np.linalg.eigh(herm(Bmat))
    sinB = (V * np.sin(w)) @ V.conj().T
    cosB = (V * np.cos(w)) @ V.conj().T
    p, h = sig.nu_plus, sig.nu_hat
    U_hat = np.hstack([np.zeros((h, p)), np.eye(h), np.zeros((h, p))])
    U_one = np.hstack([cosB, np.zeros((p, h)), sinB])
    W = np.hstack([sinB, np.zeros((p, h)), -cosB])
    U = validate_U(sig, U_hat, U_one)
    U.W = W.astype(complex)
    check_extension(U)
    return U


def random_J_unitary(sig: BlockSignature, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """exp(−J K) with K Hermitian is J-unitary."""
    n = sig.n
    K = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    K = scale * herm(K)
    return expm(-build_J(sig) @ K)


def random_U(sig: BlockSignature, rng: np.random.Generator, scale: float = 0.5) -> BoundaryOperatorU:
    Ut = random_J_unitary(sig, rng, scale)
    return validate_U(sig, Ut[sig.shat], Ut[sig.s1])


def gamma_a(U: BoundaryOperatorU, y_a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    v = U.Ut @ np.asarray(y_a, dtype=complex)
    s = U.sig
    return v[s.s0], v[s.shat], v[s.s1]


# ---------------------------------------------------------------------------
# Endpoint forms
# ---------------------------------------------------------------------------


@dataclass
class HyperbolicRealization:
    """Rows G0, Ghat, G1 with iΩ = i·s·Ghat*Ghat − G0*G1 + G1*G0."""

    G0: np.ndarray
    Ghat: np.ndarray
    G1: np.ndarray
    sign: int
    pos: int
    neg: int

    def residual(self, omega: np.ndarray) -> float:
        if omega.size == 0:
            return 0.0
        lhs = 1j * omega
        rhs = (
            1j * self.sign * self.Ghat.conj().T @ self.Ghat
            - self.G0.conj().T @ self.G1
            + self.G1.conj().T @ self.G0
        )
        return _rel_residual(lhs - rhs, float(np.linalg.norm(omega, 2)))


def _canonical_rows(A: np.ndarray) -> np.ndarray:
    """Left-multiply by a unitary so the rows are in upper-trapezoidal form with
    nonnegative real pivots; fixes the eigenvector freedom reproducibly."""
    if A.shape[0] == 0:
        return A
    Q, R = np.linalg.qr(A)
    for i in range(R.shape[0]):
        row = R[i]
        j = int(np.argmax(np.abs(row) > 1e-12 * max(1.0, np.abs(row).max())))
        if abs(row[j]) > 0:
            R[i] = row * (abs(row[j]) / row[j])
    return R


def hyperbolic_realization(omega: np.ndarray, tol: float = 1e-10) -> HyperbolicRealization:
    """Pair positive and negative eigen-directions of a Hermitian form.

    With α = √μ₊ p* and β = √|μ₋| q*, each pair gives G0 = (α+β)/√2 and
    G1 = −i(α−β)/√2; the surplus rows of the majority sign form Ghat.
    """
    omega = np.atleast_2d(np.asarray(omega, dtype=complex))
    m = omega.shape[0]
    if m == 0:
        z = np.zeros((0, 0), dtype=complex)
        return HyperbolicRealization(z, z, z, 0, 0, 0)
    iner = inertia(omega, tol)
    w, V = np.linalg.eigh(herm(omega))
    cut = tol * max(float(np.abs(w).max()), 0.0)
    P = _canonical_rows((V[:, w > cut] * np.sqrt(w[w > cut])).conj().T)
    N = _canonical_rows((V[:, w < -cut] * np.sqrt(-w[w < -cut])).conj().T)
    c = min(iner.pos, iner.neg)
    alpha, beta = P[:c], N[:c]
    G0 = (alpha + beta) / np.sqrt(2.0)
    G1 = -1j * (alpha - beta) / np.sqrt(2.0)
    if iner.pos >= iner.neg:
        Ghat, sign = P[c:], (1 if iner.pos > iner.neg else 0)
    else:
        Ghat, sign = N[c:], -1
    G0 = G0.reshape(c, m)
    G1 = G1.reshape(c, m)
    Ghat = Ghat.reshape(-1, m)
    return HyperbolicRealization(G0, Ghat, G1, sign, iner.pos, iner.neg)


@dataclass
class EndpointForm:
    """[y,z]_b = i e_z* Ω e_y on endpoint data e, realized by (Γ_{0b}, Γ̂_b, Γ_{1b})."""

    nu_b_plus: int
    nu_b_minus: int
    omega: np.ndarray
    real: HyperbolicRealization

    @property
    def data_dim(self) -> int:
        return self.omega.shape[0]

    @property
    def dim_C(self) -> int:
        return min(self.nu_b_plus, self.nu_b_minus)

    @property
    def dim_hat(self) -> int:
        return abs(self.nu_b_plus - self.nu_b_minus)

    @property
    def sign(self) -> int:
        return int(np.sign(self.nu_b_plus - self.nu_b_minus))

    def identity_residual(self) -> float:
        return self.real.residual(self.omega)


def form_from_omega(omega: np.ndarray, tol: float = 1e-10) -> EndpointForm:
    real = hyperbolic_realization(omega, tol)
    form = EndpointForm(real.pos, real.neg, np.asarray(omega, dtype=complex), real)
    r = form.identity_residual()
    if r > 1e-10:
        raise ConsistencyError(f"endpoint identity residual {r:.3e}")
    return form


def _tail_counts(sys: SymmetricSystem, mode_tol: float) -> tuple[int, int]:
    B_inf, D_inf = sys.tail_coefficients()
    counts = []
    for lam in (1j, -1j):
        w = np.linalg.eigvals(-sys.J @ (B_inf + lam * D_inf))
        counts.append(int(np.sum(w.real < -mode_tol)))
    return counts[0], counts[1]


def build_endpoint_form(sys: SymmetricSystem, mode_tol: float = 1e-6) -> EndpointForm:
    ep = sys.endpoint
    if isinstance(ep, Regular):
        return form_from_omega(-1j * sys.J)
    if isinstance(ep, AbstractForm):
        return form_from_omega(np.asarray(ep.omega_b, dtype=complex))
    if isinstance(ep, ConstantTail):
        kp, km = _tail_counts(sys, mode_tol)
        if (kp, km) != (sys.sig.nu_plus, sys.sig.nu_minus):
            raise UnsupportedEndpoint(
                f"tail has {kp}/{km} decaying modes at ±i; only ν_b± = 0 is supported"
            )
        return form_from_omega(np.zeros((0, 0), dtype=complex))
    raise TypeError(f"unknown endpoint {ep!r}")


# ---------------------------------------------------------------------------
# Case classification and the decomposing triplet
# ---------------------------------------------------------------------------


class Case(enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    EQUAL = "EqualIndices"


def classify_case(sig: BlockSignature, form: EndpointForm) -> Case:
    d = form.nu_b_plus - form.nu_b_minus
    if d == sig.nu_hat:
        return Case.EQUAL
    if sig.nu_hat > d > 0:
        return Case.CASE1
    if d <= 0:
        return Case.CASE2
    raise OutOfScope(f"ν̂ = {sig.nu_hat} < ν_b+ − ν_b− = {d}: n₋ < n₊ is not covered")


# slot labels for the boundary spaces
FIRST, HAT, CB, HB = 0, 1, 2, 3


@dataclass
class DecomposingTriplet:
    """Γ0 : data → 𝓗₀ = first ⊕ hat ⊕ 𝒞_b ⊕ Ĥ_b and Γ1 : data → 𝓗₁ = first ⊕ 𝒞_b.

    ``first`` is H ⊕ Ĥ₁ when ν_b+ > ν_b− and H otherwise; ``hat`` is the part of
    Ĥ not absorbed into ``first``.  Joint boundary data is (y(a); endpoint data).
    """

    sig: BlockSignature
    case: Case
    U: BoundaryOperatorU
    form: EndpointForm
    d: int
    dims0: tuple[int, int, int, int]
    Gamma0: np.ndarray
    Gamma1: np.ndarray
    rows: dict[str, np.ndarray]

    @property
    def case1_layout(self) -> bool:
        return self.d > 0

    @property
    def dim0(self) -> int:
        return sum(self.dims0)

    @property
    def dim1(self) -> int:
        return self.dims0[FIRST] + self.dims0[CB]

    @property
    def dims1(self) -> tuple[int, int]:
        return (self.dims0[FIRST], self.dims0[CB])

    def idx0(self, *slots: int) -> np.ndarray:
        off = np.concatenate([[0], np.cumsum(self.dims0)]).astype(int)
        return np.concatenate([np.arange(off[s], off[s + 1]) for s in slots]).astype(int)

    def idx1(self, *slots: int) -> np.ndarray:
        # 𝓗₁ = first ⊕ 𝒞_b
        f, c = self.dims1
        parts = {FIRST: np.arange(0, f), CB: np.arange(f, f + c)}
        return np.concatenate([parts[s] for s in slots]).astype(int)

    @property
    def P1_rows(self) -> np.ndarray:
        """Rows of Γ0 forming P_{𝓗₁}Γ0."""
        return self.Gamma0[self.idx0(FIRST, CB)]

    @property
    def embed1(self) -> np.ndarray:
        """Isometric embedding 𝓗₁ → 𝓗₀."""
        E = np.zeros((self.dim0, self.dim1), dtype=complex)
        E[self.idx0(FIRST, CB), np.arange(self.dim1)] = 1.0
        return E

    @property
    def P2(self) -> np.ndarray:
        P = np.zeros((self.dim0, self.dim0), dtype=complex)
        i = self.idx0(HAT, HB)
        P[i, i] = 1.0
        return P

    # dotted spaces of the boundary parameter: 𝓗̇₀ = hat ⊕ 𝒞_b ⊕ Ĥ_b, 𝓗̇₁ = 𝒞_b
    @property
    def dot_dims(self) -> tuple[int, int, int]:
        return (self.dims0[HAT], self.dims0[CB], self.dims0[HB])

    @property
    def dot_dim0(self) -> int:
        return sum(self.dot_dims)

    @property
    def dim_C(self) -> int:
        return self.dims0[CB]

    def dot_idx(self, *slots: int) -> np.ndarray:
        h, c, hb = self.dot_dims
        parts = {
            HAT: np.arange(0, h),
            CB: np.arange(h, h + c),
            HB: np.arange(h + c, h + c + hb),
        }
        return np.concatenate([parts[s] for s in slots]).astype(int)

    @property
    def data_dim(self) -> int:
        return self.sig.n + self.form.data_dim

    def green_residual(self) -> float:
        """Matrix form of the abstract Green identity against the Lagrange form."""
        G0, G1 = self.Gamma0, self.embed1 @ self.Gamma1
        lhs = G0.conj().T @ G1 - G1.conj().T @ G0 - 1j * G0.conj().T @ self.P2 @ G0
        n = self.sig.n
        target = np.zeros_like(lhs)
        target[:n, :n] = -build_J(self.sig)
        target[n:, n:] = 1j * self.form.omega
        scale = float(np.linalg.norm(np.vstack([G0, G1]), 2)) ** 2
        return _rel_residual(lhs - target, scale)

    def surjective(self) -> bool:
        S = np.vstack([self.Gamma0, self.Gamma1])
        return bool(np.linalg.matrix_rank(S, tol=1e-10 * max(1.0, np.linalg.norm(S, 2))) == S.shape[0])


def build_triplet(
    sys_or_sig: SymmetricSystem | BlockSignature,
    U: BoundaryOperatorU,
    form: EndpointForm,
    case: Case | None = None,
) -> DecomposingTriplet:
    sig = sys_or_sig.sig if isinstance(sys_or_sig, SymmetricSystem) else sys_or_sig
    if U.sig != sig:
        raise CaseMismatch("U and system have different signatures")
    if not U.extended:
        U = extend_U(U)
    actual = classify_case(sig, form)
    if case is not None and case != actual:
        raise CaseMismatch(f"requested {case.value}, indices give {actual.value}")
    n, ne = sig.n, form.data_dim
    Ut = U.Ut

    def at_a(rows):
        return np.hstack([rows, np.zeros((rows.shape[0], ne), dtype=complex)])

    def at_b(rows):
        return np.hstack([np.zeros((rows.shape[0], n), dtype=complex), rows])

    G0a, Gha, G1a = at_a(Ut[sig.s0]), at_a(Ut[sig.shat]), at_a(Ut[sig.s1])
    real = form.real
    G0b, Ghb, G1b = at_b(real.G0), at_b(real.Ghat), at_b(real.G1)
    d = form.nu_b_plus - form.nu_b_minus
    c = form.dim_C
    if d > 0:
        Gha1, Gha2 = Gha[:d], Gha[d:]
        first0 = np.vstack([-G1a, 1j * (Gha1 - Ghb)])
        first1 = np.vstack([G0a, 0.5 * (Gha1 + Ghb)])
        hat0, hb0 = 1j * Gha2, np.zeros((0, n + ne), dtype=complex)
        dims0 = (sig.nu_plus + d, sig.nu_hat - d, c, 0)
        Ghat_row = Gha2
    else:
        first0, first1 = -G1a, G0a
        hat0, hb0 = 1j * Gha, Ghb
        dims0 = (sig.nu_plus, sig.nu_hat, c, -d)
        Ghat_row = Gha
    Gamma0 = np.vstack([first0, hat0, G0b, hb0])
    Gamma1 = np.vstack([first1, -G1b])
    rows = {
        "G0a": G0a,
        "Gha": Gha,
        "G1a": G1a,
        "G0b": G0b,
        "Ghb": Ghb,
        "G1b": G1b,
        "Ghat": Ghat_row,  # Γ̂_{a2} (case 1 layout) or Γ̂_a
        "Gha1": Gha[:d] if d > 0 else np.zeros((0, n + ne), dtype=complex),
    }
    trip = DecomposingTriplet(sig, actual, U, form, d, dims0, Gamma0, Gamma1, rows)
    r = trip.green_residual()
    if r > 1e-9:
        raise ConsistencyError(f"Green identity residual {r:.3e}")
    return trip


def triplet_for(sys: SymmetricSystem, U: BoundaryOperatorU) -> DecomposingTriplet:
    """Endpoint form, case and triplet in one step."""
    form = build_endpoint_form(sys)
    return build_triplet(sys, U, form)


def boundary_form_identity_residual(U: BoundaryOperatorU, y: np.ndarray, z: np.ndarray) -> float:
    """(Jy,z) + (Γ1y,Γ0z) − (Γ0y,Γ1z) − i(Γ̂y,Γ̂z) at a, relative to |y||z|."""
    J = build_J(U.sig)
    y0, yh, y1 = gamma_a(U, y)
    z0, zh, z1 = gamma_a(U, z)
    val = (
        np.vdot(z, J @ y)
        + np.vdot(z0, y1)
        - np.vdot(z1, y0)
        - 1j * np.vdot(zh, yh)
    )
    return float(abs(val)) / max(1.0, float(np.linalg.norm(y) * np.linalg.norm(z)))


def endpoint_identity_residual(form: EndpointForm, y: np.ndarray, z: np.ndarray) -> float:
    """[y,z]_b against i·s(Γ̂y,Γ̂z) − (Γ1y,Γ0z) + (Γ0y,Γ1z) on endpoint data vectors."""
    r = form.real
    lhs = 1j * np.vdot(z, form.omega @ y)
    rhs = (
        1j * r.sign * np.vdot(r.Ghat @ z, r.Ghat @ y)
        - np.vdot(r.G0 @ z, r.G1 @ y)
        + np.vdot(r.G1 @ z, r.G0 @ y)
    )
    return float(abs(lhs - rhs)) / max(1.0, float(np.linalg.norm(y) * np.linalg.norm(z)))


__all__ = [
    "BoundaryOperatorU",
    "Case",
    "DecomposingTriplet",
    "EndpointForm",
    "HyperbolicRealization",
    "build_endpoint_form",
    "build_triplet",
    "classify_case",
    "extend_U",
    "form_from_omega",
    "gamma_a",
    "hyperbolic_realization",
    "random_U",
    "U_from_hermitian",
    "validate_U",
    "triplet_for",
]
