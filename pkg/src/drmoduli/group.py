"""Matrix Lie group calculus: exponential/logarithm, the adjoint, conjugacy
class scaffolding (stabilizer and its pairing-complement), and the Cayley
operator (Ad_g + 1)(Ad_g - 1)^{-1} restricted to the stabilizer complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm

from .liealg import QuadraticLieAlgebra

__all__ = [
    "GroupElement",
    "ConjugacyClass",
    "DegenerateOperatorError",
    "exponential",
    "logarithm",
    "adjoint",
    "stabilizer",
    "cayley_operator",
    "class_bivector",
]

LOG_RADIUS = 1.9
KERNEL_RTOL = 1e-8


class DegenerateOperatorError(RuntimeError):
    """Ad_g - 1 is not invertible on the requested complement."""


class DomainError(ValueError):
    """Input outside the operation's validity region."""


@dataclass(frozen=True)
class GroupElement:
    """Group element as an invertible matrix in the algebra's representation."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        object.__setattr__(self, "m", m)
        if abs(np.linalg.det(m)) < 1e-12:
            raise DomainError("matrix is numerically singular")

    def inv(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.m))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.m @ other.m)


@dataclass
class ConjugacyClass:
    """Base point with stabilizer data: g_p = ker(Ad_p - 1) and its
    K-orthogonal complement."""

    alg: QuadraticLieAlgebra
    base: GroupElement
    stab_basis: np.ndarray      # columns span g_p
    perp_basis: np.ndarray      # columns span g_p-perp (K-orthogonal)
    near_degenerate: bool = False

    @property
    def stab_dim(self) -> int:
        return self.stab_basis.shape[1]


def exponential(alg: QuadraticLieAlgebra, x) -> GroupElement:
    """exp of a coefficient vector through the representation."""
    return GroupElement(expm(alg.matrix(x)))


def logarithm(alg: QuadraticLieAlgebra, g: GroupElement) -> np.ndarray:
    """Principal log for elements near the identity, as a coefficient vector."""
    n = g.m.shape[0]
    if np.linalg.norm(g.m - np.eye(n)) > LOG_RADIUS:
        raise DomainError("element outside the logarithm radius")
    return alg.coords(logm(np.asarray(g.m)))


def adjoint(alg: QuadraticLieAlgebra, g: GroupElement) -> np.ndarray:
    """Matrix of Ad_g: x -> g rep(x) g^{-1} in the algebra basis."""
    gi = np.linalg.inv(g.m)
    cols = [alg.coords(g.m @ alg.matrix(_unit(alg.dim, a)) @ gi) for a in range(alg.dim)]
    return np.stack(cols, axis=1)


def _unit(n: int, a: int) -> np.ndarray:
    v = np.zeros(n)
    v[a] = 1.0
    return v


def stabilizer(alg: QuadraticLieAlgebra, g: GroupElement, rtol: float = KERNEL_RTOL) -> ConjugacyClass:
    """Numerical kernel of Ad_g - 1 with K-orthogonal complement.

    The kernel is detected by singular-value thresholding; a poorly separated
    spectrum marks the result near_degenerate instead of raising.
    """
    A = adjoint(alg, g)
    B = A - np.eye(alg.dim)
    U, S, Vt = np.linalg.svd(B)
    smax = S.max() if S.size else 0.0
    if smax < 1e-14:  # identity: everything is stabilized
        return ConjugacyClass(alg, g, np.eye(alg.dim), np.zeros((alg.dim, 0)))
    kernel_mask = S < rtol * smax
    rank = int((~kernel_mask).sum())
    kern = Vt[rank:].T
    near = False
    if 0 < rank < alg.dim:
        gap = S[rank - 1] / max(S[rank:].max(), 1e-300) if S[rank:].size else np.inf
        near = gap < 1e4
    # complement of the kernel w.r.t. K: rows of (kern^T K) annihilate it
    if kern.shape[1] == 0:
        perp = np.eye(alg.dim)
    else:
        M = kern.T @ alg.K
        _, s2, V2t = np.linalg.svd(M)
        perp = V2t[kern.shape[1]:].T
        if perp.shape[1] + kern.shape[1] != alg.dim:
            raise DegenerateOperatorError("pairing-complement of the stabilizer is degenerate")
    return ConjugacyClass(alg, g, kern, perp, near_degenerate=near)


def cayley_operator(alg: QuadraticLieAlgebra, g: GroupElement) -> np.ndarray:
    """(Ad_g + 1)(Ad_g - 1)^{-1} Pr_{g_g-perp} as a dim x dim matrix.

    Raises DegenerateOperatorError when Ad_g - 1 fails to invert on the
    complement (e.g. parabolic ISO(2,1) orbits).
    """
    cls = stabilizer(alg, g)
    A = adjoint(alg, g)
    P, kern = cls.perp_basis, cls.stab_basis
    k = P.shape[1]
    if k == 0:
        return np.zeros((alg.dim, alg.dim))
    W = np.hstack([kern, P])
    try:
        Winv = np.linalg.inv(W)
    except np.linalg.LinAlgError as exc:
        raise DegenerateOperatorError("stabilizer and complement do not split g") from exc
    pr_coords = Winv[kern.shape[1]:, :]          # complement coordinates along g_g
    M = pr_coords @ (A - np.eye(alg.dim)) @ P    # (Ad-1) restricted, in complement coords
    smin = np.linalg.svd(M, compute_uv=False).min() if k else 0.0
    if smin < 1e-10:
        raise DegenerateOperatorError(
            f"Ad_g - 1 not invertible on the stabilizer complement (sigma_min={smin:.2e})"
        )
    return P @ (M + 2.0 * np.eye(k)) @ np.linalg.inv(M) @ pr_coords


def class_bivector(alg: QuadraticLieAlgebra, g: GroupElement) -> np.ndarray:
    """Coefficient array of pi_G at g against the conjugation frame X_a = L_a - R_a:
    pi_G = 1/2 sum C_ab X_a (x) X_b with C the Cayley operator (skew)."""
    return 0.5 * cayley_operator(alg, g)
