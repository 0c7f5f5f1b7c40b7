"""Classical dynamical r-matrices and Poisson G-spaces: the Sklyanin bivector,
the Kirillov-Kostant-Souriau structure on h*, the Poisson tensor
pi_r = pi_KKS + rho^L(theta) + rho^L(A_r) - rho^R(r0) on h* x G, and the
Poisson-action defect.

Translation generators follow the homomorphism conventions: the left action
g.(x,p) = (x, gp) has rho^L(e_a) = -R_a (flow exp(-t e_a) p), the right action
rho^R(e_a) = +L_a (flow p exp(t e_a)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .liealg import QuadraticLieAlgebra, AlgMultivector
from .group import GroupElement
from .manifold import (
    ChartFactor,
    FramedMultivectorField,
    GroupFactor,
    ProductManifold,
    evaluate,
)

__all__ = [
    "ClassicalDynamicalRMatrix",
    "build_sklyanin",
    "build_kks",
    "build_pi_r_gspace",
    "poisson_action_defect",
    "SubalgebraError",
]


class SubalgebraError(ValueError):
    pass


@dataclass
class ClassicalDynamicalRMatrix:
    """Classical dynamical r-matrix data: skew part A_r as a function of the
    h* chart point, epsilon the Casimir coefficient, h a subalgebra basis
    (columns; identity = all of g)."""

    alg: QuadraticLieAlgebra
    A_r: Callable[[np.ndarray], np.ndarray]
    epsilon: float = 1.0
    h_basis: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.h_basis is None:
            self.h_basis = np.eye(self.alg.dim)
        _check_subalgebra(self.alg, self.h_basis)

    @property
    def h_dim(self) -> int:
        return self.h_basis.shape[1]


def _check_subalgebra(alg: QuadraticLieAlgebra, B: np.ndarray):
    """Closure of span(B) under the bracket."""
    B = np.asarray(B, dtype=float)
    proj = B @ np.linalg.pinv(B)
    for i in range(B.shape[1]):
        for j in range(B.shape[1]):
            br = np.einsum("a,b,abc->c", B[:, i], B[:, j], alg.f)
            if np.linalg.norm(br - proj @ br) > 1e-10:
                raise SubalgebraError("basis does not span a subalgebra")


def _sub_structure(alg: QuadraticLieAlgebra, B: np.ndarray) -> np.ndarray:
    """Structure constants of the subalgebra in the column basis."""
    k = B.shape[1]
    Binv = np.linalg.pinv(B)
    f = np.zeros((k, k, k))
    for i in range(k):
        for j in range(k):
            f[i, j] = Binv @ np.einsum("a,b,abc->c", B[:, i], B[:, j], alg.f)
    return f


def build_sklyanin(alg: QuadraticLieAlgebra, r0: np.ndarray) -> FramedMultivectorField:
    """pi_G = rho^L(r0) - rho^R(r0) on G (validity reported, never assumed)."""
    r0 = np.asarray(r0, dtype=float)
    man = ProductManifold([GroupFactor(alg, "left")])
    n = man.nframe
    C = np.zeros((n, n))
    for a in range(alg.dim):
        for b in range(alg.dim):
            if r0[a, b] == 0.0:
                continue
            Ra, Rb = man.frame_index("R", 0, a), man.frame_index("R", 0, b)
            La, Lb = man.frame_index("L", 0, a), man.frame_index("L", 0, b)
            C[Ra, Rb] += r0[a, b]   # rho^L(e)=-R: signs square
            C[La, Lb] -= r0[a, b]   # -rho^R with rho^R(e)=+L
    fld = FramedMultivectorField(man, 2, lambda p: C, name="pi_sklyanin")
    fld.support = _support(C)
    return fld


def _support(C) -> list:
    sup = set()
    for idx in zip(*np.nonzero(np.abs(C) > 0)):
        s = tuple(sorted(idx))
        if s == tuple(idx):
            sup.add(s)
    return sorted(sup)


def build_kks(alg: QuadraticLieAlgebra, h_basis: Optional[np.ndarray] = None) -> FramedMultivectorField:
    """Linear KKS bivector on the flat chart h*: {x_i, x_j}(x) = f[i,j,c] x_c."""
    B = np.eye(alg.dim) if h_basis is None else np.asarray(h_basis, dtype=float)
    _check_subalgebra(alg, B)
    fsub = _sub_structure(alg, B)
    k = B.shape[1]
    man = ProductManifold([ChartFactor(k, name="h*")])

    def coeff(point):
        x = np.asarray(point[0], dtype=float)
        return np.einsum("ijc,c->ij", fsub, x)

    return FramedMultivectorField(man, 2, coeff, name="pi_KKS")


def build_pi_r_gspace(cdr: ClassicalDynamicalRMatrix, r0: np.ndarray) -> "GSpace":
    """pi_r = pi_KKS + rho^L(theta) + rho^L(A_r) - rho^R(r0) on h* x G with
    theta the canonical element sum_i d/dx_i (x) e_i over the h basis."""
    alg = cdr.alg
    r0 = np.asarray(r0, dtype=float)
    B = cdr.h_basis
    k = cdr.h_dim
    fsub = _sub_structure(alg, B)
    man = ProductManifold([ChartFactor(k, name="h*"), GroupFactor(alg, "left")])
    n = man.nframe

    # rho^L(e_a) = -R_a frame rows; rho^R(e_a) = +L_a
    rhoL = np.zeros((alg.dim, n))
    rhoR = np.zeros((alg.dim, n))
    for a in range(alg.dim):
        rhoL[a, man.frame_index("R", 1, a)] = -1.0
        rhoR[a, man.frame_index("L", 1, a)] = 1.0
    theta_rows = B.T @ rhoL  # row i: rho^L of the i-th h-basis vector

    base = np.zeros((n, n))
    base -= np.einsum("ab,aA,bB->AB", r0, rhoR, rhoR)
    for i in range(k):
        ei = np.zeros(n)
        ei[i] = 1.0
        base += np.outer(ei, theta_rows[i]) - np.outer(theta_rows[i], ei)

    def coeff(point):
        x = np.asarray(point[0], dtype=float)
        C = base.copy()
        C[:k, :k] += np.einsum("ijc,c->ij", fsub, x)
        Ar = np.asarray(cdr.A_r(x), dtype=float)
        C += np.einsum("ab,aA,bB->AB", Ar, rhoL, rhoL)
        return C

    pi = FramedMultivectorField(man, 2, coeff, name="pi_r")
    return GSpace(man, pi, alg, cdr, r0)


@dataclass
class GSpace:
    man: ProductManifold
    pi: FramedMultivectorField
    alg: QuadraticLieAlgebra
    cdr: ClassicalDynamicalRMatrix
    r0: np.ndarray

    def bracket(self, f, g, point, h: float = None, richardson: bool = False) -> float:
        kwargs = {} if h is None else {"h": h}
        return evaluate(self.pi, (f, g), point, richardson=richardson, **kwargs)


def poisson_action_defect(gspace: GSpace, sklyanin: FramedMultivectorField,
                          g1: GroupElement, a_point: tuple, f, g,
                          h: float = None, richardson: bool = False) -> float:
    """Defect of pi_r(g1 . a) = g1_* pi_r(a) + a_* pi_G(g1), evaluated on (f,g).

    Pushforwards act by composing the test functions with the maps: the left
    translation (x, p) -> (x, g1 p) and the orbit map a: G -> h* x G,
    g -> (x, g p_a)."""
    x, p2 = a_point
    ga = (x, g1.m @ p2)
    kwargs = {} if h is None else {"h": h}
    lhs = evaluate(gspace.pi, (f, g), ga, richardson=richardson, **kwargs)

    def fL(q):
        return f((q[0], g1.m @ q[1]))

    def gL(q):
        return g((q[0], g1.m @ q[1]))

    rhs1 = evaluate(gspace.pi, (fL, gL), a_point, richardson=richardson, **kwargs)

    def fa(q):
        return f((x, q[0] @ p2))

    def ga_(q):
        return g((x, q[0] @ p2))

    rhs2 = evaluate(sklyanin, (fa, ga_), (g1.m,), richardson=richardson, **kwargs)
    return lhs - rhs1 - rhs2
