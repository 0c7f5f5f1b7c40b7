"""Fock-Rosly bivector on G^{n+2g}, the holonomy-slot derivative operators,
CYBE check, and the reduced moduli bracket.

Slot indexing (1-based, matching the holonomy block structure): punctures
occupy nabla_{2i-1} = nabla_R^{M_i}, nabla_{2i} = nabla_L^{M_i}; each handle
(A_i, B_i) occupies the four slots

    base = 2n + 4(i-1):  base+1 = nabla_R^{A_i},  base+2 = nabla_R^{B_i},
                         base+3 = nabla_L^{A_i},  base+4 = nabla_L^{B_i},

with <nabla_R, A> f(p) = d/dt f(p exp(-tA)) and <nabla_L, A> f(p) =
d/dt f(exp(tA) p).  The bracket is the (f,h)-antisymmetrization

    B_r(df,dh) = 1/2 { 1/2 sum_i [r(n_i f, n_i h) - r(n_i h, n_i f)]
                       + sum_{i<j} [r(n_i f, n_j h) - r(n_i h, n_j f)] },

whose normalization is pinned by the coincidence with the fused quasi-Poisson
tensor on conjugacy-class products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .liealg import QuadraticLieAlgebra, cybe_defect
from .manifold import (
    ChartFactor,
    CrossSection,
    FramedMultivectorField,
    GroupFactor,
    ProductManifold,
    action_matrix,
    derive,
    evaluate,
)

__all__ = [
    "SurfaceScenario",
    "nabla",
    "fr_bracket",
    "reduced_bracket",
    "cybe_check",
    "fr_bivector_array",
    "casimir_bivector_array",
    "nabla_frame_vectors",
]


@dataclass
class SurfaceScenario:
    """Punctured-surface holonomy data: n puncture slots (conjugacy classes),
    g handles, and an r-matrix (constant 2-tensor, "casimir", or a dynamical
    skew part as a function of the chart point, with the Casimir added)."""

    alg: QuadraticLieAlgebra
    n: int
    genus: int = 0
    classes: Sequence = ()
    r: Union[str, np.ndarray, Callable] = "casimir"
    section: Optional[CrossSection] = None
    triple: object = None

    def __post_init__(self):
        if self.n + 2 * self.genus < 1:
            raise ValueError("need n + 2 genus >= 1")
        self.man = ProductManifold(
            [GroupFactor(self.alg, "conjugation") for _ in range(self.n + 2 * self.genus)]
        )

    def r_matrix(self, chart_point=None) -> np.ndarray:
        kap = self.alg.kappa
        if isinstance(self.r, str):
            if self.r != "casimir":
                raise ValueError(f"unknown r spec {self.r!r}")
            return kap
        if callable(self.r):
            return np.asarray(self.r(chart_point), dtype=float) + kap
        return np.asarray(self.r, dtype=float)

    @property
    def nslots(self) -> int:
        return 2 * (self.n + 2 * self.genus)


def nabla_frame_vectors(man: ProductManifold, alg: QuadraticLieAlgebra,
                        n: int, genus: int, offset: int = 0) -> list:
    """Frame-coefficient matrices N[i][a, A] of the slot operators, 1-based
    list entries at positions 0..2(n+2g)-1; offset shifts the factor index
    (for products with a leading chart factor)."""
    dim = alg.dim
    out = []

    def vec(kind, k, sign):
        M = np.zeros((dim, man.nframe))
        for a in range(dim):
            M[a, man.frame_index(kind, k + offset, a)] = sign
        return M

    for i in range(n):
        out.append(vec("L", i, -1.0))   # nabla_R
        out.append(vec("R", i, +1.0))   # nabla_L
    for i in range(genus):
        kA = n + 2 * i
        kB = n + 2 * i + 1
        out.append(vec("L", kA, -1.0))  # nabla_R^{A_i}
        out.append(vec("L", kB, -1.0))  # nabla_R^{B_i}
        out.append(vec("R", kA, +1.0))  # nabla_L^{A_i}
        out.append(vec("R", kB, +1.0))  # nabla_L^{B_i}
    return out


def fr_bivector_array(man: ProductManifold, alg: QuadraticLieAlgebra, r: np.ndarray,
                      n: int, genus: int, offset: int = 0) -> np.ndarray:
    """Frame array of B_r: antisymmetrized weighted double sum over slots."""
    N = nabla_frame_vectors(man, alg, n, genus, offset=offset)
    m = man.nframe
    W = np.zeros((m, m))
    for i, Ni in enumerate(N):
        W += 0.5 * np.einsum("ab,aA,bB->AB", r, Ni, Ni)
        for j in range(i + 1, len(N)):
            W += np.einsum("ab,aA,bB->AB", r, Ni, N[j])
    return 0.5 * (W - W.T)


def casimir_bivector_array(man: ProductManifold, alg: QuadraticLieAlgebra,
                           n: int, genus: int, offset: int = 0) -> np.ndarray:
    return fr_bivector_array(man, alg, alg.kappa, n, genus, offset=offset)


def nabla(scenario: SurfaceScenario, i: int, f: Callable, point: tuple,
          h: float = None, richardson: bool = False) -> np.ndarray:
    """Component vector of the i-th slot operator applied to f (1-based i)."""
    if not (1 <= i <= scenario.nslots):
        raise IndexError(f"slot index {i} out of range 1..{scenario.nslots}")
    man, alg = scenario.man, scenario.alg
    N = nabla_frame_vectors(man, alg, scenario.n, scenario.genus)[i - 1]
    kwargs = {} if h is None else {"h": h}
    out = np.zeros(alg.dim)
    for a in range(alg.dim):
        fid = int(np.nonzero(N[a])[0][0])
        out[a] = N[a, fid] * derive(man, fid, f, point, richardson=richardson, **kwargs)
    return out


def fr_bracket(scenario: SurfaceScenario, f: Callable, g: Callable, point: tuple,
               chart_point=None, h: float = None, richardson: bool = False) -> float:
    """B_r(df,dg) at a point of G^{n+2g}."""
    man, alg = scenario.man, scenario.alg
    C = fr_bivector_array(man, alg, scenario.r_matrix(chart_point), scenario.n, scenario.genus)
    fld = FramedMultivectorField(man, 2, lambda p: C, name="B_r")
    kwargs = {} if h is None else {"h": h}
    return evaluate(fld, (f, g), point, richardson=richardson, **kwargs)


def cybe_check(alg: QuadraticLieAlgebra, r: np.ndarray) -> float:
    """Norm of the classical Yang-Baxter defect [[r,r]]."""
    return float(np.max(np.abs(cybe_defect(alg, r))))


# ---------------------------------------------------------------------------
# reduced moduli bracket
# ---------------------------------------------------------------------------

def reduced_space(scenario: SurfaceScenario, triple) -> "ReducedModuli":
    return ReducedModuli(scenario, triple)


@dataclass
class ReducedModuli:
    """U x (remaining factors) with pi_red = pi_U + rho(theta-hat) + rho(r) + B_kappa.

    Points are (alpha, M_3, ..., B_g) tuples; the first entry is the chart
    parameter vector of the triple's section.
    """

    scenario: SurfaceScenario
    triple: "DynamicalTriple"

    def __post_init__(self):
        sc = self.scenario
        self.k = self.triple.section.param_dim
        nfac = sc.n - 2 + 2 * sc.genus
        if nfac < 1:
            raise ValueError("reduced bracket needs remaining holonomy factors")
        self.man = ProductManifold(
            [ChartFactor(self.k, name="U")]
            + [GroupFactor(sc.alg, "conjugation") for _ in range(nfac)]
        )
        self._rho = action_matrix(self.man, sc.alg)
        self._bk = casimir_bivector_array(
            self.man, sc.alg, sc.n - 2, sc.genus, offset=1
        )
        self.pi = FramedMultivectorField(self.man, 2, self._coeff, name="pi_red")

    def _coeff(self, point):
        sc = self.scenario
        alg = sc.alg
        alpha = np.atleast_1d(point[0])
        n = self.man.nframe
        k = self.k
        C = np.zeros((n, n))
        C[:k, :k] = np.asarray(self.triple.pi_U(alpha), dtype=float)
        T = np.asarray(self.triple.theta(alpha), dtype=float)
        for i in range(k):
            for a in range(alg.dim):
                if T[i, a] == 0.0:
                    continue
                row = T[i, a] * self._rho[a]
                C[i, :] += row
                C[:, i] -= row
        R = np.asarray(self.triple.r(alpha), dtype=float)
        C += np.einsum("ab,aA,bB->AB", R, self._rho, self._rho)
        return C + self._bk

    def bracket(self, F, G, point, h: float = None, richardson: bool = False) -> float:
        kwargs = {} if h is None else {"h": h}
        return evaluate(self.pi, (F, G), point, richardson=richardson, **kwargs)


def reduced_bracket(scenario: SurfaceScenario, triple, F, G, point,
                    h: float = None, richardson: bool = False) -> float:
    """Full reduced bivector evaluated on two functions; the three displayed
    bracket cases of the moduli theorem emerge as special evaluations."""
    return ReducedModuli(scenario, triple).bracket(F, G, point, h=h, richardson=richardson)
