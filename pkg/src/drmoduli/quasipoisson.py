"""Quasi-Poisson constructors (pi_G, fusion, surface tensors), the defect
[pi,pi] - rho(phi_q), cross-section decomposition into (pi_U, theta, r)
triples, and Poisson-tensor assembly from triples.

Fixed conventions (calibrated once, see README):

* pi_G = 1/2 kappa^{ab} R_a ^ L_b, conjugation action rho(e_a) = L_a - R_a.
* Fusion: pi_1 + pi_2 - Phi with Phi = -1/2 kappa^{ab} rho_1(e_a) ^ rho_2(e_b),
  i.e. the cross term is +1/2 kappa^{ab} rho_1 ^ rho_2 (this reproduces both
  the two-factor display pi + pi + 1/2 sum (L-R)^1 ^ (L-R)^2 and the
  restriction of the Fock-Rosly Casimir bivector).
* Decomposition (reduction): pi|_U = pi_U - rho(theta-hat) + rho(r); theta
  carries the minus sign.
* Assembly (suspension onto a target): pi = pi_U + pi_N + rho(theta-hat) + rho(r)
  with the plus sign.  On translation targets the mixed terms are built with
  the opposite-translation generators, so the assembled tensor is quasi-Poisson
  for the target's declared action and the decomposition above inverts it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .liealg import QuadraticLieAlgebra, AlgMultivector, quasi_obstruction
from .group import GroupElement, stabilizer, cayley_operator
from .manifold import (
    ChartFactor,
    CrossSection,
    FramedMultivectorField,
    GroupFactor,
    ProductManifold,
    action_matrix,
    evaluate,
    rho_extend,
    schouten,
)

__all__ = [
    "QuasiPoissonSpace",
    "build_pi_G",
    "fuse",
    "build_surface_quasi",
    "quasi_defect",
    "decompose_on_section",
    "assemble",
    "TransversalityError",
]


class TransversalityError(RuntimeError):
    """Section frames plus action images fail to split the tangent space."""


@dataclass
class QuasiPoissonSpace:
    """Manifold with bivector and distinguished action (all factors' kinds)."""

    man: ProductManifold
    pi: FramedMultivectorField
    alg: QuadraticLieAlgebra
    name: str = "space"

    def pi_bracket(self, f, g, point, h=None, richardson=False) -> float:
        kwargs = {} if h is None else {"h": h}
        return evaluate(self.pi, (f, g), point, richardson=richardson, **kwargs)


def _pi_G_array(man: ProductManifold, k: int, alg: QuadraticLieAlgebra) -> np.ndarray:
    """Array of pi_G = 1/2 kappa^{ab} R_a ^ L_b on factor k of man."""
    n = man.nframe
    C = np.zeros((n, n))
    kap = alg.kappa
    for a in range(alg.dim):
        for b in range(alg.dim):
            if kap[a, b] == 0.0:
                continue
            Ra = man.frame_index("R", k, a)
            Lb = man.frame_index("L", k, b)
            C[Ra, Lb] += 0.5 * kap[a, b]
            C[Lb, Ra] -= 0.5 * kap[a, b]
    return C


def build_pi_G(alg: QuadraticLieAlgebra, conjugacy_class: bool = True) -> QuasiPoissonSpace:
    """(G, pi_G) with G acting on itself by conjugation.  Points are group
    (or class) matrices; the same formula restricts to conjugacy classes."""
    man = ProductManifold([GroupFactor(alg, "conjugation")])
    C = _pi_G_array(man, 0, alg)
    pi = FramedMultivectorField(man, 2, lambda p: C, name="pi_G")
    pi.support = _constant_support(C)
    return QuasiPoissonSpace(man, pi, alg, name="pi_G")


def _constant_support(C: np.ndarray) -> list:
    sup = set()
    for idx in zip(*np.nonzero(np.abs(C) > 0)):
        s = tuple(sorted(idx))
        if s == tuple(idx):
            sup.add(s)
    return sorted(sup)


def fuse(A: QuasiPoissonSpace, B: QuasiPoissonSpace) -> QuasiPoissonSpace:
    """Fusion product: pi_A + pi_B + 1/2 kappa^{ab} rho_A(e_a) ^ rho_B(e_b)
    with the diagonal action."""
    if A.alg.name != B.alg.name:
        raise ValueError("fusion requires a common algebra")
    alg = A.alg
    man = ProductManifold(A.man.factors + B.man.factors)
    nA = A.man.nframe
    offA, offB = 0, nA
    rhoA = action_matrix(A.man, alg)
    rhoB = action_matrix(B.man, alg)
    n = man.nframe
    cross = np.zeros((n, n))
    kap = alg.kappa
    for a in range(alg.dim):
        for b in range(alg.dim):
            if kap[a, b] == 0.0:
                continue
            va = np.zeros(n)
            vb = np.zeros(n)
            va[offA:offA + nA] = rhoA[a]
            vb[offB:] = rhoB[b]
            cross += 0.5 * kap[a, b] * (np.outer(va, vb) - np.outer(vb, va))

    piA, piB = A.pi, B.pi

    def coeff(point):
        pA = point[: len(A.man.factors)]
        pB = point[len(A.man.factors):]
        C = np.zeros((n, n))
        C[offA:offA + nA, offA:offA + nA] = piA.at(pA)
        C[offB:, offB:] = piB.at(pB)
        return C + cross

    pi = FramedMultivectorField(man, 2, coeff, name=f"fuse({piA.name},{piB.name})")
    return QuasiPoissonSpace(man, pi, alg, name=f"{A.name}*{B.name}")


def build_surface_quasi(alg: QuadraticLieAlgebra, classes: Sequence[GroupElement],
                        genus: int = 0) -> QuasiPoissonSpace:
    """Quasi-Poisson tensor of the surface moduli ambient: iterated fusion over
    the class factors for genus 0; the Fock-Rosly Casimir bivector restricted
    to class factors otherwise."""
    n = len(classes)
    if n + 2 * genus < 1:
        raise ValueError("need at least one puncture or handle")
    if genus == 0:
        space = build_pi_G(alg)
        for _ in range(n - 1):
            space = fuse(space, build_pi_G(alg))
        space.name = f"P_0,{n}"
        return space
    from .fockrosly import casimir_bivector_array

    factors = [GroupFactor(alg, "conjugation") for _ in range(n)]
    factors += [GroupFactor(alg, "conjugation") for _ in range(2 * genus)]
    man = ProductManifold(factors)
    C = casimir_bivector_array(man, alg, n, genus)
    pi = FramedMultivectorField(man, 2, lambda p: C, name=f"B_kappa^{n},{genus}")
    pi.support = _constant_support(C)
    return QuasiPoissonSpace(man, pi, alg, name=f"P_{genus},{n}")


def quasi_defect(space: QuasiPoissonSpace, f, g, h, point, step=None,
                 richardson: bool = False) -> float:
    """evaluate(schouten(pi,pi) - rho(phi_q), (f,g,h)) at the point.

    phi_q = phi/2 is the quasi-Poisson obstruction tensor of this convention
    system (the Cartan tensor pinned by [kappa12,kappa23] = -phi is 2 phi_q).
    """
    kwargs = {} if step is None else {"h": step}
    S = schouten(space.pi, space.pi, point, richardson=richardson, **kwargs)
    man = space.man
    Sf = FramedMultivectorField(man, 3, lambda p: S, name="[pi,pi]")
    Sf.support = _constant_support(S)
    lhs = evaluate(Sf, (f, g, h), point, richardson=richardson, **kwargs)
    phi_field = rho_extend(man, space.alg, quasi_obstruction(space.alg), name="rho(phi_q)")
    rhs = evaluate(phi_field, (f, g, h), point, richardson=richardson, **kwargs)
    return lhs - rhs


# ---------------------------------------------------------------------------
# decomposition along cross-sections
# ---------------------------------------------------------------------------

def _vectorize_tangent(point_entry, tangent_entry) -> np.ndarray:
    p = np.asarray(point_entry)
    t = np.asarray(tangent_entry)
    if p.ndim == 2 or np.iscomplexobj(p):
        t = t.astype(complex)
        return np.concatenate([np.real(t).ravel(), np.imag(t).ravel()])
    return np.asarray(t, dtype=float).ravel()


def _frame_value(man: ProductManifold, point: tuple, frame_id: int):
    """Concrete tangent value of a frame field (matrix for group factors,
    unit vector for chart factors)."""
    kind, k, a = man.frame[frame_id]
    if kind == "chart":
        v = np.zeros(len(point[k]))
        v[a] = 1.0
        return k, v
    alg = man.factors[k].alg
    e = alg.rep[a]
    x = point[k]
    return k, (x @ e if kind == "L" else e @ x)


def tangent_matrix(man: ProductManifold, point: tuple) -> np.ndarray:
    """Rows: vectorized concrete frame values, for converting coefficient
    arrays into honest tangent tensors."""
    blocks = []
    sizes = []
    for entry in point:
        v = _vectorize_tangent(entry, np.zeros_like(entry))
        sizes.append(v.size)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = offsets[-1]
    V = np.zeros((man.nframe, total))
    for A in range(man.nframe):
        k, val = _frame_value(man, point, A)
        V[A, offsets[k]:offsets[k + 1]] = _vectorize_tangent(point[k], val)
    return V


def _action_values(man: ProductManifold, point: tuple, alg: QuadraticLieAlgebra) -> np.ndarray:
    """Vectorized values of rho(e_a) at the point (rows)."""
    V = tangent_matrix(man, point)
    rho = action_matrix(man, alg)
    return rho @ V


def decompose_on_section(space: QuasiPoissonSpace, section: CrossSection, params,
                         rcond: float = None):
    """Split pi(x) along T_xU + rho(g): returns (pi_U k x k, theta k x n, r n x n)
    with the reduction sign convention pi|_U = pi_U - rho(theta-hat) + rho(r).

    Raises TransversalityError when the section frames plus action images do
    not span, or when the action is not locally free at the point.
    """
    params = np.atleast_1d(np.asarray(params, dtype=float))
    point = section.embed_point(params)
    man, alg = space.man, space.alg
    k, n = section.param_dim, alg.dim

    V = tangent_matrix(man, point)
    Carr = space.pi.at(point)
    T = np.einsum("AB,Ai,Bj->ij", Carr, V, V)

    u_rows = np.stack(
        [
            np.concatenate(
                [
                    _vectorize_tangent(point[kk], tv)
                    for kk, tv in enumerate(section.tangent_point(params, i))
                ]
            )
            for i in range(k)
        ]
    )
    rho_rows = _action_values(man, point, alg)

    smin_rho = np.linalg.svd(rho_rows, compute_uv=False).min()
    if smin_rho < 1e-8:
        raise TransversalityError(f"action not locally free (sigma_min={smin_rho:.2e})")
    basis_rows = np.vstack([u_rows, rho_rows])
    s_all = np.linalg.svd(basis_rows, compute_uv=False)
    if s_all.min() < 1e-8 * s_all.max():
        raise TransversalityError("section tangent + action images are not independent")

    m = k + n
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    cols = []
    for i, j in pairs:
        W = np.outer(basis_rows[i], basis_rows[j]) - np.outer(basis_rows[j], basis_rows[i])
        cols.append(W.ravel())
    M = np.stack(cols, axis=1)
    y = T.ravel()
    sol, *_ = np.linalg.lstsq(M, y, rcond=rcond)
    resid = np.linalg.norm(M @ sol - y)
    scale = max(1.0, np.linalg.norm(y))
    if resid > 1e-8 * scale:
        raise TransversalityError(
            f"bivector is not tangent to the section/orbit splitting (residual {resid:.2e})"
        )

    pi_U = np.zeros((k, k))
    theta = np.zeros((k, n))
    r = np.zeros((n, n))
    for val, (i, j) in zip(sol, pairs):
        if i < k and j < k:
            pi_U[i, j] = val
            pi_U[j, i] = -val
        elif i < k <= j:
            theta[i, j - k] = -val  # Eq-(8) sign: theta carries the minus
        else:
            r[i - k, j - k] = val
            r[j - k, i - k] = -val
    return pi_U, theta, r


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def assemble(triple, target: QuasiPoissonSpace, name: str = "pi_assembled") -> QuasiPoissonSpace:
    """Assemble pi = pi_U + pi_N + rho_N(theta-hat) + rho_N(r) on U x N.

    triple: a DynamicalTriple (chart functions alpha -> pi_U, theta, r).
    target: quasi-Poisson space N whose declared action supplies rho_N.  For
    translation factors the mixed and r terms are built with the opposite
    translation's generators (the assembled tensor is then quasi-Poisson for
    the declared action, and decompose_on_section inverts the assembly).
    """
    alg = target.alg
    k = triple.section.param_dim
    factors = [ChartFactor(k, name="U")] + target.man.factors
    man = ProductManifold(factors)
    nloc = man.nframe
    kdim = k

    opp = {"left": "right", "right": "left", "conjugation": "conjugation"}
    build_man = ProductManifold(
        [ChartFactor(k, name="U")]
        + [
            GroupFactor(f.alg, opp[f.action], name=f.name) if isinstance(f, GroupFactor) else f
            for f in target.man.factors
        ]
    )
    rho = action_matrix(build_man, alg)  # frame coefficients of the building generators

    piN = target.pi
    nN = target.man.nframe

    def coeff(point):
        alpha = np.atleast_1d(point[0])
        C = np.zeros((nloc, nloc))
        pu = np.asarray(triple.pi_U(alpha), dtype=float)
        C[:kdim, :kdim] = pu
        th = np.asarray(triple.theta(alpha), dtype=float)
        rr = triple.r(alpha)
        rr = rr.coeffs if isinstance(rr, AlgMultivector) else np.asarray(rr, dtype=float)
        for i in range(kdim):
            for a in range(alg.dim):
                if th[i, a] == 0.0:
                    continue
                row = th[i, a] * rho[a]
                C[i, :] += row
                C[:, i] -= row
        C += np.einsum("ab,aA,bB->AB", rr, rho, rho)
        C[kdim:, kdim:] += piN.at(tuple(point[1:]))
        return C

    pi = FramedMultivectorField(man, 2, coeff, name=name)
    return QuasiPoissonSpace(man, pi, alg, name=name)
