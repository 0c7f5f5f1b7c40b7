"""Product manifolds with global frames, finite-difference calculus along
frame flows, multivector-field evaluation, the Schouten bracket, and the
action-extension map rho.

Points of a ProductManifold are tuples, one entry per factor: a parameter
vector for chart factors, a matrix for group factors.  Frame fields:

* chart factor k, direction i: shift the i-th parameter;
* group factor k: L_a (flow x exp(t e_a)), R_a (flow exp(t e_a) x).

Structure relations are constant: [L_a,L_b] = L_[ab], [R_a,R_b] = -R_[ab],
[L,R] = 0, chart fields commute, cross-factor brackets vanish.  Action
homomorphisms: conjugation rho(e_a) = L_a - R_a, left action -R_a, right
action +L_a.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .liealg import QuadraticLieAlgebra, AlgMultivector, graded_bracket

__all__ = [
    "CrossSection",
    "ChartFactor",
    "GroupFactor",
    "ProductManifold",
    "FramedMultivectorField",
    "derive",
    "evaluate",
    "schouten",
    "jacobiator",
    "rho_extend",
    "section_preset",
    "FD_STEP",
]

FD_STEP = 1e-5
EMBED_STEP = 1e-6


class EvaluationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# factors and sections
# ---------------------------------------------------------------------------

@dataclass
class CrossSection:
    """Chart box embedded into an ambient product manifold.

    embed maps a k-vector of parameters to a full point tuple; tangent returns
    the tuple of per-factor velocities d(embed)/d alpha_i, by central
    differences on embed unless supplied analytically.
    """

    param_dim: int
    embed: Callable[[np.ndarray], tuple]
    box: Sequence[tuple] = None
    tangent: Optional[Callable[[np.ndarray, int], tuple]] = None
    name: str = "section"
    meta: dict = field(default_factory=dict)

    def embed_point(self, params) -> tuple:
        return self.embed(np.atleast_1d(np.asarray(params, dtype=float)))

    def tangent_point(self, params, i: int) -> tuple:
        params = np.atleast_1d(np.asarray(params, dtype=float))
        if self.tangent is not None:
            return self.tangent(params, i)
        p1 = np.array(params); p2 = np.array(params)
        p1[i] += EMBED_STEP
        p2[i] -= EMBED_STEP
        a, b = self.embed(p1), self.embed(p2)
        return tuple((np.asarray(x) - np.asarray(y)) / (2 * EMBED_STEP) for x, y in zip(a, b))


@dataclass
class ChartFactor:
    """Flat chart factor; points are parameter vectors."""

    dim: int
    name: str = "chart"


@dataclass
class GroupFactor:
    """Group (or conjugacy-class subset) factor; points are matrices."""

    alg: QuadraticLieAlgebra
    action: str = "conjugation"  # conjugation | left | right
    name: str = "G"


@dataclass
class ProductManifold:
    """Ordered product of chart and group factors with its global frame."""

    factors: list

    def __post_init__(self):
        self.frame = []
        for k, fac in enumerate(self.factors):
            if isinstance(fac, ChartFactor):
                for i in range(fac.dim):
                    self.frame.append(("chart", k, i))
            elif isinstance(fac, GroupFactor):
                for a in range(fac.alg.dim):
                    self.frame.append(("L", k, a))
                for a in range(fac.alg.dim):
                    self.frame.append(("R", k, a))
            else:
                raise TypeError(f"unsupported factor {fac!r}")
        self._index = {f: n for n, f in enumerate(self.frame)}

    @property
    def nframe(self) -> int:
        return len(self.frame)

    def frame_index(self, kind: str, k: int, a: int) -> int:
        return self._index[(kind, k, a)]

    # -- flows -------------------------------------------------------------
    def flow(self, point: tuple, frame_id: int, t: float) -> tuple:
        kind, k, a = self.frame[frame_id]
        out = list(point)
        if kind == "chart":
            p = np.array(point[k], dtype=float)
            p[a] += t
            out[k] = p
        else:
            alg = self.factors[k].alg
            e = _cached_exp(alg, a, t)
            out[k] = point[k] @ e if kind == "L" else e @ point[k]
        return tuple(out)

    def conj_flow(self, point: tuple, k: int, a: int, t: float) -> tuple:
        """Flow of the conjugation homomorphism field X_a = L_a - R_a on factor k."""
        alg = self.factors[k].alg
        out = list(point)
        out[k] = _cached_exp(alg, a, -t) @ point[k] @ _cached_exp(alg, a, t)
        return tuple(out)

    # -- structure constants of the frame ----------------------------------
    def structure_constant(self, A: int, B: int) -> dict:
        """[v_A, v_B] = sum c^C v_C as {C: coeff}; constant by construction."""
        kindA, kA, aA = self.frame[A]
        kindB, kB, aB = self.frame[B]
        if kindA == "chart" or kindB == "chart" or kA != kB or kindA != kindB:
            return {}
        alg = self.factors[kA].alg
        fvec = alg.f[aA, aB]
        sign = 1.0 if kindA == "L" else -1.0
        return {
            self.frame_index(kindA, kA, c): sign * fvec[c]
            for c in range(alg.dim)
            if fvec[c] != 0.0
        }

    # -- action model --------------------------------------------------------
    def action_coefficients(self, e_index: int, alg: QuadraticLieAlgebra) -> dict:
        """Frame coefficients of rho(e_a) for the simultaneous (product) action,
        using each factor's declared action kind.  Homomorphism conventions:
        conjugation L - R, left action -R, right action +L."""
        coeffs = {}
        for k, fac in enumerate(self.factors):
            if not isinstance(fac, GroupFactor):
                continue
            if fac.alg is not alg and fac.alg.name != alg.name:
                raise ValueError("action algebra mismatch")
            if fac.action == "conjugation":
                coeffs[self.frame_index("L", k, e_index)] = 1.0
                coeffs[self.frame_index("R", k, e_index)] = -1.0
            elif fac.action == "left":
                coeffs[self.frame_index("R", k, e_index)] = -1.0
            elif fac.action == "right":
                coeffs[self.frame_index("L", k, e_index)] = 1.0
            else:
                raise ValueError(f"unknown action kind {fac.action!r}")
        return coeffs


_EXP_CACHE: dict = {}


def _cached_exp(alg: QuadraticLieAlgebra, a: int, t: float) -> np.ndarray:
    key = (id(alg), a, round(t, 14))
    hit = _EXP_CACHE.get(key)
    if hit is None:
        hit = expm(t * alg.rep[a])
        if len(_EXP_CACHE) > 20000:
            _EXP_CACHE.clear()
        _EXP_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# derivatives and fields
# ---------------------------------------------------------------------------

def derive(man: ProductManifold, frame_id: int, f: Callable, point: tuple,
           h: float = FD_STEP, richardson: bool = False) -> float:
    """Central difference of f along the frame flow; O(h^2), Richardson O(h^4)."""
    def central(step):
        v = (f(man.flow(point, frame_id, step)) - f(man.flow(point, frame_id, -step))) / (2 * step)
        if not np.isfinite(v):
            raise EvaluationError("non-finite value in finite difference")
        return v

    if richardson:
        return (4.0 * central(h / 2) - central(h)) / 3.0
    return central(h)


@dataclass
class FramedMultivectorField:
    """Degree-d field: point -> antisymmetric array over the frame."""

    man: ProductManifold
    degree: int
    coeff: Callable[[tuple], np.ndarray]
    name: str = "field"

    def at(self, point: tuple) -> np.ndarray:
        c = np.asarray(self.coeff(point), dtype=float)
        if c.shape != (self.man.nframe,) * self.degree:
            raise EvaluationError(
                f"coefficient array of {self.name} has shape {c.shape}, expected "
                f"{(self.man.nframe,) * self.degree}"
            )
        return c

    def __add__(self, other: "FramedMultivectorField") -> "FramedMultivectorField":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        return FramedMultivectorField(
            self.man, self.degree, lambda p: self.at(p) + other.at(p),
            name=f"{self.name}+{other.name}",
        )

    def __rmul__(self, s: float) -> "FramedMultivectorField":
        return FramedMultivectorField(
            self.man, self.degree, lambda p: float(s) * self.at(p), name=self.name
        )


def evaluate(field: FramedMultivectorField, fs: Sequence[Callable], point: tuple,
             h: float = FD_STEP, richardson: bool = False) -> float:
    """Contract a degree-d field with d differentials: sum over the coefficient
    array of products of frame derivatives."""
    d = field.degree
    if len(fs) != d:
        raise ValueError("number of functions must match the degree")
    man = field.man
    C = field.at(point)
    D = np.zeros((man.nframe, d))
    support = _support_axes(C)
    for A in support:
        for j, f in enumerate(fs):
            D[A, j] = derive(man, A, f, point, h=h, richardson=richardson)
    letters = "ABCEFG"[:d]
    operands = [C] + [D[:, j] for j in range(d)]
    spec = letters + "," + ",".join(letters[j] for j in range(d)) + "->"
    return float(np.einsum(spec, *operands))


def _support_axes(C: np.ndarray) -> list:
    if C.ndim == 0:
        return []
    mask = np.abs(C) > 0
    axes = set()
    for idx in zip(*np.nonzero(mask)):
        axes.update(idx)
    return sorted(axes)


def jacobiator(pi: FramedMultivectorField, f, g, h, point: tuple,
               step: float = FD_STEP, richardson: bool = False) -> float:
    """{f,{g,h}} + {g,{h,f}} + {h,{f,g}} with {a,b} = evaluate(pi, (a,b), .)."""
    def br(a, b):
        return lambda p: evaluate(pi, (a, b), p, h=step, richardson=richardson)

    return (
        evaluate(pi, (f, br(g, h)), point, h=step, richardson=richardson)
        + evaluate(pi, (g, br(h, f)), point, h=step, richardson=richardson)
        + evaluate(pi, (h, br(f, g)), point, h=step, richardson=richardson)
    )


# ---------------------------------------------------------------------------
# Schouten bracket: recursive Leibniz on sorted frame monomials
# ---------------------------------------------------------------------------

def _wsign(idx: tuple):
    if len(set(idx)) != len(idx):
        return None
    arr, sign = list(idx), 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return tuple(arr), sign


def _array_to_terms(C: np.ndarray, man_dim: int) -> dict:
    """Antisymmetric array -> {sorted index tuple: coefficient} (A1<...<Ad)."""
    d = C.ndim
    out = {}
    if d == 0:
        return {(): float(C)}
    for idx in zip(*np.nonzero(np.abs(C) > 0)):
        sidx = tuple(sorted(idx))
        if sidx == tuple(idx):
            out[sidx] = float(C[idx])
    return out


def _terms_to_array(terms: dict, n: int, d: int) -> np.ndarray:
    from itertools import permutations as _perms

    C = np.zeros((n,) * d)
    for mono, v in terms.items():
        if len(mono) != d:
            raise EvaluationError("mixed degrees in bracket output")
        for perm in _perms(range(d)):
            sign = _perm_sign_local(perm)
            C[tuple(mono[p] for p in perm)] += sign * v
    return C


def _perm_sign_local(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


class _BracketEngine:
    """Recursive Schouten bracket over a frame with constant structure relations.

    Terms are (coeff_fn, sorted index tuple).  Base cases: [v_A, v_B] from the
    structure constants, [X, f] = X(f); rules: bilinearity, the Leibniz

        [A ^ B, C] = A ^ [B, C] + (-1)^{(b)(c-1)} [A, C] ^ B   (A a frame vector)
        [X, B ^ C] = [X, B] ^ C + B ^ [X, C]                    (B a frame vector)

    with graded antisymmetry closing the remaining cases.  Satisfies
    [P,P](df,dg,dh) = 2 Jacobiator and [X,Q] = L_X Q (checked in tests).
    """

    def __init__(self, man: ProductManifold, h: float = FD_STEP, richardson: bool = False):
        self.man = man
        self.h = h
        self.richardson = richardson
        self._dcache: dict = {}

    def _vA(self, fn, x, A):
        key = (id(fn), A)
        hit = self._dcache.get(key)
        if hit is None:
            hit = derive(self.man, A, fn, x, h=self.h, richardson=self.richardson)
            self._dcache[key] = hit
        return hit

    def term_bracket(self, f1, m1, f2, m2, x):
        a, b = len(m1), len(m2)
        out = []
        if a == 0 and b == 0:
            return out
        if a == 0:
            sub = self.term_bracket(f2, m2, f1, (), x)
            s = -((-1.0) ** (b - 1))
            return [(s * v, m) for v, m in sub]
        if b == 0:
            if a == 1:
                return [(f1(x) * self._vA(f2, x, m1[0]), ())]
            sub = self._bracket_f_A(f2, f1, m1, x)
            s = -((-1.0) ** (a - 1))
            return [(s * v, m) for v, m in sub]
        if a == 1 and b == 1:
            val = []
            for Cc, cc in self.man.structure_constant(m1[0], m2[0]).items():
                val.append((f1(x) * f2(x) * cc, (Cc,)))
            val.append((f1(x) * self._vA(f2, x, m1[0]), (m2[0],)))
            val.append((-f2(x) * self._vA(f1, x, m2[0]), (m1[0],)))
            return val
        if a > 1:
            A0, rest = m1[0], m1[1:]
            sub = self.term_bracket(f1, rest, f2, m2, x)
            for v, m in sub:
                w = _wsign((A0,) + m)
                if w:
                    out.append((v * w[1], w[0]))
            sub2 = self.term_bracket(_one, (A0,), f2, m2, x)
            s = (-1.0) ** ((a - 1) * (b - 1))
            f1x = f1(x)
            for v, m in sub2:
                w = _wsign(m + rest)
                if w:
                    out.append((s * f1x * v * w[1], w[0]))
            return out
        # a == 1, b > 1
        B0, rest = m2[0], m2[1:]
        sub = self.term_bracket(f1, m1, _one, (B0,), x)
        f2x = f2(x)
        for v, m in sub:
            w = _wsign(m + rest)
            if w:
                out.append((f2x * v * w[1], w[0]))
        sub2 = self.term_bracket(f1, m1, f2, rest, x)
        for v, m in sub2:
            w = _wsign((B0,) + m)
            if w:
                out.append((v * w[1], w[0]))
        return out

    def _bracket_f_A(self, f, g1, m1, x):
        """[f, g1 v_{m1}] for scalar f."""
        a = len(m1)
        if a == 0:
            return []
        B0, rest = m1[0], m1[1:]
        out = []
        w = _wsign(rest)
        if w is not None:
            out.append((-(self._vA(f, x, B0)) * g1(x) * w[1], w[0]))
        for v, m in self._bracket_f_A(f, g1, rest, x):
            ww = _wsign((B0,) + m)
            if ww:
                out.append((-v * ww[1], ww[0]))
        return out


def _one(_):
    return 1.0


def schouten(A: FramedMultivectorField, B: FramedMultivectorField, point: tuple,
             h: float = FD_STEP, richardson: bool = False) -> np.ndarray:
    """Schouten bracket value [A, B](point) as an antisymmetric frame array of
    degree |A|+|B|-1."""
    if A.degree + B.degree > 4:
        raise NotImplementedError("Schouten bracket limited to |A|+|B| <= 4")
    man = A.man
    eng = _BracketEngine(man, h=h, richardson=richardson)
    termsA = _field_terms(A, point)
    termsB = _field_terms(B, point)
    acc: dict = {}
    for fA, mA in termsA:
        for fB, mB in termsB:
            for v, m in eng.term_bracket(fA, mA, fB, mB, point):
                acc[m] = acc.get(m, 0.0) + v
    deg = A.degree + B.degree - 1
    return _terms_to_array({k: v for k, v in acc.items() if abs(v) > 1e-300}, man.nframe, deg)


def _field_terms(F: FramedMultivectorField, point: tuple) -> list:
    """Monomial terms (coeff_fn, sorted idx) covering the field's support near
    the point: support is probed at the base point and at points flowed a step
    along every frame axis, so coefficients vanishing only at the base point
    still contribute their derivatives."""
    support = set(_array_to_terms(F.at(point), F.man.nframe))
    declared = getattr(F, "support", None)
    if declared is not None:
        support.update(tuple(m) for m in declared)
    else:
        for A in range(F.man.nframe):
            probe = F.man.flow(point, A, 8 * FD_STEP)
            support.update(_array_to_terms(F.at(probe), F.man.nframe))
    terms = []
    for mono in sorted(support):
        def cf(p, mm=mono, FF=F):
            return float(FF.at(p)[mm])

        terms.append((cf, mono))
    return terms


# ---------------------------------------------------------------------------
# rho extension
# ---------------------------------------------------------------------------

def action_matrix(man: ProductManifold, alg: QuadraticLieAlgebra) -> np.ndarray:
    """rho_vecs[a, A]: frame coefficients of rho(e_a) for the product action."""
    rho_vecs = np.zeros((alg.dim, man.nframe))
    for a in range(alg.dim):
        for fid, c in man.action_coefficients(a, alg).items():
            rho_vecs[a, fid] = c
    return rho_vecs


def rho_extend(man: ProductManifold, alg: QuadraticLieAlgebra, elem, degree: int = None,
               name: str = "rho") -> FramedMultivectorField:
    """Extend the action map to multivectors: substitute rho(e_a) for each
    algebra slot (wedge-multiplicative by multilinearity of the contraction).

    elem is an AlgMultivector or a callable point -> AlgMultivector (supply
    degree in the callable case).
    """
    if degree is None:
        degree = elem.degree
    rho_vecs = action_matrix(man, alg)
    letters, big = "abc"[:degree], "ABC"[:degree]
    spec = letters + "," + ",".join(f"{letters[j]}{big[j]}" for j in range(degree)) + "->" + big

    def coeff(point):
        E = elem(point) if callable(elem) else elem
        return np.einsum(spec, E.coeffs, *([rho_vecs] * degree))

    return FramedMultivectorField(man, degree, coeff, name=name)


# ---------------------------------------------------------------------------
# section presets
# ---------------------------------------------------------------------------

def section_preset(name: str, alg: QuadraticLieAlgebra) -> CrossSection:
    """Shipped cross-sections.

    "paper_su2": the worked SU(2) reduction scenario.  Ambient C x C (both
    factors the trace-zero class, conjugation action); the section moves the
    first factor along the meridian u(alpha) = cos(alpha) e1 + sin(alpha) e2
    and pins the second at p = diag(i,-i).
    """
    if name == "paper_su2":
        if alg.name != "su2":
            raise ValueError("paper_su2 requires the su2 preset")
        p = np.asarray(alg.rep[1])  # diag(i,-i)

        def u_of(a: float) -> np.ndarray:
            return np.cos(a) * alg.rep[0] + np.sin(a) * alg.rep[1]

        def embed(params):
            return (u_of(float(params[0])), p)

        def tangent(params, i):
            a = float(params[0])
            return (-np.sin(a) * alg.rep[0] + np.cos(a) * alg.rep[1], np.zeros((2, 2)))

        return CrossSection(
            1,
            embed,
            box=[(-1.45, 1.45)],
            tangent=tangent,
            name="paper_su2",
            meta={"moving_factor": 0, "pinned_base": p, "alg": alg},
        )
    raise ValueError(f"unknown section preset {name!r}")
