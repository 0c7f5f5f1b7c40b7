"""Quadratic Lie algebras from structure constants, the graded algebra on
Lambda g, and the tensor brackets behind every defect computation.

Conventions. A degree-d element of Lambda^d g is stored as a fully
antisymmetric array of tensor components: the array A represents
sum A[a1..ad] e_{a1} (x) ... (x) e_{ad}.  The wedge carries no factorial,
so (e1 ^ e2)[1,2] = +1, [2,1] = -1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable

import numpy as np

__all__ = [
    "QuadraticLieAlgebra",
    "AlgMultivector",
    "Cobracket",
    "bracket",
    "cartan_three_tensor",
    "quasi_obstruction",
    "graded_bracket",
    "cybe_defect",
    "cobracket_apply",
    "algebra_preset",
    "algebra_from_json",
]

CONSTRUCTOR_TOL = 1e-12


class AlgebraError(ValueError):
    """Raised when structure data violates a constructor invariant."""


@dataclass(frozen=True)
class AlgMultivector:
    """Element of Lambda^d g as an antisymmetric component array."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        if c.ndim != self.degree:
            raise AlgebraError(f"degree {self.degree} needs a rank-{self.degree} array")
        _check_antisymmetric(c)

    def __add__(self, other: "AlgMultivector") -> "AlgMultivector":
        if other.degree != self.degree:
            raise AlgebraError("degree mismatch in sum")
        return AlgMultivector(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "AlgMultivector") -> "AlgMultivector":
        return self + (-1.0) * other

    def __rmul__(self, s: float) -> "AlgMultivector":
        return AlgMultivector(self.degree, float(s) * self.coeffs)

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    @staticmethod
    def wedge_basis(dim: int, indices: tuple) -> "AlgMultivector":
        """e_{i1} ^ ... ^ e_{id} with unit antisymmetric components."""
        d = len(indices)
        c = np.zeros((dim,) * d)
        for perm in permutations(range(d)):
            sign = _perm_sign(perm)
            c[tuple(indices[p] for p in perm)] += sign
        return AlgMultivector(d, c)

    @staticmethod
    def zero(dim: int, degree: int) -> "AlgMultivector":
        return AlgMultivector(degree, np.zeros((dim,) * degree))


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _check_antisymmetric(c: np.ndarray, tol: float = 1e-8):
    d = c.ndim
    for i in range(d):
        for j in range(i + 1, d):
            axes = list(range(d))
            axes[i], axes[j] = axes[j], axes[i]
            if np.max(np.abs(c + np.transpose(c, axes))) > tol * max(1.0, np.max(np.abs(c))):
                raise AlgebraError("coefficient array is not antisymmetric")


def antisymmetrize(c: np.ndarray) -> np.ndarray:
    """Antisymmetric projection (idempotent on antisymmetric input)."""
    d = c.ndim
    out = np.zeros_like(c)
    for perm in permutations(range(d)):
        out += _perm_sign(perm) * np.transpose(c, perm)
    return out / float(np.prod(np.arange(1, d + 1)))


@dataclass(frozen=True)
class Cobracket:
    """Linear map delta: g -> Lambda^2 g, delta(e_a) = sum d[a,b,c] e_b^e_c."""

    d: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.d, dtype=float)
        object.__setattr__(self, "d", arr)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1] or arr.shape[1] != arr.shape[2]:
            raise AlgebraError("cobracket array must be dim x dim x dim")
        if np.max(np.abs(arr + np.transpose(arr, (0, 2, 1)))) > 1e-10:
            raise AlgebraError("cobracket must be antisymmetric in its output slots")

    def co_jacobi_residual(self, alg: "QuadraticLieAlgebra") -> float:
        """Residual of the co-Jacobi identity (diagnostic, not enforced)."""
        d = self.d
        # Alt (delta (x) id) delta = 0: T[a,p,q,r] = sum_b d[a,b,r] d[b,p,q], cyclic in (p,q,r)
        T = np.einsum("abr,bpq->apqr", d, d)
        cyc = T + np.transpose(T, (0, 3, 1, 2)) + np.transpose(T, (0, 2, 3, 1))
        return float(np.max(np.abs(cyc)))

    def cocycle_residual(self, alg: "QuadraticLieAlgebra") -> float:
        """Residual of the 1-cocycle condition delta[x,y] = x.delta(y) - y.delta(x)."""
        d, f = self.d, alg.f
        lhs = np.einsum("abk,kpq->abpq", f, d)
        ad_act = np.einsum("apk,bkq->abpq", f, d) + np.einsum("aqk,bpk->abpq", f, d)
        rhs = ad_act - np.transpose(ad_act, (1, 0, 2, 3))
        return float(np.max(np.abs(lhs - rhs)))


@dataclass
class QuadraticLieAlgebra:
    """Lie algebra with structure constants f[a,b,c] ([e_a,e_b] = f[a,b,c] e_c),
    invariant pairing K, and a faithful matrix representation."""

    dim: int
    labels: list
    f: np.ndarray
    K: np.ndarray
    rep: list
    name: str = "custom"
    _kinv: np.ndarray = field(init=False, repr=False)
    _rep_pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.K = np.asarray(self.K, dtype=float)
        self.rep = [np.asarray(m, dtype=complex) for m in self.rep]
        n = self.dim
        if self.f.shape != (n, n, n):
            raise AlgebraError("f must be dim x dim x dim")
        if self.K.shape != (n, n):
            raise AlgebraError("K must be dim x dim")
        if len(self.rep) != n:
            raise AlgebraError("rep must supply one matrix per basis element")
        self._validate()
        self._kinv = np.linalg.inv(self.K)
        flat = np.stack([m.ravel() for m in self.rep], axis=1)
        self._rep_pinv = np.linalg.pinv(flat)

    # -- constructor invariants -------------------------------------------
    def _validate(self):
        f, K = self.f, self.K
        if np.max(np.abs(f + np.transpose(f, (1, 0, 2)))) > CONSTRUCTOR_TOL:
            raise AlgebraError("structure constants not antisymmetric")
        jac = (
            np.einsum("abd,dce->abce", f, f)
            + np.einsum("bcd,dae->abce", f, f)
            + np.einsum("cad,dbe->abce", f, f)
        )
        if np.max(np.abs(jac)) > CONSTRUCTOR_TOL:
            raise AlgebraError("Jacobi identity fails")
        adinv = np.einsum("abd,dc->abc", f, K) + np.einsum("acd,bd->abc", f, K)
        if np.max(np.abs(adinv)) > CONSTRUCTOR_TOL:
            raise AlgebraError("pairing is not ad-invariant")
        if abs(np.linalg.det(K)) < 1e-10:
            raise AlgebraError("pairing is degenerate")
        for a in range(self.dim):
            for b in range(self.dim):
                comm = self.rep[a] @ self.rep[b] - self.rep[b] @ self.rep[a]
                expect = sum(f[a, b, c] * self.rep[c] for c in range(self.dim))
                if np.max(np.abs(comm - expect)) > 1e-10:
                    raise AlgebraError(f"rep is not a homomorphism at ({a},{b})")

    # -- representation helpers -------------------------------------------
    @property
    def kappa(self) -> np.ndarray:
        """Inverse pairing kappa^{ab} (the Casimir 2-tensor components)."""
        return self._kinv

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """Representation matrix of the coefficient vector x."""
        x = np.asarray(x, dtype=float)
        return sum(xi * m for xi, m in zip(x, self.rep))

    def coords(self, m: np.ndarray) -> np.ndarray:
        """Coefficient vector of an algebra-valued matrix (least squares on rep)."""
        sol = self._rep_pinv @ np.asarray(m, dtype=complex).ravel()
        return np.real(sol)

    def ad(self, x: np.ndarray) -> np.ndarray:
        """Matrix of ad_x on g: (ad_x y)^c = ad(x)[c,b] y^b."""
        return np.einsum("a,abc->cb", np.asarray(x, dtype=float), self.f)

    def pair(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.asarray(x) @ self.K @ np.asarray(y))

    def zero(self, degree: int) -> AlgMultivector:
        return AlgMultivector.zero(self.dim, degree)

    def wedge(self, *indices: int) -> AlgMultivector:
        return AlgMultivector.wedge_basis(self.dim, tuple(indices))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def bracket(alg: QuadraticLieAlgebra, x, y) -> np.ndarray:
    """[x, y]^c = x^a y^b f[a,b,c]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (alg.dim,) or y.shape != (alg.dim,):
        raise AlgebraError("coefficient vectors must have length dim")
    return np.einsum("a,b,abc->c", x, y, alg.f)


def cartan_three_tensor(alg: QuadraticLieAlgebra) -> AlgMultivector:
    """Cartan 3-tensor phi pinned by the exact identity [kappa^12, kappa^23] = -phi."""
    comm = _kappa12_kappa23(alg)
    return AlgMultivector(3, -comm)


def quasi_obstruction(alg: QuadraticLieAlgebra) -> AlgMultivector:
    """The quasi-Poisson obstruction tensor phi_q = phi/2.

    Under this package's wedge and Schouten normalizations the defect identity
    reads schouten(pi, pi) = rho(phi_q); phi_q equals the orthonormal-basis
    expression (1/12) f_abc e_a^e_b^e_c, while the kappa-commutator identity
    pins phi = 2 phi_q.  Both tensors are exposed; see README.
    """
    return 0.5 * cartan_three_tensor(alg)


def _kappa12_kappa23(alg: QuadraticLieAlgebra) -> np.ndarray:
    """[kappa^12, kappa^23]^{pqt} = kappa^{pb} kappa^{ct} f[b,c,q]."""
    k = alg.kappa
    return np.einsum("pb,ct,bcq->pqt", k, k, alg.f)


def cybe_defect(alg: QuadraticLieAlgebra, r: np.ndarray) -> np.ndarray:
    """[[r,r]] = [r12,r13] + [r12,r23] + [r13,r23] for any 2-tensor r."""
    r = np.asarray(r, dtype=float)
    if r.shape != (alg.dim, alg.dim):
        raise AlgebraError("r must be dim x dim")
    f = alg.f
    t1 = np.einsum("ab,cd,acp->pbd", r, r, f)
    t2 = np.einsum("ab,cd,bcq->aqd", r, r, f)
    t3 = np.einsum("ab,cd,bdt->act", r, r, f)
    return t1 + t2 + t3


def _three_term(alg: QuadraticLieAlgebra, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    f = alg.f
    return (
        np.einsum("ab,cd,acp->pbd", A, B, f)
        + np.einsum("ab,cd,bcq->aqd", A, B, f)
        + np.einsum("ab,cd,bdt->act", A, B, f)
    )


def graded_bracket(alg: QuadraticLieAlgebra, A: AlgMultivector, B: AlgMultivector) -> AlgMultivector:
    """Algebraic Schouten bracket on Lambda g extending [.,.] as a biderivation.

    For skew degree-2 arguments this equals twice the Drinfeld three-term sum
    [r12,r13]+[r12,r23]+[r13,r23]; the DYBE operators consume the three-term
    normalization via 1/2 * graded_bracket.
    """
    da, db = A.degree, B.degree
    if da == 1 and db == 1:
        return AlgMultivector(1, bracket(alg, A.coeffs, B.coeffs))
    if da == 1 and db == 2:
        # derivation extension: [x, y^z] = [x,y]^z + y^[x,z]
        out = np.einsum("a,pq,apx->xq", A.coeffs, B.coeffs, alg.f) + np.einsum(
            "a,pq,aqx->px", A.coeffs, B.coeffs, alg.f
        )
        return AlgMultivector(2, out)
    if da == 2 and db == 1:
        inner = graded_bracket(alg, B, A)
        return AlgMultivector(2, -inner.coeffs)
    if da == 2 and db == 2:
        out = _three_term(alg, A.coeffs, B.coeffs) + _three_term(alg, B.coeffs, A.coeffs)
        return AlgMultivector(3, out)
    raise NotImplementedError(f"graded bracket for degrees ({da},{db}) not supported")


def adjoint_defect(alg: QuadraticLieAlgebra, r: np.ndarray, e_index: int) -> np.ndarray:
    """[r, e_a] as a 2-tensor: the equivariance defect of r along e_a."""
    x = np.zeros(alg.dim)
    x[e_index] = 1.0
    return -graded_bracket(alg, AlgMultivector(1, x), AlgMultivector(2, antisym2(r))).coeffs


def antisym2(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (r - r.T)


def cobracket_apply(delta: Cobracket, A: AlgMultivector) -> AlgMultivector:
    """Extend delta as a degree-+1 derivation; on degree 1 the raw cobracket."""
    d = delta.d
    if A.degree == 1:
        return AlgMultivector(2, np.einsum("a,abc->bc", A.coeffs, d))
    if A.degree == 2:
        # delta(x^y) = delta(x)^y - x^delta(y), expanded on components:
        # T[p,q,t] from  sum_{ab} A[a,b] (delta e_a)^{pq} e_b^t  wedged cyclically
        S = np.einsum("ab,apq->pqb", A.coeffs, d)
        out = S + np.transpose(S, (2, 0, 1)) + np.transpose(S, (1, 2, 0))
        return AlgMultivector(3, out)
    raise NotImplementedError("cobracket extension only for degrees 1 and 2")


# ---------------------------------------------------------------------------
# presets and serialization
# ---------------------------------------------------------------------------

_EPS3 = np.zeros((3, 3, 3))
for (_a, _b, _c), _s in [
    ((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
    ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1),
]:
    _EPS3[_a, _b, _c] = _s

SU2_E1 = np.array([[0, 1j], [1j, 0]])
SU2_E2 = np.array([[1j, 0], [0, -1j]])
SU2_E3 = np.array([[0, 1], [-1, 0]], dtype=complex)


def _su2() -> QuadraticLieAlgebra:
    # [e_a, e_b] = 2 eps_abc e_c; <x,y> = -tr(xy)/2 makes the basis orthonormal
    return QuadraticLieAlgebra(
        dim=3,
        labels=["e1", "e2", "e3"],
        f=2.0 * _EPS3,
        K=np.eye(3),
        rep=[SU2_E1, SU2_E2, SU2_E3],
        name="su2",
    )


_ETA = np.diag([1.0, -1.0, -1.0])


def _eps_mixed() -> np.ndarray:
    """eps_{ab}^c = eps_{abd} eta^{dc} with eps_{012} = 1."""
    return np.einsum("abd,dc->abc", _EPS3, _ETA)


def _iso21() -> QuadraticLieAlgebra:
    # basis (J0,J1,J2,P0,P1,P2): [J_a,J_b]=eps_ab^c J_c, [J_a,P_b]=eps_ab^c P_c, [P,P]=0
    em = _eps_mixed()
    f = np.zeros((6, 6, 6))
    f[:3, :3, :3] = em
    f[:3, 3:, 3:] = em
    f[3:, :3, 3:] = -np.transpose(em, (1, 0, 2))
    K = np.zeros((6, 6))
    K[:3, 3:] = _ETA
    K[3:, :3] = _ETA
    # 4x4 affine rep: J_a -> Lorentz vector-rep block, P_a -> translation column
    J = [np.zeros((4, 4), dtype=complex) for _ in range(3)]
    for a in range(3):
        J[a][:3, :3] = em[a].T  # (J_a)^c_b = eps_ab^c acting on column vectors
    P = [np.zeros((4, 4), dtype=complex) for _ in range(3)]
    for a in range(3):
        P[a][a, 3] = 1.0
    return QuadraticLieAlgebra(
        dim=6,
        labels=["J0", "J1", "J2", "P0", "P1", "P2"],
        f=f,
        K=K,
        rep=J + P,
        name="iso21",
    )


def _abelian(n: int) -> QuadraticLieAlgebra:
    # faithful rep by nilpotent upper-triangular matrices of size n+1
    rep = []
    for a in range(n):
        m = np.zeros((n + 1, n + 1), dtype=complex)
        m[a, n] = 1.0
        rep.append(m)
    return QuadraticLieAlgebra(
        dim=n,
        labels=[f"e{i+1}" for i in range(n)],
        f=np.zeros((n, n, n)),
        K=np.eye(n),
        rep=rep,
        name=f"abelian:{n}",
    )


def algebra_preset(name: str) -> QuadraticLieAlgebra:
    """Shipped presets: "su2", "iso21", "abelian:<n>"."""
    if name == "su2":
        return _su2()
    if name == "iso21":
        return _iso21()
    if name.startswith("abelian:"):
        return _abelian(int(name.split(":", 1)[1]))
    raise AlgebraError(f"unknown algebra preset {name!r}")


def algebra_from_json(doc) -> QuadraticLieAlgebra:
    """Load {dim, labels, f, K, rep} from a JSON document, path, or dict."""
    if isinstance(doc, (str,)):
        with open(doc) as fh:
            doc = json.load(fh)
    rep = [np.array(m, dtype=complex) for m in doc["rep"]]
    return QuadraticLieAlgebra(
        dim=int(doc["dim"]),
        labels=list(doc.get("labels", [f"e{i+1}" for i in range(int(doc["dim"]))])),
        f=np.array(doc["f"], dtype=float),
        K=np.array(doc["K"], dtype=float),
        rep=rep,
        name=doc.get("name", "custom"),
    )
