"""Numerical toolkit for quasi-Poisson geometry on products of conjugacy classes,
generalized dynamical r-matrix triples (pi_U, theta, r), and Fock-Rosly brackets
on moduli spaces of flat connections.

Convention summary (fixed once; see README for the derivation):

* Multivectors are held as fully antisymmetric tensor-component arrays;
  the wedge carries no 1/n!:  a^b = a(x)b - b(x)a.
* L_a is the left-invariant field (flow x exp(t e_a)), R_a right-invariant
  (flow exp(t e_a) x); conjugation generators X_a = L_a - R_a are a Lie
  algebra homomorphism.
* pi_G = 1/2 sum_ab kappa^{ab} R_a ^ L_b with kappa the inverse pairing.
* Fusion cross term: pi_fused = pi_1 + pi_2 + 1/2 sum kappa^{ab} rho_1(e_a)^rho_2(e_b).
* The Cartan 3-tensor phi satisfies [kappa^12, kappa^23] = -phi; the
  quasi-Poisson obstruction is phi/2 (equal to the 1/12 f_abc wedge formula
  under the conventions above).
* schouten(P,P) evaluated on (df,dg,dh) equals twice the Jacobiator.
"""

from .liealg import (
    QuadraticLieAlgebra,
    AlgMultivector,
    Cobracket,
    bracket,
    cartan_three_tensor,
    quasi_obstruction,
    graded_bracket,
    cybe_defect,
    cobracket_apply,
    algebra_preset,
    algebra_from_json,
)
from .group import (
    GroupElement,
    ConjugacyClass,
    exponential,
    logarithm,
    adjoint,
    stabilizer,
    cayley_operator,
    class_bivector,
    DegenerateOperatorError,
)
from .manifold import (
    CrossSection,
    GroupFactor,
    ChartFactor,
    ProductManifold,
    FramedMultivectorField,
    derive,
    evaluate,
    schouten,
    jacobiator,
    rho_extend,
    section_preset,
)
from .quasipoisson import (
    QuasiPoissonSpace,
    build_pi_G,
    fuse,
    build_surface_quasi,
    quasi_defect,
    decompose_on_section,
    assemble,
)
from .drmatrix import (
    DynamicalTriple,
    tensor_ops,
    compat_defect,
    gdybe_defect,
    morphism_defect,
    unified_defect,
    h_projector,
    moduli_triple,
    gauge_transform,
    iso21_triple,
)
from .fockrosly import SurfaceScenario, nabla, fr_bracket, reduced_bracket, cybe_check
from .gspace import (
    ClassicalDynamicalRMatrix,
    build_sklyanin,
    build_kks,
    build_pi_r_gspace,
    poisson_action_defect,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
