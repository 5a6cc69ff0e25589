"""Numerical laboratory for Hardy and Rellich identities with sharp remainders."""

from .cases import case_library, describe_case, list_cases
from .cp import compute_constant, cp_eval, lemma_bound_check
from .fields import horizontal_divergence, horizontal_gradient, l_apply, lp_apply, make_system
from .identities import (
    gradient_modulus_gap,
    verify,
    verify_hardy,
    verify_hardy_directional,
    verify_poincare_interval,
    verify_rellich,
)
from .quadrature import QuadratureSpec, integrate, refine_until

__version__ = "0.1.0"
