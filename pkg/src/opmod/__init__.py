"""opmod: positive sesquilinear maps into ordered Banach bimodules.

Construction and property-testing toolkit: concrete bimodule targets with
cones and norms, finite-dimensional quasi *-algebras, bimodule-valued
sesquilinear and completely positive maps, the induced quotient (GNS) and
dilation (Stinespring) representations, Radon-Nikodym intertwiners of
dominated pairs, and seeded verifiers for the Cauchy-Schwarz family of
inequalities.
"""

from . import algebras, bimodules, forms, gns, instances, serialize, stinespring
from .algebras import (AlgebraElement, QuasiAlgebra, check_axioms,
                       involution, make_function_algebra, make_matrix_algebra,
                       multiply, unit)
from .bimodules import (BimoduleElement, BimoduleSpace, adjoint_element, bcc,
                        c_grid, check_order_preserving, cone_contains, dual_vn,
                        element, l1_trace, l2_finite, measures_finite, norm,
                        op_map, sandwich, seq_c)
from .forms import (LinearPositiveMap, SesquiForm, bound_estimate,
                    check_left_invariant, check_positive, eval_form,
                    induced_form, null_space, phi_norm, sesqui_form,
                    verify_cs, verify_ks, verify_series_cs)
from .gns import (GnsRep, QuotientSpace, build_gns, build_quotient,
                  gns_from_state, verify_gns)
from .stinespring import (CPForm, FiberSpace, GammaMap, OperatorTable, PsiMap,
                          RNOperator, StinespringTriple, build_stinespring,
                          check_cp, cp_form, euclid_fiber, extend_to_tensor,
                          gamma_lift, matrix_fiber, psi_lift, radon_nikodym,
                          radon_nikodym_positive, unitary_equiv,
                          verify_series_cp_cs)

__version__ = "0.1.0"
