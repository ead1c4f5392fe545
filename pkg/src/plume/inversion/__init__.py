from .l2 import L2Result, l2_invert
from .pdap import ColumnCache, InversionError, InversionResult, PdapConfig, SourceProblem, pdap_run
from .postprocess import Certificate, certify_optimality, merge_atoms, objective_value, prune
from .subproblem import SubproblemError, closed_form_single, solve_intensities

__all__ = [
    "Certificate", "ColumnCache", "InversionError", "InversionResult", "L2Result", "PdapConfig",
    "SourceProblem", "SubproblemError", "certify_optimality", "closed_form_single", "l2_invert",
    "merge_atoms", "objective_value", "pdap_run", "prune", "solve_intensities",
]
