"""Projective realizations, moment relaxations and realization search."""
from .npa import MomentRelaxation, NPAResult, RelaxationError, chsh_objective, npa_infeasibility, npa_max_linear
from .realization import (AXIOM_TOL, CoarseGrainingPartition, IdealReport, Realization, RealizationError,
                          RealizationReport, behaviour_from_realization, check_ideal, coarse_grain_behaviour,
                          coarse_grain_projectors, set_partitions, tensor_realizations, trivial_realization,
                          tsirelson_realization, validate_realization)
from .seesaw import ConstraintCReport, SeesawResult, constraintC_verdict, seesaw_fit

__all__ = [
    "MomentRelaxation", "NPAResult", "RelaxationError", "chsh_objective", "npa_infeasibility", "npa_max_linear",
    "AXIOM_TOL", "CoarseGrainingPartition", "IdealReport", "Realization", "RealizationError", "RealizationReport",
    "behaviour_from_realization", "check_ideal", "coarse_grain_behaviour", "coarse_grain_projectors",
    "set_partitions", "tensor_realizations", "trivial_realization", "tsirelson_realization", "validate_realization",
    "ConstraintCReport", "SeesawResult", "constraintC_verdict", "seesaw_fit",
]
