"""LP and small dense SDP solving."""
from .lp import FarkasCertificate, LinearProgram, LPError, LPResult, solve_lp
from .sdp import (SDPError, SDPInfeasibility, SDPResult, SemidefiniteProgram, min_eigenvalue,
                  solve_sdp)

__all__ = [
    "FarkasCertificate", "LinearProgram", "LPError", "LPResult", "solve_lp",
    "SDPError", "SDPInfeasibility", "SDPResult", "SemidefiniteProgram", "min_eigenvalue", "solve_sdp",
]
