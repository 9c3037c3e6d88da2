"""First- and second-order rate regions for two-user multiple-access channels
with degraded message sets, plus finite-blocklength Monte Carlo checks."""

__version__ = "0.1.0"

from .channel import (Channel, ChannelFormatError, JointInput, RateVec, joint_type_project,
                      load_channel, load_input, serialize_channel)
from .infogeom import (DispersionMatrix, InfoVector, RankProfile, UndefinedDensityError,
                       dispersion_matrix, info_density, mean_vector, rank_profile)
from .mvnorm import QuantileRegion, phi, phi_inv, psi, psi_inverse, region_continuity_gap
from .capacity import (FeasibleDirections, RegionBoundary, TangentPair, boundary,
                       feasible_directions, pi_set, tangents)
from .secondorder import (Case, CaseTag, SecondOrderRegion, Theorem1Config, classify, l0_region,
                          single_user_rate, theorem1_region)
from .fbl_sim import (CodebookSpec, SimulationReport, build_codebook, gaussian_approx_rates,
                      simulate_error, verdu_han_bound)

__all__ = [name for name in dir() if not name.startswith("_")]
