"""Numerical laboratory for a harmonically confined two-electron atom with
exactly solvable time dependence: real-time evolution, exact density
assembly, Kohn-Sham potential inversion, differential-virial and
rigid-translation checks, and causal linear-response machinery.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateInputError, InputShapeError,
                     InstabilityError, InsufficientDataError, ModelInvalidError,
                     MoshlabError, NumericError, QuadratureError,
                     SingularKernelError, StepSizeError, UnsupportedScopeError)
from .grids import (DensityTrajectory, LineGrid, PotentialTrajectory,
                    RadialGrid, TimeGrid)
from .models import (ConstantFrequency, LinearRamp, MoshinskyInteraction,
                     NoInteraction, SinusoidalFrequency, SoftenedCoulombInteraction,
                     SuddenSwitch, interaction_from_config, protocol_from_config)
from .cm import WidthTrajectory, solve_ermakov
from .rm import (RadialWavefunction, WavefunctionTrajectory, propagate,
                 propagate_radial_potential, solve_ground_state)
from .density import (ScatteringFactor, assemble_density,
                      moshinsky_scattering_closed_form, scattering_factor)
from .inversion import (KSOrbital, VelocityField, build_orbital,
                        invert_potential, repropagate_check, velocity_field)
from .virial import (continuity_residual, dvt_residual_interacting,
                     dvt_residual_ks, hpt_check,
                     interacting_kinetic_vector_field, interaction_force_term,
                     kinetic_vector_field)
from .response import (CausalKernel, ModelXCKernel, forward_response,
                       hartree_kernel, numerical_chi_s, solve_dyson,
                       volterra_invert)
from .scenarios import (DEFAULT_TOLERANCES, RUNNERS, ScenarioConfig,
                        ScenarioResult)
