"""Dust trajectories around rotating asteroids under solar radiation pressure.

The package covers the photo-gravitational Hill problem around a small body,
its zero-velocity curves, an orbit-averaged eccentricity model, and passive
sorting of ejected regolith by grain size and density.
"""

__version__ = "0.1.0"

from .errors import (ClosedRegionImpossible, ConfigError, DirectReimpact, DomainError,
                     HyperbolicEjection, NumericalError, StrategyInfeasible, Unreachable)
from .model import (AU, CONSTANTS, ParticleModel, PhysicalConstants, SystemModel, beta_to_radius,
                    build_system, compute_beta)
from .kernels import BACKEND, available_backends
from .dynamics import (CorotState, Elements, Status, TrajectoryOutcome, elements_from_cartesian,
                       cartesian_from_elements, jacobi_integral, propagate, to_osculating)
from .equilibria import (guaranteed_return_velocity, l2_distance, libration_points,
                         zvc_grid, zvc_open_velocity)
from .ejection import EjectionSpec, ejection_phase, initial_elements, spec_for_phase, spec_to_state
from .phasespace import HamiltonianModel, build_model, ejection_model, flow, hamiltonian
from .sorting import (ErrorKind, landing, on_orbit_collection, reimpact_map,
                      required_velocity_for_separation, sensitivity, separation_on_ground)
from .montecarlo import CHONDRITE_MIX, MaterialComponent, UncertaintyConfig, run_campaign
from .granular import AggregateModel, CohesionParams, bond_ratio, cohesion_force, effective_beta
