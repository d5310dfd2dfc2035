"""Voltage-stability toolkit for grid-connected constant-power loads.

Models a rectifier-style constant-power load behind a line impedance in a
synchronously rotating dq frame, and provides the analyses that matter for
large disturbances: equilibria and their spectra, the Hopf point in load
power, the unstable limit cycle bounding the region of attraction, and
critical clearing times for voltage sag/surge events.
"""

from .model import (
    CircuitParams,
    GridInput,
    PlanarState,
    FullState,
    deriv_planar,
    deriv_full,
    jacobian_planar,
    jacobian_full,
    power_from_state,
)
from .integrate import (
    IntegratorConfig,
    Method,
    Outcome,
    ScheduledEvent,
    Trajectory,
    integrate,
    reverse_time_integrate,
    classify_outcome,
)
from .errors import (
    CpldynError,
    ConfigError,
    SingularStateError,
    ConvergenceError,
    StepSizeError,
    CycleNotFoundError,
    BracketError,
)
from .equilibrium import (
    Classification,
    EquilibriumPoint,
    classify,
    max_loadability,
    solve_planar_equilibria,
    solve_full_equilibrium,
    pv_curve,
)
from .bifurcation import (
    HopfPoint,
    BranchPoint,
    sweep_equilibria,
    find_hopf,
    cycle_amplitude_sweep,
    amplitude_scaling_exponent,
)
from .roa import (
    ClosedCurve,
    RoaTracerConfig,
    RoaReport,
    trace_unstable_limit_cycle,
    roa_report,
    sample_interior,
    sample_exterior_ring,
)
from .scenario import (
    DisturbanceScenario,
    CctResult,
    simulate_fault,
    find_cct_bisection,
    find_cct_roa,
    destabilization_threshold,
    magnitude_scan,
)
from .config import RunConfig, load_run_config, paper_config_path

__version__ = "0.1.0"
