"""stifflab: numerical lab for one-dimensional diffusions with singular
interface barriers — discrete Dirichlet forms, banded solvers, exact-step
path simulation, and convergence sweeps across the three interface phases."""

__version__ = "0.1.0"

from .assembly import DiscreteForm, assemble, darn, elastic_kill, kill, trace_schur
from .evolve import bc_residual, flux_at, resolvent, step_heat
from .grids import Grid, make_grid
from .measures import (
    BarrierSpec,
    CantorMeasure,
    Conductivity,
    LebesgueMeasure,
    MonotoneMeasure,
    build_lambda_eps,
    conductivity_family,
    lejay_barrier,
    measure_increments,
)
from .mc import estimate, run_ctmc, run_snob, step_reflected_bm
from .scenario import (
    Continuous,
    EpsBarrier,
    Scenario,
    Separate,
    Snapping,
    brownian_scenario,
    make_probe,
)
from .sweeps import (
    SweepSpec,
    check_resolvent_identity,
    kappa_lock_scan,
    run_fdd_check,
    run_gamma_continuity,
    run_phase_sweep,
)

__all__ = [
    "__version__",
    "DiscreteForm", "assemble", "darn", "elastic_kill", "kill", "trace_schur",
    "bc_residual", "flux_at", "resolvent", "step_heat",
    "Grid", "make_grid",
    "BarrierSpec", "CantorMeasure", "Conductivity", "LebesgueMeasure",
    "MonotoneMeasure", "build_lambda_eps", "conductivity_family",
    "lejay_barrier", "measure_increments",
    "estimate", "run_ctmc", "run_snob", "step_reflected_bm",
    "Continuous", "EpsBarrier", "Scenario", "Separate", "Snapping",
    "brownian_scenario", "make_probe",
    "SweepSpec", "check_resolvent_identity", "kappa_lock_scan",
    "run_fdd_check", "run_gamma_continuity", "run_phase_sweep",
]
