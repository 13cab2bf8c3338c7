"""Time integration of the waveguide problem for solutions radial in x."""

from .cutoff import Cutoff, CutoffSetup, cutoff_setup
from .nonlinearity import (
    PRESETS,
    CompatibilityReport,
    Nonlinearity,
    canonical_examples,
    check_neumann_compatibility,
    compatibility_agreement,
    preset,
)
from .radial import RadialGrid
from .solver import (
    CompatibilityRefused,
    Discretization,
    DomainOverflow,
    EnergyLedger,
    Equation,
    EvolveResult,
    HyperbolicityLoss,
    InitialData,
    Snapshot,
    StepRejected,
    WaveguideState,
    evolve,
    find_blowup,
    initial_state,
    reference_grid,
    step_physical,
)
from .snapshots import read_snapshots, write_snapshots
