"""Step-dependent-coin quantum walks: bands, chiral topology and simulation."""

from .bloch import (
    BlochDecomposition,
    bloch_vector,
    chiral_axis,
    chiral_operator,
    coin_unitary,
    effective_hamiltonian,
    hamiltonian_log_oracle,
    quasi_energy,
    shift_unitary,
    step_unitary,
    sublattice_projectors,
)
from .errors import (
    DegeneratePoint,
    InvalidConfig,
    NonIntegerWinding,
    NormalizationError,
    StepOrderError,
)
from .topology import (
    GaplessPoint,
    PhaseDiagram,
    PhaseRegion,
    flat_band_angles,
    gapless_angles,
    group_velocity,
    l_analytic,
    l_quadrature,
    phase_diagram,
    transition_points,
    winding_integral,
    winding_rule,
)
from .walk import (
    InitialCoinSpec,
    MomentReport,
    WalkerState,
    distribution,
    evolve_step,
    m2_scan,
    make_initial,
    moment,
    run_walk,
)

__version__ = "0.1.0"
