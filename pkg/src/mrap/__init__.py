"""Multiple-receiver adiabatic passage on a tunnel-coupled site chain."""

from .dynamics import (
    ConvergenceError,
    TrackingError,
    adiabaticity_metric,
    energy_gap_analytic,
    evolve_density,
    evolve_state,
    fidelity,
    null_space_analytic,
    site_state,
    spectrum_scan,
)
from .model import (
    ALICE,
    ChainTopology,
    PulseSchedule,
    SiteEnergies,
    SiteId,
    build_hamiltonian,
    build_topology,
    pulse_value,
    schedule_at,
)
from .protocols import ProtocolSpec, ideal_target, run_protocol, run_reverse, run_transfer, sweep

__version__ = "0.1.0"
