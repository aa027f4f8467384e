"""Driven circuit-QED simulator for the synthesized ultra-strong-coupling Rabi model."""

from .device import DeviceParams, DriveTone, EffectiveParams
from .hamiltonians import (
    TimeDependentHamiltonian,
    displaced_effective,
    driven_lab_hamiltonian,
    effective_with_parasitic,
    frame_residual,
    jaynes_cummings,
    qubit_mode_layout,
    rabi_hamiltonian,
    rotating_frame_analytic,
)
from .hilbert import (
    HilbertLayout,
    Operator,
    QuantumState,
    TruncationWarning,
    basis_state,
    coherent_state,
    displacement,
    embed,
    fock_ladder,
    pauli_set,
    tensor,
)
from .lindblad import (
    CollapseChannel,
    IntegrationError,
    TimeGrid,
    TimeSeries,
    Tolerances,
    evolve,
    expectation,
    lindblad_rhs,
    standard_channels,
)
from .transmon import TransmonLevels, transmon_charge_diagonalize, transversal_coupling_operator

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
