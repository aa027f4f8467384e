"""Transmon charge-basis diagonalization and the transversal coupling operator.

The transmon is diagonalized in the Cooper-pair charge basis
|n>, n in [-cutoff, cutoff]:

    H = 4 E_C (n - n_g)^2 - (E_J / 2) sum_n (|n><n+1| + h.c.)

Energies are handled as E/h in GHz; returned transition frequencies are
angular (rad/s).  Coupling matrix elements are those of the charge
operator in the energy eigenbasis, normalized to the 0-1 element, with
eigenvector phases fixed so nearest-neighbor elements are positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import HilbertLayout, Operator

__all__ = ["TransmonLevels", "transmon_charge_diagonalize", "transversal_coupling_operator"]

TWOPI = 2.0 * np.pi

# Paper operating point: E_C/h = 0.31 GHz, E_J/E_C = 50, n_g = 0.
DEFAULT_EC_GHZ = 0.31
DEFAULT_EJ_GHZ = 50.0 * DEFAULT_EC_GHZ
DEFAULT_CHARGE_CUTOFF = 30


@dataclass(frozen=True)
class TransmonLevels:
    """Diagonalized transmon: energies, transition frequencies, coupling ratios."""

    e_j_ghz: float
    e_c_ghz: float
    n_g: float
    level_count: int
    energies_ghz: np.ndarray = field(repr=False)  # eigenvalues E/h, offset so E_0 = 0
    omega_01: float  # rad/s
    omega_12: float  # rad/s
    anharmonicity: float  # rad/s, omega_12 - omega_01
    coupling_ratios: np.ndarray = field(repr=False)  # <i|n|j> / <0|n|1>

    def __post_init__(self):
        e = np.asarray(self.energies_ghz, dtype=float)
        r = np.asarray(self.coupling_ratios, dtype=float)
        e.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "energies_ghz", e)
        object.__setattr__(self, "coupling_ratios", r)


def transmon_charge_diagonalize(
    e_j_ghz: float = DEFAULT_EJ_GHZ,
    e_c_ghz: float = DEFAULT_EC_GHZ,
    n_g: float = 0.0,
    charge_cutoff: int = DEFAULT_CHARGE_CUTOFF,
    level_count: int = 3,
) -> TransmonLevels:
    if charge_cutoff < 10:
        raise ValueError(f"charge_cutoff must be >= 10, got {charge_cutoff}")
    basis_size = 2 * charge_cutoff + 1
    if not 2 <= level_count <= basis_size - 2:
        raise ValueError(f"level_count {level_count} exceeds usable basis size")

    n = np.arange(-charge_cutoff, charge_cutoff + 1, dtype=float)
    h = np.diag(4.0 * e_c_ghz * (n - n_g) ** 2)
    off = -0.5 * e_j_ghz * np.ones(basis_size - 1)
    h += np.diag(off, 1) + np.diag(off, -1)

    evals, evecs = np.linalg.eigh(h)
    if not np.all(np.isfinite(evals)):
        raise ArithmeticError("charge-basis eigensolve did not converge")

    # charge operator in the energy eigenbasis, phases fixed so <i|n|i+1> > 0
    n_op = np.diag(n)
    for i in range(level_count):
        overlap = evecs[:, i] @ n_op @ evecs[:, i + 1]
        if overlap < 0:
            evecs[:, i + 1] *= -1.0
    n_energy = evecs[:, :level_count].T @ n_op @ evecs[:, :level_count]

    g01 = n_energy[0, 1]
    ratios = n_energy / g01
    ratios = 0.5 * (ratios + ratios.T)  # symmetrize away eigensolver noise

    energies = evals[:level_count] - evals[0]
    w01 = TWOPI * 1e9 * (evals[1] - evals[0])
    w12 = TWOPI * 1e9 * (evals[2] - evals[1])
    return TransmonLevels(
        e_j_ghz=e_j_ghz,
        e_c_ghz=e_c_ghz,
        n_g=n_g,
        level_count=level_count,
        energies_ghz=energies,
        omega_01=w01,
        omega_12=w12,
        anharmonicity=w12 - w01,
        coupling_ratios=ratios,
    )


def transversal_coupling_operator(levels: TransmonLevels, label: str = "qubit") -> Operator:
    """Hermitian drive/coupling operator sum_ij (g_ij/g_01)|i><j|.

    Reduces to sigma_x on two levels; at the harmonic limit the
    nearest-neighbor entries follow the sqrt(n) ladder.
    """
    layout = HilbertLayout.of((label, levels.level_count))
    return Operator(layout, levels.coupling_ratios.astype(complex))
