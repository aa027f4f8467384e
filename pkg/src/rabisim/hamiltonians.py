"""Builders for the driven, rotating-frame, effective and displaced Hamiltonians.

The laboratory-frame system is a Jaynes-Cummings qubit-mode pair with up
to two transversal drive tones on the qubit (plus optional parasitic
mode drive and readout resonator).  The frame rotating with the dominant
tone omega_1 is reached through U = exp{i omega_1 t (b^dag b + sigma_z/2)};
after dropping the 2 omega_1 terms the transformed Hamiltonian is

    H_rot = (eps - w1)/2 sz + (w - w1) n + g(s- b^dag + s+ b)
            + (eta1/2)(sx cos phi1 + sy sin phi1)
            + (eta2/2)[sx cos((w1-w2)t - phi2) - sy sin((w1-w2)t - phi2)],

whose time average in the eta1 interaction picture is the quantum Rabi
model with omega_eff = w - w1, epsilon_eff = eta2, g_eff = g/2.  The
counter-rotating pieces are retained behind ``rwa=False`` so the frame
identity can be checked exactly and the approximation error measured.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .device import DeviceParams, DriveTone, EffectiveParams
from .hilbert import HilbertLayout, Operator, embed, fock_ladder, pauli_set
from .transmon import TransmonLevels, transmon_charge_diagonalize, transversal_coupling_operator

TWOPI = 2.0 * math.pi

__all__ = [
    "TimeDependentHamiltonian",
    "qubit_mode_layout",
    "qubit_operators",
    "rabi_hamiltonian",
    "jaynes_cummings",
    "driven_lab_hamiltonian",
    "rotating_frame_analytic",
    "frame_residual",
    "effective_with_parasitic",
    "displaced_effective",
]


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """H(t) = static + sum_i f_i(t) A_i with real scalar f_i and Hermitian A_i."""

    static: Operator
    terms: tuple[tuple[Operator, Callable[[float], float]], ...] = ()
    carrier_frequencies: tuple[float, ...] = ()  # Hz, for step-size control

    def __post_init__(self):
        for op, _ in self.terms:
            if op.layout != self.static.layout:
                raise ValueError("all term operators must share the static layout")

    @property
    def layout(self) -> HilbertLayout:
        return self.static.layout

    @property
    def is_static(self) -> bool:
        return not self.terms

    def matrix_at(self, t: float) -> np.ndarray:
        m = self.static.matrix
        if self.terms:
            m = m.copy()
            for op, f in self.terms:
                m += f(t) * op.matrix
        return m

    def operator_at(self, t: float) -> Operator:
        return Operator(self.layout, self.matrix_at(t))

    def max_frequency(self) -> float:
        """Fastest drive or transition frequency present, in Hz.

        Transition scale = eigenvalue spread of the static part, padded
        by the worst-case norm of the time-dependent terms.
        """
        ev = np.linalg.eigvalsh(self.static.matrix)
        spread = float(ev[-1] - ev[0])
        for op, _ in self.terms:
            spread += 2.0 * op.norm()
        freqs = [spread / TWOPI, *self.carrier_frequencies]
        return max(freqs)

    @classmethod
    def static_only(cls, op: Operator) -> "TimeDependentHamiltonian":
        return cls(static=op)


# ---------------------------------------------------------------------------
# layouts and local operators


def qubit_mode_layout(qubit_levels: int = 2, fock_dim: int = 26) -> HilbertLayout:
    return HilbertLayout.of(("qubit", qubit_levels), ("mode", fock_dim))


def _split_ladder(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lowering/raising parts of a transversal coupling matrix.

    With ground-first ordering |i><j| for i<j lowers, so the lowering
    part is the upper triangle.
    """
    lower = np.triu(x, 1)
    return lower, lower.conj().T


def qubit_operators(levels: int, transmon: TransmonLevels | None = None) -> dict[str, Operator]:
    """Local qubit operators: x, lowering/raising parts, number, sz-equivalent.

    For 3 transmon levels the transversal operator carries the charge
    matrix-element ratios; ``minus``/``plus`` restrict to the
    nearest-neighbor ladder (the parts kept by excitation-preserving
    couplings).
    """
    if levels == 2:
        sx, sy, sz, sp, sm = pauli_set()
        lay = sx.layout
        nq = Operator(lay, np.diag([0.0, 1.0]).astype(complex))
        return {"x": sx, "y": sy, "z": sz, "plus": sp, "minus": sm, "number": nq}
    if levels == 3:
        tl = transmon if transmon is not None else transmon_charge_diagonalize(level_count=3)
        x = transversal_coupling_operator(tl)
        lay = x.layout
        full_minus, full_plus = _split_ladder(x.matrix)
        nn = np.diag(np.diag(full_minus, 1), 1)  # nearest-neighbor ladder only
        sy = 1j * (nn - nn.conj().T)
        return {
            "x": x,
            "y": Operator(lay, sy),
            "z": Operator(lay, np.diag([-1.0, 1.0, 3.0]).astype(complex)),
            "minus": Operator(lay, nn),
            "plus": Operator(lay, nn.conj().T),
            "minus_full": Operator(lay, full_minus),
            "plus_full": Operator(lay, full_plus),
            "number": Operator(lay, np.diag([0.0, 1.0, 2.0]).astype(complex)),
        }
    raise ValueError(f"unsupported qubit level count {levels}")


def _qubit_energies(levels: int, epsilon: float, anharmonicity: float) -> np.ndarray:
    """Bare qubit energies; two levels reproduce (eps/2) sigma_z exactly."""
    if levels == 2:
        return np.array([-epsilon / 2, epsilon / 2])
    return np.array([-epsilon / 2, epsilon / 2, 1.5 * epsilon + anharmonicity])


# ---------------------------------------------------------------------------
# static builders


def rabi_hamiltonian(eff: EffectiveParams, layout: HilbertLayout) -> Operator:
    """(eta2/2)(sz/2) + w_eff n + (g/2) sx (b^dag + b) on (qubit:2, mode)."""
    if layout.labels != ("qubit", "mode") or layout.dimension_of("qubit") != 2:
        raise ValueError("rabi_hamiltonian expects a (qubit:2, mode) layout")
    d = layout.dimension_of("mode")
    sx, _, sz, _, _ = pauli_set()
    b, bdag = fock_ladder(d)
    h = (
        (eff.epsilon_eff / 2.0) * embed(sz, "qubit", layout).matrix / 2.0
        + eff.omega_eff * embed(bdag @ b, "mode", layout).matrix
        + (eff.g / 2.0) * (embed(sx, "qubit", layout).matrix @ embed(bdag + b, "mode", layout).matrix)
    )
    return Operator(layout, h)


def jaynes_cummings(epsilon: float, omega: float, g: float, layout: HilbertLayout) -> Operator:
    """(eps/2) sz + w n + g (s- b^dag + s+ b); conserves the excitation number."""
    if len(layout.subsystems) != 2 or layout.dimension_of(layout.labels[0]) != 2:
        raise ValueError("jaynes_cummings expects a (qubit:2, mode) layout")
    qlbl, mlbl = layout.labels
    _, _, sz, sp, sm = pauli_set(qlbl)
    b, bdag = fock_ladder(layout.dimension_of(mlbl))
    sz_f = embed(sz, qlbl, layout).matrix
    sm_f = embed(sm, qlbl, layout).matrix
    sp_f = embed(sp, qlbl, layout).matrix
    b_f = embed(b, mlbl, layout).matrix
    bd_f = embed(bdag, mlbl, layout).matrix
    h = (epsilon / 2.0) * sz_f + omega * (bd_f @ b_f) + g * (sm_f @ bd_f + sp_f @ b_f)
    return Operator(layout, h)


def effective_with_parasitic(eff: EffectiveParams, eta_r: float, layout: HilbertLayout) -> Operator:
    """Effective Rabi Hamiltonian plus the rotating-frame parasitic drive."""
    h = rabi_hamiltonian(eff, layout)
    b, bdag = fock_ladder(layout.dimension_of("mode"))
    drive = (eta_r / 2.0) * embed(bdag + b, "mode", layout).matrix
    return Operator(layout, h.matrix + drive)


def displaced_effective(
    eff: EffectiveParams,
    eta_r: float,
    layout: HilbertLayout,
    include_offset: bool = True,
) -> Operator:
    """Parasitic-drive Hamiltonian after the displacement D(-eta_r/(2 w_eff)).

    (eta2/2)(sz/2) - (g eta_r / (2 w_eff)) sx + w_eff n + (g/2) sx (b^dag+b).
    With ``include_offset`` the scalar -eta_r^2/(4 w_eff) is kept so the
    spectrum equals that of ``effective_with_parasitic`` exactly; dropping
    it recovers the textbook display form.
    """
    if eff.omega_eff == 0:
        raise ZeroDivisionError("displacement is singular at omega_eff = 0")
    h = rabi_hamiltonian(eff, layout).matrix.copy()
    sx, _, _, _, _ = pauli_set()
    tunneling = eff.g * eta_r / (2.0 * eff.omega_eff)
    h -= tunneling * embed(sx, "qubit", layout).matrix
    if include_offset:
        h -= (eta_r**2 / (4.0 * eff.omega_eff)) * np.eye(layout.dim)
    return Operator(layout, h)


# ---------------------------------------------------------------------------
# driven builders


def _cos_at(amp: float, omega: float, phase: float) -> Callable[[float], float]:
    def f(t: float) -> float:
        return amp * math.cos(omega * t + phase)

    return f


def _sin_at(amp: float, omega: float, phase: float) -> Callable[[float], float]:
    def f(t: float) -> float:
        return amp * math.sin(omega * t + phase)

    return f


def driven_lab_hamiltonian(
    params: DeviceParams,
    drives: Sequence[DriveTone],
    parasitic: bool = False,
    readout: bool = False,
    transmon: TransmonLevels | None = None,
    coupling: str = "jc",
) -> TimeDependentHamiltonian:
    """Laboratory-frame Jaynes-Cummings system with the drive tones applied.

    Static part: qubit + mode (+ readout resonator with the g_r and f
    exchange couplings); time-dependent terms X eta_i cos(w_i t + phi_i)
    for each tone, plus eta_r (b^dag + b) cos(w_1 t) when ``parasitic``.
    ``coupling`` selects the excitation-preserving ``"jc"`` form (valid
    on chip where g << omega) or the ``"full"`` transversal form
    g X (b^dag + b).
    """
    if len(drives) > 2:
        raise ValueError("at most two Rabi tones are supported")
    if parasitic and not drives:
        raise ValueError("parasitic drive needs the dominant tone frequency")
    if coupling not in ("jc", "full"):
        raise ValueError(f"unknown coupling form {coupling!r}")

    subs = [("qubit", params.qubit_levels), ("mode", params.fock_dim)]
    if readout:
        subs.append(("readout", params.readout_dim))
        if params.f == 0 and params.g_r == 0:
            warnings.warn("readout resonator included but f = g_r = 0", stacklevel=2)
    layout = HilbertLayout.of(*subs)

    q = qubit_operators(params.qubit_levels, transmon)
    b, bdag = fock_ladder(params.fock_dim)
    hq = embed(Operator(q["x"].layout, np.diag(_qubit_energies(params.qubit_levels, params.epsilon, params.anharmonicity)).astype(complex)), "qubit", layout).matrix
    n_mode = embed(bdag @ b, "mode", layout).matrix
    minus = q.get("minus_full", q["minus"])
    plus = q.get("plus_full", q["plus"])
    sm_f = embed(minus, "qubit", layout).matrix
    sp_f = embed(plus, "qubit", layout).matrix
    b_f = embed(b, "mode", layout).matrix
    bd_f = embed(bdag, "mode", layout).matrix

    if coupling == "jc":
        static = hq + params.omega * n_mode + params.g * (sm_f @ bd_f + sp_f @ b_f)
    else:
        static = hq + params.omega * n_mode + params.g * ((sm_f + sp_f) @ (bd_f + b_f))
    if readout:
        a, adag = fock_ladder(params.readout_dim)
        a_f = embed(Operator(a.layout, a.matrix), "readout", layout).matrix
        ad_f = embed(Operator(a.layout, adag.matrix), "readout", layout).matrix
        static = static + params.omega_r * (ad_f @ a_f)
        static = static + params.g_r * (sm_f @ ad_f + sp_f @ a_f)
        static = static + params.f * (a_f @ bd_f + ad_f @ b_f)

    x_f = Operator(layout, embed(q["x"], "qubit", layout).matrix)
    terms = []
    carriers = []
    for tone in drives:
        terms.append((x_f, _cos_at(tone.amplitude, tone.frequency, tone.phase)))
        carriers.append(tone.frequency / TWOPI)
    if parasitic:
        quad = Operator(layout, bd_f + b_f)
        w1 = drives[0].frequency
        terms.append((quad, _cos_at(params.eta_r, w1, 0.0)))
        carriers.append(w1 / TWOPI)

    return TimeDependentHamiltonian(
        static=Operator(layout, static),
        terms=tuple(terms),
        carrier_frequencies=tuple(carriers),
    )


def rotating_frame_analytic(
    params: DeviceParams,
    drives: Sequence[DriveTone],
    rwa: bool = True,
    parasitic: bool = False,
    transmon: TransmonLevels | None = None,
    coupling: str = "jc",
) -> TimeDependentHamiltonian:
    """Closed form of the Hamiltonian in the frame rotating with drives[0].

    With ``rwa=True`` (default) the 2 omega_1 terms are dropped; with
    ``rwa=False`` they are retained so the transformation identity is
    exact (two-level only).  The static part is identical for both
    ``coupling`` forms; the ``"full"`` transversal coupling additionally
    contributes a counter-rotating sideband g(s+ b^dag e^{2i w1 t} + h.c.).
    """
    if not drives:
        raise ValueError("rotating frame needs the dominant drive tone")
    if len(drives) > 2:
        raise ValueError("at most two Rabi tones are supported")
    if not rwa and params.qubit_levels != 2:
        raise ValueError("counter-rotating terms are implemented for 2-level qubits only")
    if coupling not in ("jc", "full"):
        raise ValueError(f"unknown coupling form {coupling!r}")

    w1, eta1, phi1 = drives[0].frequency, drives[0].amplitude, drives[0].phase
    layout = qubit_mode_layout(params.qubit_levels, params.fock_dim)
    q = qubit_operators(params.qubit_levels, transmon)
    b, bdag = fock_ladder(params.fock_dim)

    energies = _qubit_energies(params.qubit_levels, params.epsilon, params.anharmonicity)
    # frame generator uses n_q - 1/2 (= sz/2 on two levels), matching
    # U = exp{i w1 t (b^dag b + sz/2)} with no constant offset
    shifted = energies - w1 * (np.arange(params.qubit_levels) - 0.5)
    hq = embed(Operator(q["x"].layout, np.diag(shifted).astype(complex)), "qubit", layout).matrix
    n_mode = embed(bdag @ b, "mode", layout).matrix
    sm_f = embed(q["minus"], "qubit", layout).matrix
    sp_f = embed(q["plus"], "qubit", layout).matrix
    b_f = embed(b, "mode", layout).matrix
    bd_f = embed(bdag, "mode", layout).matrix

    # Hermitian quadrature pair of the raising operator: R e^{i th} + h.c.
    # = (R + R^dag) cos th + i(R - R^dag) sin th
    xq = sp_f + sm_f
    yq = 1j * (sp_f - sm_f)

    static = hq + (params.omega - w1) * n_mode + params.g * (sm_f @ bd_f + sp_f @ b_f)
    static = static + (eta1 / 2.0) * (math.cos(phi1) * xq - math.sin(phi1) * yq)
    if parasitic:
        static = static + (params.eta_r / 2.0) * (bd_f + b_f)

    terms: list[tuple[Operator, Callable[[float], float]]] = []
    carriers: list[float] = []
    x_op = Operator(layout, xq)
    y_op = Operator(layout, yq)

    if len(drives) == 2 and drives[1].amplitude > 0:
        eta2, w2, phi2 = drives[1].amplitude, drives[1].frequency, drives[1].phase
        delta = w1 - w2
        terms.append((x_op, _cos_at(eta2 / 2.0, delta, -phi2)))
        terms.append((y_op, _sin_at(eta2 / 2.0, delta, -phi2)))
        carriers.append(abs(delta) / TWOPI)

    if not rwa:
        for tone in drives:
            w_fast = w1 + tone.frequency
            terms.append((x_op, _cos_at(tone.amplitude / 2.0, w_fast, tone.phase)))
            terms.append((y_op, _sin_at(tone.amplitude / 2.0, w_fast, tone.phase)))
            carriers.append(w_fast / TWOPI)
        if coupling == "full":
            k = sp_f @ bd_f
            kx = Operator(layout, k + k.conj().T)
            ky = Operator(layout, 1j * (k - k.conj().T))
            terms.append((kx, _cos_at(params.g, 2 * w1, 0.0)))
            terms.append((ky, _sin_at(params.g, 2 * w1, 0.0)))
        if parasitic:
            qx = Operator(layout, bd_f + b_f)
            qy = Operator(layout, 1j * (bd_f - b_f))
            terms.append((qx, _cos_at(params.eta_r / 2.0, 2 * w1, 0.0)))
            terms.append((qy, _sin_at(params.eta_r / 2.0, 2 * w1, 0.0)))
        carriers.append(2 * w1 / TWOPI)

    return TimeDependentHamiltonian(
        static=Operator(layout, static),
        terms=tuple(terms),
        carrier_frequencies=tuple(carriers),
    )


def frame_residual(
    h_lab: TimeDependentHamiltonian,
    h_rot: TimeDependentHamiltonian,
    omega_1: float,
    t_samples: Sequence[float],
) -> float:
    """max_t || U H_lab U^dag - i U dU^dag/dt - H_rot(t) || (spectral norm).

    U = exp{i w1 t (b^dag b + sz/2)} is diagonal in the product basis, so
    -i U dU^dag/dt = -w1 (b^dag b + sz/2) exactly.
    """
    layout = h_lab.layout
    if layout != h_rot.layout:
        raise ValueError("lab and rotating Hamiltonians live on different layouts")
    if layout.dimension_of("qubit") != 2:
        raise ValueError("frame residual is defined for the 2-level qubit frame")
    _, _, sz, _, _ = pauli_set()
    b, bdag = fock_ladder(layout.dimension_of("mode"))
    gen = embed(bdag @ b, "mode", layout).matrix + 0.5 * embed(sz, "qubit", layout).matrix
    gdiag = np.real(np.diag(gen))

    worst = 0.0
    for t in t_samples:
        phases = np.exp(1j * omega_1 * t * gdiag)
        hl = h_lab.matrix_at(t)
        transformed = (phases[:, None] * hl) * phases.conj()[None, :]
        res = transformed - omega_1 * np.diag(gdiag) - h_rot.matrix_at(t)
        worst = max(worst, float(np.linalg.norm(res, 2)))
    return worst
