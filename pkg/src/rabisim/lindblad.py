"""Open-system time evolution under a time-dependent Lindblad master equation.

Pure states without dissipation follow the Schrodinger equation; any
collapse channel promotes the state to a density matrix evolving under

    drho/dt = -i[H(t), rho] + sum_j r_j (L_j rho L_j^dag - {L_j^dag L_j, rho}/2).

Integration uses an embedded Runge-Kutta 4(5) pair with the step size
capped at 1/(40 f_max), f_max being the fastest drive or transition
frequency in the Hamiltonian.  Trace and Hermiticity drift are monitored
on the sample grid and recorded in the result metadata; drift beyond
1e-6 aborts the run.  Dissipation rates are applied unchanged in
whatever frame the Hamiltonian is given in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .device import DeviceParams
from .hamiltonians import TimeDependentHamiltonian, qubit_operators
from .hilbert import HilbertLayout, Operator, QuantumState, embed, fock_ladder

__all__ = [
    "CollapseChannel",
    "TimeGrid",
    "TimeSeries",
    "Tolerances",
    "IntegrationError",
    "standard_channels",
    "lindblad_rhs",
    "evolve",
    "expectation",
    "expectation_real",
]

DRIFT_LIMIT = 1e-6
STEP_FRACTION = 40.0


class IntegrationError(RuntimeError):
    """Integration failed or an invariant drifted beyond tolerance."""


@dataclass(frozen=True)
class Tolerances:
    rtol: float = 1e-8
    atol: float = 1e-10


@dataclass(frozen=True)
class CollapseChannel:
    """Dissipator with effective Lindblad operator sqrt(rate) * operator."""

    operator: Operator
    rate: float
    label: str = ""

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"collapse rate must be >= 0 ({self.label})")


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    sample_count: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.sample_count < 2:
            raise ValueError("need at least two samples")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.sample_count)

    @classmethod
    def to(cls, t_end: float, sample_count: int) -> "TimeGrid":
        return cls(0.0, t_end, sample_count)


@dataclass
class TimeSeries:
    """Sampled time grid plus named observable traces.

    Trace names starting with ``P_`` are populations (clipped-range
    checked); names starting with ``n_`` are occupation numbers.
    """

    times: np.ndarray
    traces: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        for name, tr in self.traces.items():
            tr = np.asarray(tr, dtype=float)
            if tr.shape != self.times.shape:
                raise ValueError(f"trace {name!r} length != sample count")
            if name.startswith("P_") and (tr.min() < -1e-6 or tr.max() > 1 + 1e-6):
                raise ValueError(f"population trace {name!r} leaves [0, 1]")
            if name.startswith("n_") and tr.min() < -1e-6:
                raise ValueError(f"occupation trace {name!r} is negative")
            self.traces[name] = tr

    def trace(self, name: str) -> np.ndarray:
        return self.traces[name]


def standard_channels(params: DeviceParams, layout: HilbertLayout) -> list[CollapseChannel]:
    """Qubit decay, qubit pure dephasing, and mode decay channels.

    Rates: 1/T1 on the qubit lowering operator, gamma_phi/2 on sigma_z
    (gamma_phi = 1/T2 - 1/(2 T1)), kappa on the mode annihilation.  The
    3-level lowering operator is weighted by the transmon coupling
    ratios; the dephasing operator generalizes to 2 n_q - 1.
    """
    q = qubit_operators(layout.dimension_of("qubit"))
    b, _ = fock_ladder(layout.dimension_of("mode"))
    lower = q.get("minus_full", q["minus"])
    channels = [
        CollapseChannel(embed(lower, "qubit", layout), 1.0 / params.t1, "qubit decay"),
        CollapseChannel(embed(q["z"], "qubit", layout), params.gamma_phi / 2.0, "qubit dephasing"),
        CollapseChannel(embed(b, "mode", layout), params.kappa, "mode decay"),
    ]
    return channels


def lindblad_rhs(h_matrix: np.ndarray, rho: np.ndarray, channels: Sequence[CollapseChannel]) -> np.ndarray:
    """Right-hand side of the master equation for one instant."""
    out = -1j * (h_matrix @ rho - rho @ h_matrix)
    for ch in channels:
        l = ch.operator.matrix
        ld = l.conj().T
        ldl = ld @ l
        out += ch.rate * (l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def expectation(op: Operator, state: QuantumState) -> complex:
    """<psi|A|psi> or Tr(A rho)."""
    if op.layout != state.layout:
        raise ValueError("operator and state layouts differ")
    if state.pure:
        return complex(state.array.conj() @ (op.matrix @ state.array))
    return complex(np.trace(op.matrix @ state.array))


def expectation_real(op: Operator, state: QuantumState, imag_tol: float = 1e-10) -> float:
    """Real expectation of a Hermitian observable; asserts the residue."""
    val = expectation(op, state)
    scale = max(abs(val), 1.0)
    if abs(val.imag) > imag_tol * scale:
        raise ValueError(f"imaginary residue {val.imag} for Hermitian expectation")
    return val.real


def _single_band(m: np.ndarray) -> int | None:
    """Diagonal offset when the matrix has one nonzero diagonal, else None."""
    rows, cols = np.nonzero(m)
    if len(rows) == 0:
        return 0
    offsets = cols - rows
    if np.all(offsets == offsets[0]):
        return int(offsets[0])
    return None


def _prepare_channels(channels: Sequence[CollapseChannel], d: int):
    """Split dissipators into banded fast-path terms and a dense fallback.

    The standard channels (mode decay, qubit lowering, dephasing) are all
    single-band in the product basis, for which L rho L^dag is a scaled
    shifted submatrix and L^dag L is diagonal: O(d^2) per evaluation
    instead of dense matrix products.
    """
    band_ops = []
    dense = []
    m_diag = np.zeros(d)
    m_dense = np.zeros((d, d), dtype=complex)
    for ch in channels:
        l = math.sqrt(ch.rate) * ch.operator.matrix
        k = _single_band(l)
        if k is None:
            dense.append(l)
            m_dense += l.conj().T @ l
            continue
        v = np.diagonal(l, offset=k).copy()
        w = np.multiply.outer(v, v.conj())
        if k >= 0:
            sl_o, sl_i = slice(0, d - k), slice(k, d)
            m_diag[k:] += np.abs(v) ** 2
        else:
            sl_o, sl_i = slice(-k, d), slice(0, d + k)
            m_diag[: d + k] += np.abs(v) ** 2
        band_ops.append((sl_o, sl_i, w))
    dense_ls = np.array(dense) if dense else None
    if dense_ls is not None and np.max(np.abs(m_dense - np.diag(np.diag(m_dense)))) == 0:
        m_diag = m_diag + np.real(np.diag(m_dense))
        m_offdiag = None
    elif dense_ls is not None:
        m_offdiag = m_dense
    else:
        m_offdiag = None
    return band_ops, dense_ls, 0.5 * m_diag, m_offdiag


def _hamiltonian_eval(h: TimeDependentHamiltonian):
    static = h.static.matrix
    terms = [(op.matrix, f) for op, f in h.terms]
    if not terms:
        return lambda t: static

    def at(t: float) -> np.ndarray:
        m = static.copy()
        for a, f in terms:
            m += f(t) * a
        return m

    return at


def evolve(
    h: TimeDependentHamiltonian,
    initial: QuantumState,
    channels: Sequence[CollapseChannel],
    grid: TimeGrid,
    observables: Mapping[str, Operator],
    tolerances: Tolerances | None = None,
    max_step: float | None = None,
) -> TimeSeries:
    """Integrate the state over the grid and sample the named observables."""
    if initial.layout != h.layout:
        raise ValueError("initial state layout differs from Hamiltonian layout")
    for name, op in observables.items():
        if op.layout != h.layout:
            raise ValueError(f"observable {name!r} layout differs from Hamiltonian layout")
    tol = tolerances or Tolerances()
    d = h.layout.dim
    times = grid.times
    h_at = _hamiltonian_eval(h)

    f_max = h.max_frequency()
    cap = 1.0 / (STEP_FRACTION * f_max) if f_max > 0 else np.inf
    if max_step is not None:
        cap = min(cap, max_step)

    schrodinger = initial.pure and not channels
    if schrodinger:
        y0 = initial.array.astype(complex)

        def rhs(t, y):
            return -1j * (h_at(t) @ y)

    else:
        rho0 = initial.density()
        y0 = rho0.ravel().astype(complex)
        band_ops, dense_ls, half_m, m_offdiag = _prepare_channels(channels, d)

        def rhs(t, y):
            rho = y.reshape(d, d)
            hm = h_at(t)
            out = hm @ rho
            out -= rho @ hm
            out *= -1j
            for sl_o, sl_i, w in band_ops:
                out[sl_o, sl_o] += w * rho[sl_i, sl_i]
            if dense_ls is not None:
                out += (dense_ls @ rho @ dense_ls.conj().transpose(0, 2, 1)).sum(axis=0)
            if m_offdiag is not None:
                out -= 0.5 * (m_offdiag @ rho + rho @ m_offdiag)
            out -= half_m[:, None] * rho
            out -= rho * half_m[None, :]
            return out.ravel()

    sol = solve_ivp(
        rhs,
        (times[0], times[-1]),
        y0,
        method="RK45",
        t_eval=times,
        rtol=tol.rtol,
        atol=tol.atol,
        max_step=cap,
    )
    if not sol.success:
        raise IntegrationError(f"integration failed: {sol.message}")

    meta = {
        "rtol": tol.rtol,
        "atol": tol.atol,
        "max_step": cap,
        "schrodinger": schrodinger,
        "nfev": int(sol.nfev),
    }
    traces: dict[str, np.ndarray] = {}
    if schrodinger:
        psis = sol.y.T  # (n, d)
        norms = np.linalg.norm(psis, axis=1)
        meta["norm_drift"] = float(np.max(np.abs(norms - 1.0)))
        if meta["norm_drift"] > DRIFT_LIMIT:
            raise IntegrationError(f"norm drift {meta['norm_drift']:.2e} beyond {DRIFT_LIMIT}")
        for name, op in observables.items():
            vals = np.einsum("ti,ij,tj->t", psis.conj(), op.matrix, psis)
            traces[name] = _real_trace(name, vals)
    else:
        states = sol.y  # (d*d, n)
        diag_idx = np.arange(d) * d + np.arange(d)
        trace_vals = states[diag_idx, :].sum(axis=0)
        meta["trace_drift"] = float(np.max(np.abs(trace_vals - 1.0)))
        herm = 0.0
        mineig = np.inf
        check_idx = np.unique(np.linspace(0, states.shape[1] - 1, 10).astype(int))
        for i in check_idx:
            rho = states[:, i].reshape(d, d)
            herm = max(herm, float(np.max(np.abs(rho - rho.conj().T))))
            mineig = min(mineig, float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2))))
        meta["hermiticity_drift"] = herm
        meta["min_eigenvalue"] = mineig
        if meta["trace_drift"] > DRIFT_LIMIT or herm > DRIFT_LIMIT:
            raise IntegrationError(
                f"invariant drift beyond {DRIFT_LIMIT}: trace {meta['trace_drift']:.2e}, "
                f"hermiticity {herm:.2e}"
            )
        for name, op in observables.items():
            vals = op.matrix.T.ravel() @ states  # Tr(O rho) per column
            traces[name] = _real_trace(name, vals)

    return TimeSeries(times=times.copy(), traces=traces, metadata=meta)


def _real_trace(name: str, vals: np.ndarray) -> np.ndarray:
    out = np.real(vals)
    if name.startswith("P_"):
        out = np.clip(out, -1e-6, 1 + 1e-6)
    if name.startswith("n_"):
        out = np.where((out < 0) & (out > -1e-6), 0.0, out)
    return out
