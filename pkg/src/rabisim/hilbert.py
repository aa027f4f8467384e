"""Composite Hilbert-space operator algebra on dense matrices.

Conventions used throughout the package:

* Subsystem bases are ordered ground-first.  For a two-level qubit the
  basis is (|g>, |e>), so ``sigma_z = diag(-1, +1)`` (sigma_z|g> = -|g>,
  sigma_z|e> = +|e>) and the qubit term ``(eps/2) sigma_z`` puts the
  ground state at energy -eps/2.
* ``sigma_plus = |e><g|`` raises, ``sigma_minus = |g><e|`` lowers, and
  ``sigma_pm = (sigma_x +- i sigma_y)/2``.
* Bosonic annihilation ``b|n> = sqrt(n)|n-1>`` on a Fock space truncated
  at dimension d (occupations 0..d-1); the top level is clipped, which
  confines ladder-algebra violations to the last row/column.

Everything is dense: the largest composite space in scope is a few
hundred dimensions, where dense linear algebra beats sparse bookkeeping.
All objects are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "HilbertLayout",
    "Operator",
    "QuantumState",
    "TruncationWarning",
    "fock_ladder",
    "pauli_set",
    "tensor",
    "embed",
    "identity",
    "displacement",
    "coherent_state",
    "basis_state",
]

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
PURE_NORM_TOL = 1e-10
TRACE_TOL = 1e-9
MIN_EIG_SLACK = -1e-8


class TruncationWarning(UserWarning):
    """Raised (warn-level) when an amplitude strains the Fock truncation."""


@dataclass(frozen=True)
class HilbertLayout:
    """Ordered factorization of a composite Hilbert space.

    ``subsystems`` is a tuple of (label, dimension) pairs; the total
    dimension is the product of the entries, with the first subsystem
    varying slowest (Kronecker order).
    """

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(lbl), int(dim)) for lbl, dim in self.subsystems)
        object.__setattr__(self, "subsystems", subs)
        if not subs:
            raise ValueError("layout needs at least one subsystem")
        labels = [lbl for lbl, _ in subs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")
        for lbl, dim in subs:
            if dim < 1:
                raise ValueError(f"subsystem {lbl!r} has dimension {dim} < 1")

    @classmethod
    def of(cls, *subsystems: tuple[str, int]) -> "HilbertLayout":
        return cls(tuple(subsystems))

    @property
    def dim(self) -> int:
        return math.prod(d for _, d in self.subsystems)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.subsystems)

    def dimension_of(self, label: str) -> int:
        for lbl, dim in self.subsystems:
            if lbl == label:
                return dim
        raise KeyError(f"no subsystem {label!r} in layout {self.labels}")

    def index_of(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.subsystems):
            if lbl == label:
                return i
        raise KeyError(f"no subsystem {label!r} in layout {self.labels}")

    def __add__(self, other: "HilbertLayout") -> "HilbertLayout":
        return HilbertLayout(self.subsystems + other.subsystems)


def _freeze(m: np.ndarray) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=complex)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Operator:
    """Dense complex square matrix tagged with its Hilbert-space layout."""

    layout: HilbertLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        if m.shape[0] != self.layout.dim:
            raise ValueError(
                f"matrix side {m.shape[0]} != layout dimension {self.layout.dim}"
            )
        object.__setattr__(self, "matrix", _freeze(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        scale = max(np.max(np.abs(self.matrix)), 1e-300)
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol * scale

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        err = self.matrix.conj().T @ self.matrix - np.eye(self.dim)
        return np.max(np.abs(err)) <= tol

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.matrix, 2))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def _check(self, other: "Operator"):
        if self.layout != other.layout:
            raise ValueError("operators live on different layouts")

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.layout, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Operator":
        return Operator(self.layout, self.matrix / scalar)

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.matrix)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.layout, self.matrix @ other.matrix)


@dataclass(frozen=True)
class QuantumState:
    """Pure amplitude vector or density matrix over a layout."""

    layout: HilbertLayout
    array: np.ndarray = field(repr=False)
    pure: bool = True

    def __post_init__(self):
        a = np.asarray(self.array, dtype=complex)
        d = self.layout.dim
        if self.pure:
            if a.shape != (d,):
                raise ValueError(f"pure state must be a vector of length {d}")
            nrm = np.linalg.norm(a)
            if abs(nrm - 1.0) > PURE_NORM_TOL:
                raise ValueError(f"pure state norm {nrm} deviates from 1")
        else:
            if a.shape != (d, d):
                raise ValueError(f"density matrix must be {d}x{d}")
            tr = np.trace(a).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"density matrix trace {tr} deviates from 1")
            if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL * max(np.max(np.abs(a)), 1e-300):
                raise ValueError("density matrix is not Hermitian")
            if np.min(np.linalg.eigvalsh((a + a.conj().T) / 2)) < MIN_EIG_SLACK:
                raise ValueError("density matrix has a significantly negative eigenvalue")
        object.__setattr__(self, "array", _freeze(a))

    @classmethod
    def from_vector(cls, layout: HilbertLayout, vec) -> "QuantumState":
        return cls(layout, np.asarray(vec, dtype=complex), pure=True)

    @classmethod
    def from_density(cls, layout: HilbertLayout, rho) -> "QuantumState":
        return cls(layout, np.asarray(rho, dtype=complex), pure=False)

    def density(self) -> np.ndarray:
        """Density-matrix representation regardless of kind."""
        if self.pure:
            return np.outer(self.array, self.array.conj())
        return np.asarray(self.array)


# ---------------------------------------------------------------------------
# elementary operators


def fock_ladder(dimension: int) -> tuple[Operator, Operator]:
    """Annihilation/creation pair on a truncated Fock space.

    b|n> = sqrt(n)|n-1>; creation is the conjugate transpose, with the
    top level clipped by the truncation (b^dag |d-1> = 0).
    """
    if dimension < 2:
        raise ValueError(f"Fock space needs dimension >= 2, got {dimension}")
    layout = HilbertLayout.of(("mode", dimension))
    b = np.diag(np.sqrt(np.arange(1, dimension, dtype=float)), k=1)
    return Operator(layout, b), Operator(layout, b.conj().T)


def pauli_set(label: str = "qubit") -> tuple[Operator, Operator, Operator, Operator, Operator]:
    """(sigma_x, sigma_y, sigma_z, sigma_plus, sigma_minus) on a 2-level space.

    Basis ordered (|g>, |e>): sigma_z|g> = -|g>, sigma_plus|g> = |e>,
    and [sigma_x, sigma_y] = 2i sigma_z.
    """
    layout = HilbertLayout.of((label, 2))
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, 1j], [-1j, 0]], dtype=complex)
    sz = np.array([[-1, 0], [0, 1]], dtype=complex)
    sp = np.array([[0, 0], [1, 0]], dtype=complex)
    sm = sp.conj().T
    return tuple(Operator(layout, m) for m in (sx, sy, sz, sp, sm))


def identity(layout: HilbertLayout) -> Operator:
    return Operator(layout, np.eye(layout.dim))


def tensor(factors: list[Operator] | tuple[Operator, ...]) -> Operator:
    """Kronecker product in listed order; layouts concatenate."""
    if not factors:
        raise ValueError("tensor of an empty factor list is undefined")
    m = factors[0].matrix
    layout = factors[0].layout
    for f in factors[1:]:
        m = np.kron(m, f.matrix)
        layout = layout + f.layout
    return Operator(layout, m)


def embed(op: Operator, target: str, layout: HilbertLayout) -> Operator:
    """Extend a single-subsystem operator by identities on all others."""
    target_dim = layout.dimension_of(target)
    if op.dim != target_dim:
        raise ValueError(
            f"operator dimension {op.dim} != subsystem {target!r} dimension {target_dim}"
        )
    factors = []
    for lbl, dim in layout.subsystems:
        if lbl == target:
            factors.append(op.matrix)
        else:
            factors.append(np.eye(dim))
    m = factors[0]
    for f in factors[1:]:
        m = np.kron(m, f)
    return Operator(layout, m)


def _warn_truncation(amplitude: complex, dimension: int, what: str):
    if abs(amplitude) ** 2 > dimension / 4:
        warnings.warn(
            f"{what}: |alpha|^2 = {abs(amplitude)**2:.3g} strains Fock truncation "
            f"at dimension {dimension}",
            TruncationWarning,
            stacklevel=3,
        )


def displacement(amplitude: complex, dimension: int) -> Operator:
    """D(alpha) = exp(alpha b^dag - alpha* b) on the truncated space.

    Unitary to high accuracy as long as |alpha|^2 stays well below the
    truncation; a TruncationWarning is emitted past dimension/4.
    """
    b, bdag = fock_ladder(dimension)
    _warn_truncation(amplitude, dimension, "displacement")
    gen = amplitude * bdag.matrix - np.conj(amplitude) * b.matrix
    return Operator(b.layout, expm(gen))


def coherent_state(amplitude: complex, dimension: int) -> QuantumState:
    """D(alpha)|0>, renormalized after truncation (Poissonian Fock weights)."""
    d = displacement(amplitude, dimension)
    vac = np.zeros(dimension, dtype=complex)
    vac[0] = 1.0
    vec = d.matrix @ vac
    vec = vec / np.linalg.norm(vec)
    return QuantumState.from_vector(d.layout, vec)


def basis_state(layout: HilbertLayout, occupations: dict[str, int]) -> QuantumState:
    """Product basis state |n_1> x |n_2> x ... by subsystem label."""
    vecs = []
    for lbl, dim in layout.subsystems:
        n = occupations.get(lbl, 0)
        if not 0 <= n < dim:
            raise ValueError(f"occupation {n} out of range for {lbl!r} (dim {dim})")
        v = np.zeros(dim, dtype=complex)
        v[n] = 1.0
        vecs.append(v)
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return QuantumState.from_vector(layout, out)
