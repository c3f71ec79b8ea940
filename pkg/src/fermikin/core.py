"""Domain types and the dense Hermitian linear algebra everything builds on.

Operators are plain ``numpy`` complex arrays. The dataclasses here carry the
model inputs: the orbital basis of the unperturbed Hamiltonian, the rate
tables and the (possibly driven) Hamiltonian.

Rate tables follow the ``[to][from]`` orientation: ``omega[n, m]`` is the
rate of the transition from orbital ``m`` into orbital ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fermikin._backend import kernels
from fermikin.errors import ConfigurationError, ContractViolation, DimensionMismatch

HERMITIAN_TOL = 1e-12
ADMISSIBLE_TOL = 1e-9


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def max_asymmetry(op) -> float:
    op = np.asarray(op)
    if op.size == 0:
        return 0.0
    return float(np.max(np.abs(op - op.conj().T)))


def is_hermitian(op, tol: float = HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    return op.ndim == 2 and op.shape[0] == op.shape[1] and max_asymmetry(op) <= tol


def require_square(op, name="operator"):
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {op.shape}")
    return op


def require_same_dim(*named):
    """Raise unless every ``(name, array)`` pair has the same leading size."""
    dims = [(name, np.shape(a)[0]) for name, a in named]
    first_name, first = dims[0]
    for name, d in dims[1:]:
        if d != first:
            raise DimensionMismatch(f"{name} has dimension {d}, {first_name} has {first}")
    return first


@dataclass(frozen=True)
class OrbitalBasis:
    """Eigenorbitals |n> of H0 with their energies E_n (hbar = 1)."""

    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size < 1:
            raise ConfigurationError("energies must be a non-empty 1-D list")
        if not np.all(np.isfinite(e)):
            raise ConfigurationError("energies must be finite")
        object.__setattr__(self, "energies", _frozen(e, float))

    @property
    def n_orbitals(self) -> int:
        return self.energies.size

    @property
    def h0(self) -> np.ndarray:
        return np.diag(self.energies).astype(np.complex128)


@dataclass(frozen=True)
class RateTable:
    """Nonnegative transition rates ``omega[to, from]`` and optional dephasing.

    ``gamma`` must be symmetric so that the pure-dephasing term maps Hermitian
    matrices to Hermitian matrices.
    """

    omega: np.ndarray
    gamma: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ConfigurationError(f"rate matrix must be square, got shape {w.shape}")
        _check_rates(w, "omega")
        object.__setattr__(self, "omega", _frozen(w, float))
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float)
            if g.shape != w.shape:
                raise ConfigurationError(f"gamma has shape {g.shape}, omega has {w.shape}")
            _check_rates(g, "gamma")
            if not np.array_equal(g, g.T):
                raise ConfigurationError("gamma must be symmetric")
            object.__setattr__(self, "gamma", _frozen(g, float))

    @property
    def n(self) -> int:
        return self.omega.shape[0]

    def transposed(self) -> RateTable:
        """Rates for the hole picture: a particle jump m -> n is a hole jump n -> m."""
        return RateTable(self.omega.T, self.gamma)

    @classmethod
    def zeros(cls, n: int) -> RateTable:
        return cls(np.zeros((n, n)))


def _check_rates(a, name):
    if not np.all(np.isfinite(a)):
        raise ConfigurationError(f"{name} must be finite")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise ConfigurationError(f"{name}[{i}][{j}] = {a[i, j]} is negative")
    if np.any(np.diag(a) != 0):
        raise ConfigurationError(f"{name} must have a zero diagonal")


def _hermitian_matrix(m, n, what):
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (n, n):
        raise ConfigurationError(f"{what} has shape {m.shape}, expected {(n, n)}")
    if not np.all(np.isfinite(m)):
        raise ConfigurationError(f"{what} must be finite")
    if max_asymmetry(m) > HERMITIAN_TOL:
        raise ConfigurationError(f"{what} is not Hermitian (asymmetry {max_asymmetry(m):.3g})")
    return _frozen(m, np.complex128)


# Drives: V(t) descriptions. Each validates against the basis dimension via
# ``validate(n)`` and evaluates with ``__call__(t)``.


@dataclass(frozen=True)
class NoDrive:
    kind = "none"

    def validate(self, n):
        return self

    def __call__(self, t, n):
        return np.zeros((n, n), dtype=np.complex128)


@dataclass(frozen=True)
class ConstantDrive:
    matrix: np.ndarray
    kind = "constant"

    def validate(self, n):
        return ConstantDrive(_hermitian_matrix(self.matrix, n, "drive matrix"))

    def __call__(self, t, n):
        return np.array(self.matrix, dtype=np.complex128)


@dataclass(frozen=True)
class SinusoidalDrive:
    """V(t) = amplitude * cos(frequency * t + phase)."""

    amplitude: np.ndarray
    frequency: float
    phase: float = 0.0
    kind = "sinusoidal"

    def validate(self, n):
        if not (math.isfinite(self.frequency) and math.isfinite(self.phase)):
            raise ConfigurationError("drive frequency and phase must be finite")
        return SinusoidalDrive(
            _hermitian_matrix(self.amplitude, n, "drive amplitude"),
            float(self.frequency),
            float(self.phase),
        )

    def __call__(self, t, n):
        return math.cos(self.frequency * t + self.phase) * np.asarray(self.amplitude)


@dataclass(frozen=True)
class PiecewiseDrive:
    """V(t) = matrices[j] on [times[j], times[j+1]); zero before times[0]."""

    times: tuple
    matrices: tuple
    kind = "piecewise"

    def validate(self, n):
        times = tuple(float(t) for t in self.times)
        if len(times) != len(self.matrices) or not times:
            raise ConfigurationError("piecewise drive needs one matrix per switch time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("piecewise drive times must be strictly increasing")
        mats = tuple(
            _hermitian_matrix(m, n, f"drive matrix {j}") for j, m in enumerate(self.matrices)
        )
        return PiecewiseDrive(times, mats)

    def __call__(self, t, n):
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        if j < 0:
            return np.zeros((n, n), dtype=np.complex128)
        return np.array(self.matrices[j], dtype=np.complex128)


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(t) = H0 + V(t) with H0 = diag(E_n)."""

    basis: OrbitalBasis
    drive: object = field(default_factory=NoDrive)

    def __post_init__(self):
        object.__setattr__(self, "drive", self.drive.validate(self.basis.n_orbitals))

    @property
    def n(self) -> int:
        return self.basis.n_orbitals

    @property
    def is_static(self) -> bool:
        return isinstance(self.drive, (NoDrive, ConstantDrive))

    def __call__(self, t: float) -> np.ndarray:
        return evaluate_hamiltonian(self, t)


def evaluate_hamiltonian(spec: HamiltonianSpec, t: float) -> np.ndarray:
    if not math.isfinite(t):
        raise ContractViolation(f"time must be finite, got {t!r}")
    n = spec.n
    return spec.basis.h0 + spec.drive(t, n)


def hermitize(op):
    """Return ``((op + op^H) / 2, asymmetry)``.

    ``asymmetry`` is the largest entry of ``|op - op^H|`` before symmetrizing.
    """
    op = require_square(np.asarray(op, dtype=np.complex128))
    return 0.5 * (op + op.conj().T), max_asymmetry(op)


def _require_hermitian(op):
    op = np.asarray(op, dtype=np.complex128)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {op.shape}")
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    if max_asymmetry(op) > HERMITIAN_TOL * scale:
        raise ContractViolation(f"operator is not Hermitian (asymmetry {max_asymmetry(op):.3g})")
    return op


def eigvalsh(op) -> np.ndarray:
    """All eigenvalues (ascending) by the cyclic Jacobi kernel."""
    return kernels.jacobi_eigvalsh(_require_hermitian(op))


def spectral_bounds(op) -> tuple[float, float]:
    w = eigvalsh(op)
    return float(w[0]), float(w[-1])


def sup_norm(op) -> float:
    """Operator norm of a Hermitian matrix: largest |eigenvalue|."""
    lo, hi = spectral_bounds(op)
    return max(abs(lo), abs(hi))


def is_admissible(rho, tol: float = ADMISSIBLE_TOL) -> bool:
    lo, hi = spectral_bounds(rho)
    return lo >= -tol and hi <= 1.0 + tol


def density_from_occupations(c) -> np.ndarray:
    """Incoherent initial state sum_n c_n |n><n| with 0 <= c_n <= 1."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or np.any(c < 0) or np.any(c > 1) or not np.all(np.isfinite(c)):
        raise ConfigurationError("occupations must be a list of numbers in [0, 1]")
    return np.diag(c).astype(np.complex128)


def occupations(rho) -> np.ndarray:
    return np.asarray(rho).diagonal().real.copy()


def offdiag_norm(rho) -> float:
    """Frobenius norm of the off-diagonal part."""
    rho = np.asarray(rho)
    off = rho - np.diag(rho.diagonal())
    return float(np.sqrt(np.vdot(off, off).real))


def random_admissible(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random coherent state with spectrum drawn uniformly from [0, 1].

    ``rank`` limits the number of nonzero eigenvalues; the default draws a
    full-rank state.
    """
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    lam = rng.uniform(0.0, 1.0, size=n)
    if rank is not None:
        lam[rank:] = 0.0
    rho = (q * lam) @ q.conj().T
    return hermitize(rho)[0]


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return hermitize(scale * z)[0]
