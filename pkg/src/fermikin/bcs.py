"""Quasiparticle (BCS) density matrices and their constrained evolution.

The quasiparticle matrix doubles the single-particle space::

    rho_q = [[rho_s,     kappa_s     ],
             [-conj(kappa_s), I - conj(rho_s)]]

with an antisymmetric pairing tensor kappa_s. Writing S = [[0, I], [I, 0]],
this block form is the identity rho_q + S conj(rho_q) S = I. Evolution with
the general relaxation equation keeps it when the hole-side relaxation is tied
to the particle side by A_pbar = S conj(A_p) S and H obeys S conj(H) S = -H.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fermikin.core import (
    HERMITIAN_TOL,
    ADMISSIBLE_TOL,
    HamiltonianSpec,
    max_asymmetry,
    require_square,
    spectral_bounds,
    sup_norm,
    hermitize,
)
from fermikin.errors import (
    ConfigurationError,
    ContractViolation,
    DimensionMismatch,
    StructureViolation,
)
from fermikin.generators import PSD_TOL, general_rhs
from fermikin.integrators import IntegrationConfig, Trajectory, integrate_rk4, time_grid

ANTISYMMETRY_TOL = 1e-12
STRUCTURE_TOL = 1e-8
PH_SYMMETRY_TOL = 1e-10


def swap_operator(ns: int) -> np.ndarray:
    """S = [[0, I], [I, 0]] of dimension 2 ns."""
    if ns < 1:
        raise ContractViolation("block size must be positive")
    eye = np.eye(ns)
    zero = np.zeros((ns, ns))
    return np.block([[zero, eye], [eye, zero]]).astype(np.complex128)


def _swap_for(op):
    n = op.shape[0]
    if n % 2:
        raise DimensionMismatch(f"quasiparticle operators have even dimension, got {n}")
    return swap_operator(n // 2)


def _swap_conj(op, s=None):
    s = _swap_for(op) if s is None else s
    return s @ np.conj(op) @ s


@dataclass(frozen=True)
class QuasiparticleMatrix:
    rho_s: np.ndarray
    kappa_s: np.ndarray
    assembled: np.ndarray
    admissible: bool
    bounds: tuple

    @property
    def ns(self) -> int:
        return self.rho_s.shape[0]


def assemble_quasiparticle(rho_s, kappa_s, tol: float = ADMISSIBLE_TOL) -> QuasiparticleMatrix:
    """Validate the blocks and build the 2 N_s quasiparticle matrix.

    Raises ``ConfigurationError`` for a non-Hermitian rho_s, a kappa that is
    not antisymmetric, or a non-Hermitian assembly. Admissibility is recorded,
    not enforced.
    """
    rho_s = np.array(require_square(rho_s, "rho_s"), dtype=np.complex128)
    kappa_s = np.array(require_square(kappa_s, "kappa_s"), dtype=np.complex128)
    if rho_s.shape != kappa_s.shape:
        raise DimensionMismatch(f"rho_s is {rho_s.shape}, kappa_s is {kappa_s.shape}")
    if max_asymmetry(rho_s) > HERMITIAN_TOL:
        raise ConfigurationError(f"rho_s is not Hermitian (asymmetry {max_asymmetry(rho_s):.3g})")
    anti = float(np.max(np.abs(kappa_s + kappa_s.T)))
    if anti > ANTISYMMETRY_TOL:
        raise ConfigurationError(f"kappa_s is not antisymmetric (violation {anti:.3g})")
    eye = np.eye(rho_s.shape[0])
    q = np.block([[rho_s, kappa_s], [-np.conj(kappa_s), eye - np.conj(rho_s)]])
    if max_asymmetry(q) > HERMITIAN_TOL:
        raise ConfigurationError("assembled quasiparticle matrix is not Hermitian")
    lo, hi = spectral_bounds(q)
    for a in (rho_s, kappa_s, q):
        a.setflags(write=False)
    return QuasiparticleMatrix(rho_s, kappa_s, q, lo >= -tol and hi <= 1.0 + tol, (lo, hi))


def structure_violation(rho_q) -> float:
    """sup_norm(rho_q + S conj(rho_q) S - I); zero exactly on the block form."""
    rho_q = np.asarray(rho_q, dtype=np.complex128)
    x = rho_q + _swap_conj(rho_q) - np.eye(rho_q.shape[0])
    return sup_norm(hermitize(x)[0])


def check_ph_symmetry_hamiltonian(h, s=None) -> float:
    """sup_norm(S conj(H) S + H)."""
    h = np.asarray(require_square(h, "H"), dtype=np.complex128)
    if s is not None and np.shape(s) != h.shape:
        raise DimensionMismatch(f"S is {np.shape(s)}, H is {h.shape}")
    return sup_norm(hermitize(_swap_conj(h, s) + h)[0])


def bcs_hamiltonian(h, delta) -> np.ndarray:
    """[[h, delta], [-conj(delta), -conj(h)]]: particle-hole symmetric by construction."""
    h = np.asarray(h, dtype=np.complex128)
    delta = np.asarray(delta, dtype=np.complex128)
    return np.block([[h, delta], [-np.conj(delta), -np.conj(h)]])


def constrain_relaxation(a_p, s=None) -> np.ndarray:
    """Hole-side relaxation S conj(A_p) S."""
    a_p = np.asarray(require_square(a_p, "a_p"), dtype=np.complex128)
    if s is not None and np.shape(s) != a_p.shape:
        raise DimensionMismatch(f"S is {np.shape(s)}, a_p is {a_p.shape}")
    return _swap_conj(a_p, s)


def _as_schedule(a_p_schedule):
    if callable(a_p_schedule):
        return a_p_schedule
    fixed = np.array(a_p_schedule, dtype=np.complex128)
    return lambda t: fixed


def evolve_bcs(q0: QuasiparticleMatrix, hamiltonian: HamiltonianSpec, a_p_schedule,
               cfg: IntegrationConfig, structure_tol: float = STRUCTURE_TOL) -> Trajectory:
    """RK4 evolution of rho_q with A_pbar(t) = S conj(A_p(t)) S.

    ``a_p_schedule`` is a constant matrix or a callable ``t -> A_p``. Every
    Hamiltonian and relaxation evaluation is checked (particle-hole symmetry
    within 1e-10, -A_p positive semidefinite); every stored sample must keep
    the block form within ``structure_tol`` or ``StructureViolation`` is raised.
    """
    if not isinstance(q0, QuasiparticleMatrix):
        raise ContractViolation("q0 must come from assemble_quasiparticle")
    if not q0.admissible:
        raise ContractViolation(f"initial quasiparticle matrix is not admissible: {q0.bounds}")
    dim = q0.assembled.shape[0]
    if hamiltonian.n != dim:
        raise DimensionMismatch(f"H has dimension {hamiltonian.n}, rho_q has {dim}")
    if cfg.dt is None:
        raise ContractViolation("evolve_bcs needs cfg.dt")
    s = swap_operator(dim // 2)
    schedule = _as_schedule(a_p_schedule)
    checked = {}

    def operators(t):
        hit = checked.get(t)
        if hit is not None:
            return hit
        h = hamiltonian(t)
        v = check_ph_symmetry_hamiltonian(h, s)
        if v > PH_SYMMETRY_TOL:
            raise ContractViolation(f"H({t!r}) breaks particle-hole symmetry by {v:.3g}")
        a_p = np.asarray(schedule(t), dtype=np.complex128)
        if a_p.shape != (dim, dim):
            raise DimensionMismatch(f"a_p({t!r}) has shape {a_p.shape}, expected {(dim, dim)}")
        if max_asymmetry(a_p) > HERMITIAN_TOL:
            raise ContractViolation(f"a_p({t!r}) is not Hermitian")
        hi = spectral_bounds(a_p)[1]
        if hi > PSD_TOL * max(1.0, sup_norm(a_p)):
            raise ContractViolation(f"-a_p({t!r}) is not positive semidefinite (max eigenvalue {hi:.3g})")
        checked[t] = out = (h, a_p, constrain_relaxation(a_p, s))
        return out

    def rhs(t, rho):
        h, a_p, a_pbar = operators(t)
        return general_rhs(rho, h, a_p, a_pbar, check=False)

    rhs.model = "bcs"

    def check(t, rho):
        v = structure_violation(rho)
        if v > structure_tol:
            raise StructureViolation("quasiparticle block structure lost", float(t), v)

    check(cfg.t0, q0.assembled)
    times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    return integrate_rk4(rhs, q0.assembled, cfg, times=times, check=check)


def chain_level(previous: QuasiparticleMatrix, kappa_q) -> QuasiparticleMatrix:
    """Next level of the quasiparticle series, with previous.assembled as the particle block."""
    kappa_q = np.asarray(kappa_q, dtype=np.complex128)
    if kappa_q.shape != previous.assembled.shape:
        raise DimensionMismatch(
            f"kappa_q is {kappa_q.shape}, previous level is {previous.assembled.shape}"
        )
    return assemble_quasiparticle(previous.assembled, kappa_q)


__all__ = [
    "swap_operator",
    "QuasiparticleMatrix",
    "assemble_quasiparticle",
    "structure_violation",
    "check_ph_symmetry_hamiltonian",
    "bcs_hamiltonian",
    "constrain_relaxation",
    "evolve_bcs",
    "chain_level",
]
