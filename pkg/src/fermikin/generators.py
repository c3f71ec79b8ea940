"""Right-hand sides of the master equations.

All relaxation is written in the H0 eigenbasis, including when a drive is
present. Every ``*_rhs`` returns ``d rho / dt`` as a complex matrix.

The fermionic family is built from two diagonal operators::

    A1(rho)[m] = 1/2 sum_n omega[n, m] (1 - f_n)      (loss out of m, Pauli-blocked)
    A2(rho)[n] = 1/2 sum_m omega[n, m] f_m            (gain into n)

with f = diag(rho). Loss factor -{rho, A1}, gain factor {I - rho, A2}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fermikin.core import (
    RateTable,
    require_same_dim,
    require_square,
    spectral_bounds,
)
from fermikin.errors import ConfigurationError, ContractViolation, DimensionMismatch

PSD_TOL = 1e-12


def _omega(rates):
    if isinstance(rates, RateTable):
        return rates.omega
    return np.asarray(rates, dtype=float)


def _diag_of(rho):
    return np.asarray(rho).diagonal().real


def commutator_term(rho, h):
    """i[rho, H]."""
    return 1j * (rho @ h - h @ rho)


def anticommutator(a, b):
    return a @ b + b @ a


def transition_bound_M(rates) -> float:
    """Smallest M with half of every row sum and every column sum <= M."""
    w = _omega(rates)
    if w.size == 0:
        return 0.0
    return float(max(0.5 * w.sum(axis=1).max(), 0.5 * w.sum(axis=0).max()))


def a1_diagonal(omega, f):
    return 0.5 * ((1.0 - f) @ omega)


def a2_diagonal(omega, f):
    return 0.5 * (omega @ f)


def _check_dims(rates, rho):
    w = _omega(rates)
    rho = require_square(rho, "density matrix")
    if w.shape[0] != rho.shape[0]:
        raise DimensionMismatch(f"rates are {w.shape[0]}x{w.shape[0]}, density matrix is {rho.shape}")
    return w, rho


def build_A1(rates, rho) -> np.ndarray:
    w, rho = _check_dims(rates, rho)
    return np.diag(a1_diagonal(w, _diag_of(rho))).astype(np.complex128)


def build_A2(rates, rho) -> np.ndarray:
    w, rho = _check_dims(rates, rho)
    return np.diag(a2_diagonal(w, _diag_of(rho))).astype(np.complex128)


@dataclass(frozen=True)
class RelaxationPair:
    """The diagonal pair (A1, A2) frozen at some state."""

    a1: np.ndarray
    a2: np.ndarray

    @classmethod
    def from_state(cls, rates, rho):
        return cls(build_A1(rates, rho), build_A2(rates, rho))


def loss_factor(rho, rates) -> np.ndarray:
    """L_f(rho) = -{rho, A1(rho)}."""
    return -anticommutator(rho, build_A1(rates, rho))


def gain_factor(rho, rates) -> np.ndarray:
    """G_f(rho) = {I - rho, A2(rho)}."""
    hole = np.eye(rho.shape[0]) - rho
    return anticommutator(hole, build_A2(rates, rho))


def _require_nonpositive(a, name):
    lo, hi = spectral_bounds(a)
    if hi > PSD_TOL * max(1.0, abs(lo)):
        raise ContractViolation(f"-{name} must be positive semidefinite (max eigenvalue {hi:.3g})")


def general_rhs(rho, h, a_p, a_pbar, check=True) -> np.ndarray:
    """i[rho, H] + {rho, A_p} - {I - rho, A_pbar}.

    ``-a_p`` and ``-a_pbar`` must be positive semidefinite; pass
    ``check=False`` when that is already guaranteed.
    """
    rho = require_square(rho, "density matrix")
    require_same_dim(("rho", rho), ("H", h), ("a_p", a_p), ("a_pbar", a_pbar))
    if check:
        _require_nonpositive(a_p, "a_p")
        _require_nonpositive(a_pbar, "a_pbar")
    hole = np.eye(rho.shape[0]) - rho
    return commutator_term(rho, h) + anticommutator(rho, a_p) - anticommutator(hole, a_pbar)


def fermion_rhs(rho, h, rates) -> np.ndarray:
    """Nonlinear fermionic master equation, i[rho,H] + L_f(rho) + G_f(rho)."""
    a1 = build_A1(rates, rho)
    a2 = build_A2(rates, rho)
    return general_rhs(rho, h, -a1, -a2, check=False)


def markoff_rhs(rho, h, rates, include_dephasing=False) -> np.ndarray:
    """Linear Markoff equation with transition rates ``rates.omega`` as w.

    With ``include_dephasing`` the pure-dephasing term -gamma[n,m] rho[n,m]
    is added; it requires ``rates.gamma``.
    """
    w, rho = _check_dims(rates, rho)
    require_same_dim(("rho", rho), ("H", h))
    f = _diag_of(rho)
    out = commutator_term(rho, h)
    # loss: -1/2 sum_{n,m} w[n,m] {rho, |m><m|}; gain: sum w[n,m] f_m |n><n|
    d = 0.5 * w.sum(axis=0)
    out = out - rho * (d[:, None] + d[None, :])
    out = out + np.diag(w @ f)
    if include_dephasing:
        gamma = rates.gamma if isinstance(rates, RateTable) else None
        if gamma is None:
            raise ConfigurationError("dephasing requested but the rate table has no gamma")
        out = out - gamma * rho
    return out


@dataclass(frozen=True)
class JumpOperatorSet:
    ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(v, dtype=np.complex128) for v in self.ops)
        for v in ops:
            if v.ndim != 2 or v.shape[0] != v.shape[1]:
                raise ConfigurationError(f"jump operator must be square, got {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ConfigurationError("jump operator entries must be finite")
        object.__setattr__(self, "ops", ops)

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)


def jump_ops_from_rates(rates) -> JumpOperatorSet:
    """One operator sqrt(w[n,m]) |m><n| per nonzero rate w[n,m]."""
    w = _omega(rates)
    n = w.shape[0]
    ops = []
    for to, frm in zip(*np.nonzero(w)):
        v = np.zeros((n, n), dtype=np.complex128)
        v[frm, to] = np.sqrt(w[to, frm])
        ops.append(v)
    return JumpOperatorSet(tuple(ops))


def _jumps(jumps):
    return jumps if isinstance(jumps, JumpOperatorSet) else JumpOperatorSet(tuple(jumps))


def lindblad_rhs(rho, h, jumps) -> np.ndarray:
    """i[rho, H] - 1/2 sum {rho, V V^H} + sum V^H rho V.

    The adjoint placement is the one that reproduces ``markoff_rhs`` through
    ``jump_ops_from_rates``.
    """
    rho = require_square(rho, "density matrix")
    require_same_dim(("rho", rho), ("H", h))
    out = commutator_term(rho, h)
    for v in _jumps(jumps):
        if v.shape != rho.shape:
            raise DimensionMismatch(f"jump operator {v.shape} vs density matrix {rho.shape}")
        vd = v.conj().T
        out = out - 0.5 * anticommutator(rho, v @ vd) + vd @ rho @ v
    return out


def lindblad_fermion_pair(rho, jumps):
    """(A_p, A_pbar) = (-1/2 sum V (I-rho) V^H, -1/2 sum V^H rho V)."""
    n = rho.shape[0]
    hole = np.eye(n) - rho
    a_p = np.zeros((n, n), dtype=np.complex128)
    a_pbar = np.zeros((n, n), dtype=np.complex128)
    for v in _jumps(jumps):
        if v.shape != rho.shape:
            raise DimensionMismatch(f"jump operator {v.shape} vs density matrix {rho.shape}")
        vd = v.conj().T
        a_p -= 0.5 * (v @ hole @ vd)
        a_pbar -= 0.5 * (vd @ rho @ v)
    return a_p, a_pbar


def lindblad_fermion_rhs(rho, h, jumps) -> np.ndarray:
    """Pauli-blocked Lindblad form:
    i[rho,H] - 1/2 sum {rho, V(I-rho)V^H} + 1/2 sum {I-rho, V^H rho V}."""
    rho = require_square(rho, "density matrix")
    require_same_dim(("rho", rho), ("H", h))
    a_p, a_pbar = lindblad_fermion_pair(rho, jumps)
    return general_rhs(rho, h, a_p, a_pbar, check=False)
