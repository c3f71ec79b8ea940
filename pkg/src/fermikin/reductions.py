"""Limiting and dual pictures of the fermionic equation.

Occupation-number rate equations (with and without Pauli blocking) and the
hole picture I - rho with transposed rates live here, together with the
low-density comparison against the linear Markoff equation. Each doubles as
an independent oracle for the full matrix solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fermikin.core import (
    ADMISSIBLE_TOL,
    HamiltonianSpec,
    NoDrive,
    RateTable,
    density_from_occupations,
    is_admissible,
    spectral_bounds,
    sup_norm,
    hermitize,
)
from fermikin.errors import ConfigurationError, ContractViolation, IntegrationDiverged
from fermikin.generators import fermion_rhs, markoff_rhs
from fermikin.integrators import (
    FermionModel,
    IntegrationConfig,
    integrate_rk4,
    rhs_from,
    time_grid,
)

OCCUPATION_TOL = 1e-9


def _w(rates):
    return rates.omega if isinstance(rates, RateTable) else np.asarray(rates, dtype=float)


def pauli_rhs(f, rates_w) -> np.ndarray:
    """df_n/dt = -sum_m w[m,n] f_n + sum_m w[n,m] f_m."""
    w = _w(rates_w)
    f = np.asarray(f, dtype=float)
    return -w.sum(axis=0) * f + w @ f


def fermi_pauli_rhs(f, rates_omega) -> np.ndarray:
    """df_n/dt = -sum_m w[m,n](1-f_m) f_n + sum_m w[n,m](1-f_n) f_m."""
    w = _w(rates_omega)
    f = np.asarray(f, dtype=float)
    return -((1.0 - f) @ w) * f + (1.0 - f) * (w @ f)


@dataclass
class OccupationTrajectory:
    times: np.ndarray
    f: np.ndarray

    @property
    def final(self):
        return self.f[-1]


def integrate_occupations(rhs, f0, cfg: IntegrationConfig, times=None,
                          upper=1.0 + OCCUPATION_TOL, lower=-OCCUPATION_TOL):
    """RK4 on the N-dimensional occupation ODE ``df/dt = rhs(f)``.

    Raises ``IntegrationDiverged`` when an occupation leaves
    [lower, upper]; pass ``upper=math.inf`` for the linear Pauli equation,
    which has no exclusion bound.
    """
    f = np.array(f0, dtype=float)
    if f.ndim != 1 or np.any(f < lower) or np.any(f > upper):
        raise ConfigurationError("initial occupations out of range")
    if times is None:
        if cfg.dt is None:
            raise ContractViolation("integrate_occupations needs cfg.dt or a time grid")
        times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, f.size))
    out[0] = f
    for k in range(1, times.size):
        h = times[k] - times[k - 1]
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * h * k1)
        k3 = rhs(f + 0.5 * h * k2)
        k4 = rhs(f + h * k3)
        f = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(f)) or np.any(f < lower) or np.any(f > upper):
            raise IntegrationDiverged(f"occupations {f} out of range", float(times[k]))
        out[k] = f
    return OccupationTrajectory(times, out)


def occupation_steady_state(rhs, f0, rate_bound, dt, tol=1e-12):
    """Run until ||df/dt||_inf < tol or t = 50/M, whichever comes first."""
    f = np.array(f0, dtype=float)
    t_max = 50.0 / rate_bound if rate_bound > 0 else 0.0
    t = 0.0
    while t < t_max:
        if np.max(np.abs(rhs(f))) < tol:
            break
        h = min(dt, t_max - t)
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * h * k1)
        k3 = rhs(f + 0.5 * h * k2)
        k4 = rhs(f + h * k3)
        f = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return f, t


def hole_transform(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    return np.eye(rho.shape[0]) - rho


def hole_rhs(rho_bar, h, rates) -> np.ndarray:
    """Master equation for holes: the fermionic form with omega transposed."""
    rates = rates if isinstance(rates, RateTable) else RateTable(rates)
    return fermion_rhs(rho_bar, h, rates.transposed())


class HoleModel(FermionModel):
    """Hole-picture RHS; reuses the compiled fermion step with transposed rates."""

    model = "hole"

    def __init__(self, hamiltonian: HamiltonianSpec, rates: RateTable):
        super().__init__(hamiltonian, rates.transposed())


def low_density_gap(scale_eps, sigma, hamiltonian: HamiltonianSpec, rates: RateTable,
                    cfg: IntegrationConfig, side="particle", return_traj=False):
    """Sup-over-grid distance between the fermionic and the Markoff evolution of eps*sigma.

    ``side="particle"`` compares the fermionic equation with the Markoff
    equation at w = omega; ``side="hole"`` evolves the hole matrix eps*sigma
    under the hole equation against Markoff with w = omega^T.
    """
    if not 0.0 <= scale_eps <= 1.0:
        raise ContractViolation("eps must lie in [0, 1]")
    if side not in ("particle", "hole"):
        raise ContractViolation(f"side must be 'particle' or 'hole', got {side!r}")
    if not is_admissible(sigma, ADMISSIBLE_TOL):
        raise ContractViolation(f"sigma is not admissible: spectrum {spectral_bounds(sigma)}")
    eff = rates if side == "particle" else rates.transposed()
    rho0 = scale_eps * hermitize(sigma)[0]
    times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    nonlinear = integrate_rk4(FermionModel(hamiltonian, eff), rho0, cfg, times=times)
    linear_cfg = IntegrationConfig(cfg.t0, cfg.tf, cfg.dt, admissibility_tol=cfg.admissibility_tol,
                                   pauli_bound=False)
    linear = integrate_rk4(rhs_from(markoff_rhs, hamiltonian, RateTable(eff.omega)), rho0,
                           linear_cfg, times=times)
    gaps = np.array([sup_norm(hermitize(a - b)[0]) for a, b in zip(nonlinear.states, linear.states)])
    gap = float(gaps.max())
    if return_traj:
        return gap, gaps, nonlinear, linear
    return gap


def low_density_sweep(eps_values, sigma, hamiltonian, rates, cfg, side="particle"):
    """gap(eps) for each eps and the successive ratios gap(eps_{k+1}) / gap(eps_k)."""
    gaps = [low_density_gap(e, sigma, hamiltonian, rates, cfg, side=side) for e in eps_values]
    ratios = [b / a if a > 0 else math.nan for a, b in zip(gaps, gaps[1:])]
    return gaps, ratios


def coupled_hole_evolution(rho0, hamiltonian, rates, cfg):
    """Evolve rho (fermionic) and rho_bar (hole picture) from matched states.

    Returns both trajectories and sup_t ||rho_bar(t) - (I - rho(t))||.
    """
    times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    particle = integrate_rk4(FermionModel(hamiltonian, rates), rho0, cfg, times=times)
    hole = integrate_rk4(HoleModel(hamiltonian, rates), hole_transform(rho0), cfg, times=times)
    gap = max(
        sup_norm(hermitize(b - hole_transform(a))[0]) for a, b in zip(particle.states, hole.states)
    )
    return particle, hole, float(gap)


def incoherent_gap(occ0, hamiltonian: HamiltonianSpec, rates: RateTable, cfg: IntegrationConfig):
    """Diagonal fermionic evolution versus the Pauli-blocked rate equations.

    Requires V = 0 and a diagonal initial state. Returns
    ``(max diagonal gap, max off-diagonal magnitude, matrix trajectory, occupation trajectory)``.
    """
    if not isinstance(hamiltonian.drive, NoDrive):
        raise ConfigurationError("incoherent comparison requires V(t) = 0")
    times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    full = integrate_rk4(FermionModel(hamiltonian, rates), density_from_occupations(occ0), cfg,
                         times=times)
    occ = integrate_occupations(lambda f: fermi_pauli_rhs(f, rates), occ0, cfg, times=times)
    diag_gap = float(np.max(np.abs(full.occupations - occ.f)))
    n = full.n
    off = full.states[:, ~np.eye(n, dtype=bool)]
    off_max = float(np.max(np.abs(off))) if off.size else 0.0
    return diag_gap, off_max, full, occ


__all__ = [
    "pauli_rhs",
    "fermi_pauli_rhs",
    "integrate_occupations",
    "occupation_steady_state",
    "hole_transform",
    "hole_rhs",
    "HoleModel",
    "low_density_gap",
    "low_density_sweep",
    "coupled_hole_evolution",
    "incoherent_gap",
]
