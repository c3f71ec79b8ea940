"""Limit and cross-method comparisons run from a scenario.

Each variant returns a JSON-ready dict with per-time gap norms, the measured
quantities and a ``passed`` flag against the variant's threshold.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from fermikin.core import NoDrive, hermitize, is_admissible, sup_norm
from fermikin.errors import ConfigurationError
from fermikin.generators import jump_ops_from_rates, lindblad_rhs, markoff_rhs
from fermikin.integrators import (
    FermionModel,
    duhamel_apply,
    integrate_picard,
    integrate_rk4,
    rhs_from,
    time_grid,
)
from fermikin.reductions import coupled_hole_evolution, incoherent_gap, low_density_gap
from fermikin.scenario import Scenario

VARIANTS = ("low_density", "hole_dual", "picard_vs_rk4", "markoff_vs_lindblad", "incoherent")

THRESHOLDS = {
    "low_density_ratio": 0.35,
    "hole_dual": 1e-9,
    "picard_vs_rk4": 1e-6,
    "markoff_vs_lindblad": 1e-13,
    "incoherent_diagonal": 1e-8,
    "incoherent_offdiagonal": 1e-12,
}


def _gap(a, b):
    return sup_norm(hermitize(a - b)[0])


def _need_rates(sc: Scenario, variant):
    if sc.rates is None:
        raise ConfigurationError(f"variant {variant!r} needs a rate table", "/rates")


def _need_fermion(sc: Scenario, variant):
    if sc.model not in ("fermion", "hole"):
        raise ConfigurationError(
            f"variant {variant!r} compares fermion-mode evolutions, scenario model is {sc.model!r}",
            "/model",
        )
    _need_rates(sc, variant)


def _floats(a):
    return [float(x) for x in a]


def compare_low_density(sc: Scenario) -> dict:
    _need_fermion(sc, "low_density")
    sigma = sc.rho0
    if not is_admissible(sigma):
        raise ConfigurationError("initial state must be admissible to serve as sigma", "/initial")
    eps = list(sc.eps)
    out = {"eps": eps, "threshold": THRESHOLDS["low_density_ratio"]}
    passed = True
    for side in ("particle", "hole"):
        gaps, per_time = [], []
        for e in eps:
            g, series, nonlinear, _ = low_density_gap(e, sigma, sc.hamiltonian, sc.rates, sc.cfg,
                                                      side=side, return_traj=True)
            gaps.append(g)
            per_time.append(_floats(series))
        ratios = [b / a if a > 0 else math.nan for a, b in zip(gaps, gaps[1:])]
        orders = [
            math.log(r) / math.log(e1 / e0) if r > 0 else math.nan
            for r, e0, e1 in zip(ratios, eps, eps[1:])
        ]
        ok = all(r <= THRESHOLDS["low_density_ratio"] for r in ratios)
        passed = passed and ok
        out[side] = {
            "gaps": gaps,
            "ratios": ratios,
            "orders": orders,
            "passed": ok,
            "times": _floats(nonlinear.times),
            "per_time_gaps": per_time,
        }
    out["passed"] = passed
    return out


def compare_hole_dual(sc: Scenario) -> dict:
    _need_fermion(sc, "hole_dual")
    particle, hole, gap = coupled_hole_evolution(sc.rho0, sc.hamiltonian, sc.rates, sc.cfg)
    series = [_gap(b, np.eye(sc.n) - a) for a, b in zip(particle.states, hole.states)]
    return {
        "times": _floats(particle.times),
        "per_time_gaps": series,
        "max_gap": gap,
        "threshold": THRESHOLDS["hole_dual"],
        "passed": gap <= THRESHOLDS["hole_dual"],
    }


def compare_picard_vs_rk4(sc: Scenario) -> dict:
    _need_fermion(sc, "picard_vs_rk4")
    if sc.model != "fermion":
        raise ConfigurationError("picard_vs_rk4 runs the particle equation", "/model")
    picard, report = integrate_picard(sc.rho0, sc.hamiltonian, sc.rates, sc.cfg)
    rk4 = integrate_rk4(FermionModel(sc.hamiltonian, sc.rates), sc.rho0, sc.cfg,
                        times=picard.times)
    series = [_gap(a, b) for a, b in zip(picard.states, rk4.states)]
    moves = []
    for w in report.windows:
        win = picard.window(w.start_index, w.stop_index)
        again = duhamel_apply(win, win.states[0], sc.hamiltonian, sc.rates)
        moves.append(max(_gap(a, b) for a, b in zip(again.states, win.states)))
    final_gap = series[-1]
    fixed = max(moves) if moves else 0.0
    ok = (report.max_ratio < 1.0 and final_gap <= THRESHOLDS["picard_vs_rk4"]
          and fixed <= sc.cfg.picard_tol)
    return {
        "times": _floats(picard.times),
        "per_time_gaps": series,
        "final_gap": final_gap,
        "max_contraction_ratio": report.max_ratio,
        "fixed_point_moves": moves,
        "picard": report.as_dict(),
        "threshold": THRESHOLDS["picard_vs_rk4"],
        "passed": bool(ok),
    }


def compare_markoff_vs_lindblad(sc: Scenario) -> dict:
    _need_rates(sc, "markoff_vs_lindblad")
    jumps = jump_ops_from_rates(sc.rates)
    cfg = sc.cfg
    times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    lin_cfg = replace(cfg, pauli_bound=False, method="rk4")
    markoff = integrate_rk4(rhs_from(markoff_rhs, sc.hamiltonian, sc.rates), sc.rho0, lin_cfg,
                            times=times)
    lindblad = integrate_rk4(rhs_from(lindblad_rhs, sc.hamiltonian, jumps), sc.rho0, lin_cfg,
                             times=times)
    rhs_gaps = []
    for t, rho in zip(markoff.times, markoff.states):
        h = sc.hamiltonian(t)
        rhs_gaps.append(_gap(markoff_rhs(rho, h, sc.rates), lindblad_rhs(rho, h, jumps)))
    traj_gaps = [_gap(a, b) for a, b in zip(markoff.states, lindblad.states)]
    max_rhs = max(rhs_gaps)
    return {
        "times": _floats(times),
        "per_time_rhs_gaps": rhs_gaps,
        "per_time_gaps": traj_gaps,
        "max_rhs_gap": max_rhs,
        "max_trajectory_gap": max(traj_gaps),
        "threshold": THRESHOLDS["markoff_vs_lindblad"],
        "passed": max_rhs <= THRESHOLDS["markoff_vs_lindblad"],
    }


def compare_incoherent(sc: Scenario) -> dict:
    _need_fermion(sc, "incoherent")
    if not isinstance(sc.hamiltonian.drive, NoDrive):
        raise ConfigurationError("incoherent comparison requires no drive", "/drive")
    rho0 = sc.rho0
    if np.any(rho0 - np.diag(rho0.diagonal())):
        raise ConfigurationError("incoherent comparison requires a diagonal initial state",
                                 "/initial")
    diag_gap, off_max, full, occ = incoherent_gap(rho0.diagonal().real, sc.hamiltonian,
                                                  sc.rates, sc.cfg)
    series = np.max(np.abs(full.occupations - occ.f), axis=1)
    ok = diag_gap <= THRESHOLDS["incoherent_diagonal"] and off_max <= THRESHOLDS["incoherent_offdiagonal"]
    return {
        "times": _floats(full.times),
        "per_time_gaps": _floats(series),
        "max_diagonal_gap": diag_gap,
        "max_offdiagonal": off_max,
        "threshold": THRESHOLDS["incoherent_diagonal"],
        "passed": bool(ok),
    }


_DISPATCH = {
    "low_density": compare_low_density,
    "hole_dual": compare_hole_dual,
    "picard_vs_rk4": compare_picard_vs_rk4,
    "markoff_vs_lindblad": compare_markoff_vs_lindblad,
    "incoherent": compare_incoherent,
}


def run_comparison(sc: Scenario, variant: str) -> dict:
    if variant not in _DISPATCH:
        raise ConfigurationError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    out = _DISPATCH[variant](sc)
    out["variant"] = variant
    return out
