"""Scenario files: JSON schema, parsing into model objects, and the runners.

A scenario names a model, the orbital energies, rate tables
(``omega[to][from]``), an optional drive, an initial state and integrator
settings. Complex entries are written either as plain numbers or as
``[re, im]`` pairs; matrices are row-major arrays of arrays.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from fermikin.bcs import assemble_quasiparticle, evolve_bcs
from fermikin.core import (
    ConstantDrive,
    HamiltonianSpec,
    NoDrive,
    OrbitalBasis,
    PiecewiseDrive,
    RateTable,
    SinusoidalDrive,
    density_from_occupations,
    hermitize,
    max_asymmetry,
    spectral_bounds,
    sup_norm,
    HERMITIAN_TOL,
)
from fermikin.diagnostics import DEFAULT_TOLERANCES, build_report, resolve_tolerances
from fermikin.errors import ConfigurationError, FermikinError
from fermikin.generators import (
    general_rhs,
    jump_ops_from_rates,
    JumpOperatorSet,
    lindblad_fermion_rhs,
    lindblad_rhs,
    markoff_rhs,
    transition_bound_M,
)
from fermikin.integrators import (
    FermionModel,
    IntegrationConfig,
    Trajectory,
    default_dt,
    integrate_picard,
    integrate_rk4,
    rhs_from,
    time_grid,
)
from fermikin.reductions import (
    HoleModel,
    fermi_pauli_rhs,
    hole_transform,
    integrate_occupations,
    pauli_rhs,
)

MODELS = ("fermion", "markoff", "lindblad", "lindblad_fermion", "general", "pauli",
          "fermi_pauli", "hole", "bcs")
LINEAR_MODELS = ("markoff", "lindblad", "pauli")
OCCUPATION_MODELS = ("pauli", "fermi_pauli")
ORIENTATION = "omega[to][from]"
TOL_ENV = "FERMIKIN_TOL_OVERRIDE"
SCHEMA_VERSION = 1

_num = {"type": "number"}
_cnum = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_cmat = {"type": "array", "items": {"type": "array", "items": _cnum}}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "basis", "initial"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "model": {"enum": list(MODELS)},
        "basis": {
            "type": "object",
            "required": ["energies"],
            "additionalProperties": False,
            "properties": {"energies": {"type": "array", "items": _num, "minItems": 1}},
        },
        "rates": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                # omega[to][from]: rate of the jump from orbital "from" into "to"
                "omega": {"type": "array", "items": {"type": "array",
                                                     "items": {"type": "number", "minimum": 0}}},
                "w": {"type": "array", "items": {"type": "array",
                                                 "items": {"type": "number", "minimum": 0}}},
                "gamma": {"type": "array", "items": {"type": "array",
                                                     "items": {"type": "number", "minimum": 0}}},
            },
        },
        "drive": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "constant", "sinusoidal", "piecewise"]},
                "matrix": _cmat,
                "amplitude": _cmat,
                "frequency": _num,
                "phase": _num,
                "times": {"type": "array", "items": _num},
                "matrices": {"type": "array", "items": _cmat},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "occupations": {"type": "array",
                                "items": {"type": "number", "minimum": 0, "maximum": 1}},
                "matrix": _cmat,
                "rho_s": _cmat,
                "kappa_s": _cmat,
            },
        },
        "jumps": {"type": "array", "items": _cmat},
        "relaxation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"a_p": _cmat, "a_pbar": _cmat},
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["rk4", "picard"]},
                "t0": _num,
                "tf": _num,
                "dt": _pos,
                "picard_tol": _pos,
                "picard_max_iter": {"type": "integer", "minimum": 1},
                "window_safety": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _pos for k in DEFAULT_TOLERANCES},
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                   "maximum": 1}, "minItems": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "report": {"type": "string"}},
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


def _complex(x):
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _cmatrix(rows, pointer, n=None):
    if any(len(r) != len(rows) for r in rows):
        raise ConfigurationError("matrix must be square", pointer)
    m = np.array([[_complex(x) for x in r] for r in rows], dtype=np.complex128).reshape(
        len(rows), len(rows)
    )
    if n is not None and m.shape[0] != n:
        raise ConfigurationError(f"has dimension {m.shape[0]}, /basis/energies has {n}", pointer)
    return m


def _hermitian(rows, pointer, n=None):
    m = _cmatrix(rows, pointer, n)
    if max_asymmetry(m) > HERMITIAN_TOL:
        raise ConfigurationError(f"is not Hermitian (asymmetry {max_asymmetry(m):.3g})", pointer)
    return hermitize(m)[0]


def _rmatrix(rows, pointer, n):
    if any(len(r) != len(rows) for r in rows):
        raise ConfigurationError("matrix must be square", pointer)
    m = np.array(rows, dtype=float).reshape(len(rows), len(rows))
    if m.shape[0] != n:
        raise ConfigurationError(f"has dimension {m.shape[0]}, /basis/energies has {n}", pointer)
    nz = np.nonzero(np.diag(m))[0]
    if nz.size:
        raise ConfigurationError("diagonal must be zero", f"{pointer}/{nz[0]}/{nz[0]}")
    return m


@dataclass
class Scenario:
    name: str
    model: str
    hamiltonian: HamiltonianSpec
    rates: RateTable | None
    rho0: np.ndarray
    cfg: IntegrationConfig
    tolerances: dict
    rate_bound: float
    jumps: JumpOperatorSet | None = None
    relaxation: tuple | None = None
    quasiparticle: object = None
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    output: dict = field(default_factory=dict)
    sha256: str = ""
    source: str = ""
    defaults: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.hamiltonian.n

    def metadata(self) -> dict:
        cfg = self.cfg
        return {
            "scenario": self.name,
            "source": self.source,
            "scenario_sha256": self.sha256,
            "model": self.model,
            "rate_orientation": ORIENTATION,
            "n_orbitals": self.n,
            "rate_bound_M": self.rate_bound,
            "integrator": {
                "method": cfg.method, "t0": cfg.t0, "tf": cfg.tf, "dt": cfg.dt,
                "picard_tol": cfg.picard_tol, "picard_max_iter": cfg.picard_max_iter,
                "window_safety": cfg.window_safety,
                "admissibility_tol": cfg.admissibility_tol, "pauli_bound": cfg.pauli_bound,
            },
            "tolerances": dict(self.tolerances),
            "defaults_applied": dict(self.defaults),
            "schema_version": SCHEMA_VERSION,
        }


def tolerance_override():
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ConfigurationError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not (value > 0 and math.isfinite(value)):
        raise ConfigurationError(f"{TOL_ENV} must be a positive finite number, got {raw!r}")
    return value


def load_scenario(path) -> Scenario:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario: {exc}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"not UTF-8 JSON: {exc}") from None
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    sc = parse_scenario(doc, default_name=stem)
    sc.sha256 = hashlib.sha256(raw).hexdigest()
    sc.source = os.path.basename(str(path))
    return sc


def _schema_check(doc):
    errors = list(_VALIDATOR.iter_errors(doc))
    if errors:
        # deepest error first; ties broken by path text so the choice is stable
        err = min(errors, key=lambda e: (-len(e.absolute_path), _pointer(e.absolute_path)))
        raise ConfigurationError(err.message, _pointer(err.absolute_path) or "/")


def parse_scenario(doc: dict, default_name="scenario") -> Scenario:
    """Validate a scenario document and build the model objects it describes."""
    _schema_check(doc)
    defaults = {}
    model = doc["model"]
    energies = doc["basis"]["energies"]
    n = len(energies)
    basis = OrbitalBasis(energies)
    drive = _parse_drive(doc.get("drive", {"kind": "none"}), n)
    if "drive" not in doc:
        defaults["drive"] = "none"
    try:
        hamiltonian = HamiltonianSpec(basis, drive)
    except ConfigurationError as exc:
        raise ConfigurationError(str(exc), "/drive") from None

    rates = _parse_rates(doc.get("rates", {}), n, model)
    rho0, qp = _parse_initial(doc["initial"], n, model)

    jumps = None
    if model in ("lindblad", "lindblad_fermion"):
        if "jumps" in doc:
            jumps = JumpOperatorSet(tuple(
                _cmatrix(v, f"/jumps/{j}", n) for j, v in enumerate(doc["jumps"])
            ))
        else:
            jumps = jump_ops_from_rates(rates)
            defaults["jumps"] = "built from rates"
    elif "jumps" in doc:
        raise ConfigurationError(f"jump operators are only used by Lindblad models, not {model!r}",
                                 "/jumps")

    relaxation = _parse_relaxation(doc.get("relaxation"), n, model)
    if model == "bcs":
        if n % 2:
            raise ConfigurationError("bcs model needs an even number of energies", "/basis/energies")
    rate_bound = _rate_bound(model, rates, jumps, relaxation)

    integ = dict(doc.get("integrator", {}))
    for key, val in (("method", "rk4"), ("t0", 0.0), ("tf", 1.0)):
        if key not in integ:
            integ[key] = val
            defaults[key] = val
    if integ["method"] == "picard" and model != "fermion":
        raise ConfigurationError("the Picard integrator is implemented for the fermion model only",
                                 "/integrator/method")
    if not integ["tf"] > integ["t0"]:
        raise ConfigurationError("tf must exceed t0", "/integrator/tf")
    if "dt" not in integ:
        integ["dt"] = default_dt(rate_bound, sup_norm(hamiltonian(integ["t0"])))
        defaults["dt"] = integ["dt"]
    cfg = IntegrationConfig(
        t0=float(integ["t0"]), tf=float(integ["tf"]), dt=float(integ["dt"]),
        method=integ["method"],
        picard_tol=float(integ.get("picard_tol", 1e-10)),
        picard_max_iter=int(integ.get("picard_max_iter", 50)),
        window_safety=float(integ.get("window_safety", 0.5)),
        pauli_bound=model not in LINEAR_MODELS,
    )
    tolerances = resolve_tolerances(doc.get("tolerances"), tolerance_override())
    eps = tuple(doc.get("compare", {}).get("eps", (0.2, 0.1, 0.05, 0.025)))
    name = doc.get("name", default_name)
    output = {"csv": f"{name}.csv", "report": f"{name}.report.json"}
    output.update(doc.get("output", {}))
    return Scenario(name, model, hamiltonian, rates, rho0, cfg, tolerances, rate_bound,
                    jumps, relaxation, qp, eps, output, defaults=defaults)


def _parse_drive(d, n):
    kind = d["kind"]
    need = {"constant": ("matrix",), "sinusoidal": ("amplitude", "frequency"),
            "piecewise": ("times", "matrices")}.get(kind, ())
    for key in need:
        if key not in d:
            raise ConfigurationError(f"'{key}' is required for a {kind} drive", "/drive")
    if kind == "none":
        return NoDrive()
    if kind == "constant":
        return ConstantDrive(_hermitian(d["matrix"], "/drive/matrix", n))
    if kind == "sinusoidal":
        return SinusoidalDrive(_hermitian(d["amplitude"], "/drive/amplitude", n),
                               d["frequency"], d.get("phase", 0.0))
    mats = tuple(_hermitian(m, f"/drive/matrices/{j}", n) for j, m in enumerate(d["matrices"]))
    return PiecewiseDrive(tuple(d["times"]), mats)


def _parse_rates(r, n, model):
    omega = _rmatrix(r["omega"], "/rates/omega", n) if "omega" in r else None
    w = _rmatrix(r["w"], "/rates/w", n) if "w" in r else None
    gamma = None
    if "gamma" in r:
        gamma = _rmatrix(r["gamma"], "/rates/gamma", n)
        if not np.array_equal(gamma, gamma.T):
            raise ConfigurationError("gamma must be symmetric", "/rates/gamma")
    if model in ("markoff", "pauli", "lindblad"):
        table = w if w is not None else omega
        if table is None and not (model == "lindblad"):
            raise ConfigurationError(f"model {model!r} needs rates.w or rates.omega", "/rates")
    elif model in ("fermion", "hole", "fermi_pauli", "lindblad_fermion"):
        table = omega
        if table is None and model != "lindblad_fermion":
            raise ConfigurationError(f"model {model!r} needs rates.omega", "/rates")
    else:
        return None
    if table is None:
        return None
    return RateTable(table, gamma)


def _parse_initial(init, n, model):
    keys = [k for k in ("occupations", "matrix", "rho_s") if k in init]
    if model == "bcs":
        if "rho_s" not in init:
            raise ConfigurationError("bcs model needs initial.rho_s and initial.kappa_s", "/initial")
        ns = n // 2
        rho_s = _hermitian(init["rho_s"], "/initial/rho_s")
        if rho_s.shape[0] != ns:
            raise ConfigurationError(f"has dimension {rho_s.shape[0]}, expected half of {n}",
                                     "/initial/rho_s")
        kappa = _cmatrix(init.get("kappa_s", [[0] * ns for _ in range(ns)]), "/initial/kappa_s")
        if kappa.shape[0] != ns:
            raise ConfigurationError(f"has dimension {kappa.shape[0]}, /initial/rho_s has {ns}",
                                     "/initial/kappa_s")
        try:
            qp = assemble_quasiparticle(rho_s, kappa)
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), "/initial") from None
        if not qp.admissible:
            raise ConfigurationError(f"quasiparticle matrix spectrum {qp.bounds} leaves [0, 1]",
                                     "/initial")
        return qp.assembled.copy(), qp
    if len(keys) != 1 or keys[0] == "rho_s":
        raise ConfigurationError("give exactly one of initial.occupations or initial.matrix",
                                 "/initial")
    if "occupations" in init:
        c = init["occupations"]
        if len(c) != n:
            raise ConfigurationError(f"has length {len(c)}, /basis/energies has {n}",
                                     "/initial/occupations")
        return density_from_occupations(c), None
    rho = _hermitian(init["matrix"], "/initial/matrix", n)
    lo, hi = spectral_bounds(rho)
    upper = math.inf if model in LINEAR_MODELS else 1.0
    if lo < -1e-9 or hi > upper + 1e-9:
        raise ConfigurationError(f"initial state spectrum [{lo:.6g}, {hi:.6g}] is not admissible",
                                 "/initial/matrix")
    if model in OCCUPATION_MODELS and np.max(np.abs(rho - np.diag(rho.diagonal()))) > 0:
        raise ConfigurationError("rate-equation models need a diagonal initial state",
                                 "/initial/matrix")
    return rho, None


def _parse_relaxation(rel, n, model):
    if model not in ("general", "bcs"):
        if rel is not None:
            raise ConfigurationError(f"relaxation operators are not used by model {model!r}",
                                     "/relaxation")
        return None
    need = ("a_p", "a_pbar") if model == "general" else ("a_p",)
    rel = rel or {}
    for key in need:
        if key not in rel:
            raise ConfigurationError(f"model {model!r} needs relaxation.{key}", "/relaxation")
    if model == "bcs" and "a_pbar" in rel:
        raise ConfigurationError("a_pbar is derived from a_p for the bcs model",
                                 "/relaxation/a_pbar")
    out = []
    for key in need:
        a = _hermitian(rel[key], f"/relaxation/{key}", n)
        hi = spectral_bounds(a)[1]
        if hi > 1e-12 * max(1.0, sup_norm(a)):
            raise ConfigurationError(f"-{key} must be positive semidefinite", f"/relaxation/{key}")
        out.append(a)
    return tuple(out)


def _rate_bound(model, rates, jumps, relaxation):
    """M for the dt rule: from the rate table, or from operator norms where there is none."""
    if rates is not None:
        return transition_bound_M(rates)
    if jumps is not None and len(jumps):
        return 0.5 * sup_norm(hermitize(sum(v.conj().T @ v for v in jumps))[0])
    if relaxation is not None:
        return max(sup_norm(a) for a in relaxation)
    return 0.0


# --- running -----------------------------------------------------------------


def _occupation_trajectory(sc: Scenario) -> Trajectory:
    fn = pauli_rhs if sc.model == "pauli" else fermi_pauli_rhs
    if not isinstance(sc.hamiltonian.drive, NoDrive):
        raise ConfigurationError("rate-equation models take no drive", "/drive")
    upper = math.inf if sc.model == "pauli" else 1.0 + 1e-9
    times = time_grid(sc.cfg.t0, sc.cfg.tf, sc.cfg.dt)
    occ = integrate_occupations(lambda f: fn(f, sc.rates), sc.rho0.diagonal().real, sc.cfg,
                                times=times, upper=upper)
    states = np.array([np.diag(f) for f in occ.f], dtype=np.complex128)
    return Trajectory(occ.times, states, model=sc.model)


def build_rhs(sc: Scenario):
    h = sc.hamiltonian
    if sc.model == "fermion":
        return FermionModel(h, sc.rates)
    if sc.model == "hole":
        return HoleModel(h, sc.rates)
    if sc.model == "markoff":
        return rhs_from(markoff_rhs, h, sc.rates, include_dephasing=sc.rates.gamma is not None)
    if sc.model == "lindblad":
        return rhs_from(lindblad_rhs, h, sc.jumps)
    if sc.model == "lindblad_fermion":
        return rhs_from(lindblad_fermion_rhs, h, sc.jumps)
    if sc.model == "general":
        a_p, a_pbar = sc.relaxation
        return rhs_from(general_rhs, h, a_p, a_pbar, check=False)
    raise ConfigurationError(f"model {sc.model!r} has no matrix right-hand side")


@dataclass
class RunResult:
    trajectory: Trajectory | None
    report: object
    failure: str | None = None
    picard: dict | None = None
    failure_time: float | None = None

    @property
    def passed(self) -> bool:
        return self.failure is None and self.report is not None and self.report.passed


def simulate(sc: Scenario) -> RunResult:
    """Integrate the scenario and evaluate its invariants.

    Numerical failures (divergence, lost block structure, Picard stall) are
    returned as a failed result, never raised.
    """
    picard = None
    rates = sc.rates
    try:
        if sc.model in OCCUPATION_MODELS:
            traj = _occupation_trajectory(sc)
        elif sc.model == "bcs":
            traj = evolve_bcs(sc.quasiparticle, sc.hamiltonian, sc.relaxation[0], sc.cfg)
        elif sc.cfg.method == "picard":
            traj, rep = integrate_picard(sc.rho0, sc.hamiltonian, rates, sc.cfg)
            picard = rep.as_dict()
        else:
            rho0 = hole_transform(sc.rho0) if sc.model == "hole" else sc.rho0
            traj = integrate_rk4(build_rhs(sc), rho0, sc.cfg, stop_on_divergence=True)
    except FermikinError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        t = getattr(exc, "time", None)
        return RunResult(None, None, f"{type(exc).__name__}: {exc}", picard,
                         None if t is None else float(t))
    report = build_report(traj, sc.tolerances, rates=rates, model=sc.model)
    return RunResult(traj, report, None, picard)


__all__ = [
    "MODELS",
    "SCHEMA",
    "ORIENTATION",
    "TOL_ENV",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "tolerance_override",
    "build_rhs",
    "simulate",
    "RunResult",
]
