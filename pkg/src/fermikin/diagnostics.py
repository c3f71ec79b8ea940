"""Numerical certificates on a computed trajectory.

Checks admissibility (0 <= rho <= I), trace balance, the coherence bound
|rho_nm|^2 <= rho_nn rho_mm and, for the linear equation, the closed-form
decay of phases. ``InvariantReport`` bundles the per-sample checks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from fermikin.core import OrbitalBasis, RateTable, hermitize, spectral_bounds, sup_norm
from fermikin.errors import ContractViolation
from fermikin.generators import a1_diagonal, a2_diagonal, gain_factor
from fermikin.integrators import Trajectory

DEFAULT_TOLERANCES = {
    "admissibility": 1e-8,
    "trace": 1e-8,  # multiplied by N
    "coherence": 1e-8,
    "trace_balance": 1e-8,
}

# models whose evolution keeps rho <= I (Pauli bound) on top of rho >= 0
PAULI_MODELS = ("fermion", "hole", "general", "lindblad_fermion", "fermi_pauli", "bcs")
# models whose generator conserves the trace
TRACE_MODELS = ("fermion", "hole", "markoff", "lindblad", "lindblad_fermion", "pauli",
                "fermi_pauli", "bcs")


def check_admissible(rho, tol: float = DEFAULT_TOLERANCES["admissibility"]):
    lo, hi = spectral_bounds(rho)
    return (lo >= -tol and hi <= 1.0 + tol), lo, hi


def _off(a):
    a = np.array(a, dtype=np.complex128)
    np.fill_diagonal(a, 0.0)
    return a


def _require_diagnostics(traj: Trajectory, *keys):
    missing = [k for k in keys if k not in traj.diagnostics]
    if missing:
        raise ContractViolation(f"trajectory is missing diagnostics {missing}")


def trace_balance_profile(traj: Trajectory, rates: RateTable) -> np.ndarray:
    """Pointwise |tr rho(t) - tr rho(t0) - int_t0^t (gain - loss)| on the grid.

    gain = 2 tr((I - rho) A2(rho)), loss = 2 tr(rho A1(rho)); both integrals use
    cumulative Simpson quadrature on the sampled occupations.
    """
    _require_diagnostics(traj, "trace")
    if traj.model not in (None, "fermion", "hole"):
        raise ContractViolation(f"trace balance needs a fermion-mode trajectory, got {traj.model!r}")
    omega = rates.omega
    if omega.shape[0] != traj.n:
        raise ContractViolation(f"rates are {omega.shape[0]}-dimensional, trajectory is {traj.n}")
    f = traj.occupations
    gain = np.array([2.0 * np.dot(1.0 - fk, a2_diagonal(omega, fk)) for fk in f])
    loss = np.array([2.0 * np.dot(fk, a1_diagonal(omega, fk)) for fk in f])
    trace = np.asarray(traj.diagnostics["trace"], dtype=float)
    if traj.times.size < 2:
        return np.zeros(traj.times.size)
    net = cumulative_simpson(gain, x=traj.times, initial=0.0) - cumulative_simpson(
        loss, x=traj.times, initial=0.0
    )
    return np.abs(trace - trace[0] - net)


def trace_balance_residual(traj: Trajectory, rates: RateTable) -> float:
    return float(np.max(trace_balance_profile(traj, rates)))


def coherence_violation(rho) -> float:
    """max(0, max_{n != m} |rho_nm| - sqrt(rho_nn rho_mm))."""
    rho = np.asarray(rho)
    f = np.clip(rho.diagonal().real, 0.0, None)
    bound = np.sqrt(np.outer(f, f))
    excess = np.abs(_off(rho)) - bound
    np.fill_diagonal(excess, -np.inf)
    return float(max(0.0, excess.max())) if rho.shape[0] > 1 else 0.0


def predicted_phase_law(rates_w: RateTable, basis: OrbitalBasis, n: int, m: int,
                        gamma=None):
    """(decay rate, rotation frequency) of rho[n, m] under the linear equation with V = 0."""
    w = rates_w.omega
    d = 0.5 * w.sum(axis=0)
    rate = d[n] + d[m]
    if gamma is not None:
        rate += float(np.asarray(gamma)[n, m])
    e = basis.energies
    return float(rate), float(e[m] - e[n])


def _rel_err(observed, predicted):
    if predicted == 0.0:
        return abs(observed)
    return abs(observed - predicted) / abs(predicted)


def phase_decay_check(traj: Trajectory, rates_w: RateTable, basis: OrbitalBasis,
                      gamma=None, min_amplitude=1e-6) -> float:
    """Worst relative error of fitted decay rates and frequencies of the coherences.

    Each pair with |rho0[n, m]| > ``min_amplitude`` is fitted by linear least
    squares: log|rho[n, m]| against t for the rate and the unwrapped phase for
    the frequency. Samples with |rho[n, m]| <= 1e-10 are dropped. ``gamma``
    adds pure dephasing to the prediction (pass ``rates_w.gamma`` when the
    trajectory was generated with dephasing). Errors are absolute where the
    prediction is zero.
    """
    if traj.model not in (None, "markoff"):
        raise ContractViolation(f"phase decay law holds for Markoff trajectories, got {traj.model!r}")
    if basis.n_orbitals != traj.n or rates_w.n != traj.n:
        raise ContractViolation("basis, rates and trajectory dimensions disagree")
    worst = 0.0
    t = traj.times
    for n in range(traj.n):
        for m in range(n + 1, traj.n):
            c = traj.states[:, n, m]
            if abs(c[0]) <= min_amplitude:
                continue
            keep = np.abs(c) > 1e-10
            if keep.sum() < 2:
                continue
            tk = t[keep]
            slope_mag = np.polyfit(tk, np.log(np.abs(c[keep])), 1)[0]
            slope_phase = np.polyfit(tk, np.unwrap(np.angle(c[keep])), 1)[0]
            rate, freq = predicted_phase_law(rates_w, basis, n, m, gamma)
            worst = max(worst, _rel_err(-slope_mag, rate), _rel_err(slope_phase, freq))
    return worst


def decoherence_from_gain(rho, rates: RateTable):
    """Off-diagonal sup norms of the fermionic gain term and of the Markoff gain term.

    The Markoff gain diag(w f) has no off-diagonal part, so the second entry is
    zero by construction; it is computed anyway as a cross-check.
    """
    rho = hermitize(rho)[0]
    fermion = sup_norm(hermitize(_off(gain_factor(rho, rates)))[0])
    markoff_gain = np.diag(rates.omega @ rho.diagonal().real).astype(np.complex128)
    markoff = sup_norm(hermitize(_off(markoff_gain))[0])
    return fermion, markoff


def resolve_tolerances(overrides=None, global_override=None) -> dict:
    """Default tolerances, updated by ``overrides`` and then replaced wholesale by
    ``global_override`` (the FERMIKIN_TOL_OVERRIDE value) when given."""
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in (overrides or {}).items():
        if k not in tol:
            raise ContractViolation(f"unknown tolerance {k!r}")
        tol[k] = float(v)
    if global_override is not None:
        tol = {k: float(global_override) for k in tol}
    return tol


@dataclass
class InvariantReport:
    times: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    trace: np.ndarray
    max_coherence_violation: np.ndarray | None
    trace_balance_residual: np.ndarray | None
    tolerances: dict
    n: int
    pauli_bound: bool = True
    trace_conserved: bool = True
    extra_failures: list = field(default_factory=list)

    def __len__(self):
        return self.times.size

    def _violations(self):
        tol = self.tolerances
        # NaN samples (a run that blew up) count as violations
        bad = ~(self.lambda_min >= -tol["admissibility"])
        if self.pauli_bound:
            bad |= ~(self.lambda_max <= 1.0 + tol["admissibility"])
        if self.trace_conserved:
            bad |= ~(np.abs(self.trace - self.trace[0]) <= tol["trace"] * self.n)
        if self.max_coherence_violation is not None:
            bad |= self.max_coherence_violation > tol["coherence"]
        if self.trace_balance_residual is not None:
            bad |= self.trace_balance_residual > tol["trace_balance"]
        return bad

    @property
    def passed(self) -> bool:
        return not self._violations().any() and not self.extra_failures

    @property
    def first_violation_time(self):
        bad = np.nonzero(self._violations())[0]
        return float(self.times[bad[0]]) if bad.size else None

    def summary(self) -> dict:
        out = {
            "passed": self.passed,
            "first_violation_time": self.first_violation_time,
            "worst_lambda_min": _worst(self.lambda_min, np.min),
            "worst_lambda_max": _worst(self.lambda_max, np.max),
            "max_trace_drift": _worst(np.abs(self.trace - self.trace[0]), np.max),
            "max_coherence_violation": (
                None if self.max_coherence_violation is None
                else _worst(self.max_coherence_violation, np.max)
            ),
            "pauli_bound_checked": self.pauli_bound,
            "trace_conservation_checked": self.trace_conserved,
            "failures": list(self.extra_failures),
        }
        if self.trace_balance_residual is not None:
            out["max_trace_balance_residual"] = _worst(self.trace_balance_residual, np.max)
        return out

    def records(self) -> list:
        rows = []
        for k in range(self.times.size):
            rows.append({
                "t": float(self.times[k]),
                "lambda_min": _num(self.lambda_min[k]),
                "lambda_max": _num(self.lambda_max[k]),
                "trace": _num(self.trace[k]),
                "max_coherence_violation": (
                    None if self.max_coherence_violation is None
                    else _num(self.max_coherence_violation[k])
                ),
                "trace_balance_residual": (
                    None if self.trace_balance_residual is None
                    else _num(self.trace_balance_residual[k])
                ),
            })
        return rows

    def as_dict(self) -> dict:
        return {"tolerances": dict(self.tolerances), "summary": self.summary(),
                "records": self.records()}

    def to_json(self, **extra) -> str:
        doc = self.as_dict()
        doc.update(extra)
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, default=_jsonable)


def _num(x):
    # JSON has no NaN/inf; non-finite samples are written as null
    x = float(x)
    return x if np.isfinite(x) else None


def _worst(values, pick):
    values = np.asarray(values, dtype=float)
    if values.size == 0 or not np.all(np.isfinite(values)):
        return None
    return float(pick(values))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def build_report(traj: Trajectory, tolerances=None, rates: RateTable | None = None,
                 model: str | None = None, coherence: bool = True) -> InvariantReport:
    """Evaluate every applicable invariant at every sample of ``traj``.

    The Pauli upper bound and trace conservation are only checked for models
    that guarantee them; the trace balance needs fermion-mode rates.
    ``coherence=False`` skips the coherence bound (for trajectories rebuilt
    from occupations only).
    """
    tol = dict(DEFAULT_TOLERANCES) if tolerances is None else dict(tolerances)
    model = model or traj.model
    _require_diagnostics(traj, "lambda_min", "lambda_max", "trace")
    balance = None
    if rates is not None and model in ("fermion", "hole") and traj.diverged_at is None:
        eff = rates.transposed() if model == "hole" else rates
        balance = trace_balance_profile(traj, eff)
    coh = np.array([coherence_violation(s) for s in traj.states]) if coherence else None
    return InvariantReport(
        times=traj.times.copy(),
        lambda_min=np.asarray(traj.diagnostics["lambda_min"], dtype=float),
        lambda_max=np.asarray(traj.diagnostics["lambda_max"], dtype=float),
        trace=np.asarray(traj.diagnostics["trace"], dtype=float),
        max_coherence_violation=coh,
        trace_balance_residual=balance,
        tolerances=tol,
        n=traj.n,
        pauli_bound=model is None or model in PAULI_MODELS,
        trace_conserved=model is None or model in TRACE_MODELS,
        extra_failures=(
            [] if traj.diverged_at is None
            else [f"integration diverged at t={float(traj.diverged_at)!r}"]
        ),
    )


__all__ = [
    "DEFAULT_TOLERANCES",
    "check_admissible",
    "trace_balance_profile",
    "trace_balance_residual",
    "coherence_violation",
    "predicted_phase_law",
    "phase_decay_check",
    "decoherence_from_gain",
    "resolve_tolerances",
    "InvariantReport",
    "build_report",
]
