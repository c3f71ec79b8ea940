"""Time evolution: a direct RK4 integrator and the Picard/contraction scheme.

The Picard scheme freezes the fermionic rates at the previous iterate Omega,
so each iterate solves the linear equation

    dL/dt = i[L, H] - {L, A1(Omega) + A2(Omega)} + 2 A2(Omega),

whose solution is written with the non-Hermitian propagator K_Omega
(``i dK/dt = (H - i A1 - i A2) K``) as

    L(t) = K(t;t0) rho0 K(t;t0)^H + 2 int_t0^t K(t;s) A2(Omega(s)) K(t;s)^H ds.

Iterating this map on windows shorter than 1/(4M) converges to the solution
of the nonlinear equation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fermikin._backend import kernels
from fermikin.core import (
    HamiltonianSpec,
    RateTable,
    hermitize,
    eigvalsh,
    offdiag_norm,
    sup_norm,
)
from fermikin.errors import (
    ContractViolation,
    IntegrationDiverged,
    PicardNotConverged,
)
from fermikin.generators import a1_diagonal, a2_diagonal, fermion_rhs, transition_bound_M

METHODS = ("rk4", "picard")
HARD_ERROR_FACTOR = 100.0
# Contraction ratios are only measured while both deltas sit above roundoff.
RATIO_NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class IntegrationConfig:
    t0: float = 0.0
    tf: float = 1.0
    dt: float | None = None
    method: str = "rk4"
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    window_safety: float = 0.5
    admissibility_tol: float = 1e-9
    # False for linear models (Markoff, Lindblad, Pauli) that only keep rho >= 0.
    pauli_bound: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.tf)) or not self.t0 < self.tf:
            raise ContractViolation(f"need finite t0 < tf, got t0={self.t0}, tf={self.tf}")
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ContractViolation(f"dt must be positive, got {self.dt}")
        if self.method not in METHODS:
            raise ContractViolation(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.window_safety < 1.0:
            raise ContractViolation("window_safety must lie in (0, 1)")
        if self.picard_tol <= 0 or self.picard_max_iter < 1:
            raise ContractViolation("picard_tol must be positive and picard_max_iter >= 1")

    @property
    def span(self) -> float:
        return self.tf - self.t0


def contraction_window(rate_bound: float, window_safety: float = 0.5) -> float:
    """eta / (4 M); infinite when there is no relaxation."""
    if rate_bound <= 0:
        return math.inf
    return window_safety / (4.0 * rate_bound)


def default_dt(rate_bound: float, h_norm: float, window_safety: float = 0.5) -> float:
    """window / 20, further capped at 0.05 / max(1, ||H(t0)||)."""
    cap = 0.05 / max(1.0, h_norm)
    window = contraction_window(rate_bound, window_safety)
    return min(window / 20.0, cap) if math.isfinite(window) else cap


def max_stable_dt(rate_bound: float, h_norm: float, window_safety: float = 0.5) -> float:
    """Upper limit on dt that the RK4 driver is documented to handle."""
    return min(contraction_window(rate_bound, window_safety), 0.05 / max(1.0, h_norm))


def time_grid(t0, tf, dt):
    n = max(1, math.ceil((tf - t0) / dt - 1e-9))
    return np.linspace(t0, tf, n + 1)


@dataclass
class Trajectory:
    """States sampled on an increasing time grid, with per-sample diagnostics.

    ``diagnostics`` holds arrays ``lambda_min``, ``lambda_max``, ``trace`` and
    ``offdiag_norm`` (Frobenius norm of the off-diagonal part).
    """

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    # name of the generating equation ("fermion", "markoff", ...), when known
    model: str | None = None
    # time of the sample that tripped the hard admissibility error, if the run was cut short
    diverged_at: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=np.complex128)
        if self.states.shape[0] != self.times.size:
            raise ContractViolation("one state per time sample required")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ContractViolation("trajectory times must be strictly increasing")
        if not self.diagnostics:
            self.diagnostics = compute_diagnostics(self.states)

    def __len__(self):
        return self.times.size

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def occupations(self) -> np.ndarray:
        return np.einsum("kii->ki", self.states).real

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def occupation_at(self, t):
        """Diagonal of the state at ``t``, linearly interpolated between samples."""
        f = self.occupations
        return np.array([np.interp(t, self.times, f[:, i]) for i in range(f.shape[1])])

    def window(self, start, stop) -> Trajectory:
        sl = slice(start, stop)
        return Trajectory(
            self.times[sl],
            self.states[sl],
            {k: v[sl] for k, v in self.diagnostics.items()},
            self.model,
        )


def state_diagnostics(rho):
    w = eigvalsh(rho)
    return float(w[0]), float(w[-1]), float(np.trace(rho).real), offdiag_norm(rho)


def compute_diagnostics(states):
    rows = [state_diagnostics(s) for s in states]
    cols = list(zip(*rows)) if rows else [(), (), (), ()]
    names = ("lambda_min", "lambda_max", "trace", "offdiag_norm")
    return {k: np.array(c, dtype=float) for k, c in zip(names, cols)}


def _check_step(t, rho, diag, cfg):
    lo, hi = diag[0], diag[1]
    hard = HARD_ERROR_FACTOR * cfg.admissibility_tol
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise IntegrationDiverged("state is no longer finite", t, lo, hi)
    if lo < -hard or (cfg.pauli_bound and hi > 1.0 + hard):
        raise IntegrationDiverged(
            f"spectrum [{lo:.6g}, {hi:.6g}] left the admissible set", t, lo, hi
        )


class FermionModel:
    """RHS callable for the nonlinear fermionic equation with a compiled RK4 step."""

    model = "fermion"

    def __init__(self, hamiltonian: HamiltonianSpec, rates: RateTable):
        self.hamiltonian = hamiltonian
        self.rates = rates
        self._omega = np.ascontiguousarray(rates.omega)

    def __call__(self, t, rho):
        return fermion_rhs(rho, self.hamiltonian(t), self.rates)

    def rk4_step(self, t, rho, dt):
        h = self.hamiltonian
        return kernels.fermion_rk4_step(rho, h(t), h(t + 0.5 * dt), h(t + dt), self._omega, dt)


def rhs_from(fn, hamiltonian, *args, **kwargs):
    """Adapt ``fn(rho, H, *args)`` to the ``rhs(t, rho)`` signature."""

    def rhs(t, rho):
        return fn(rho, hamiltonian(t), *args, **kwargs)

    name = getattr(fn, "__name__", "")
    rhs.model = name[:-4] if name.endswith("_rhs") else None
    return rhs


def rk4_step(rhs, t, rho, dt):
    fast = getattr(rhs, "rk4_step", None)
    if fast is not None:
        return fast(t, rho, dt)
    k1 = rhs(t, rho)
    k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2)
    k4 = rhs(t + dt, rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(rhs, rho0, cfg: IntegrationConfig, times=None, check=None,
                  stop_on_divergence=False) -> Trajectory:
    """Classical RK4 on ``d rho/dt = rhs(t, rho)``.

    Every stored state is hermitized and its spectrum recorded. A spectrum
    outside [-100 tol, 1 + 100 tol] (lower bound only when
    ``cfg.pauli_bound`` is false) raises ``IntegrationDiverged``; with
    ``stop_on_divergence`` the trajectory up to and including the offending
    sample is returned instead, with ``diverged_at`` set.
    ``check(t, rho)`` is an optional extra per-step hook.
    """
    rho = hermitize(rho0)[0]
    if times is None:
        if cfg.dt is None:
            raise ContractViolation("integrate_rk4 needs cfg.dt or an explicit time grid")
        times = time_grid(cfg.t0, cfg.tf, cfg.dt)
    times = np.asarray(times, dtype=float)
    states = np.empty((times.size,) + rho.shape, dtype=np.complex128)
    diags = []
    model = getattr(rhs, "model", None)
    k = 0
    try:
        states[0] = rho
        d = state_diagnostics(rho)
        diags.append(d)
        _check_step(times[0], rho, d, cfg)
        for k in range(1, times.size):
            t = times[k - 1]
            with np.errstate(over="ignore", invalid="ignore"):
                rho = hermitize(rk4_step(rhs, t, rho, times[k] - t))[0]
            d = _safe_diagnostics(rho)
            states[k] = rho
            diags.append(d)
            _check_step(times[k], rho, d, cfg)
            if check is not None:
                check(times[k], rho)
    except IntegrationDiverged as exc:
        if not stop_on_divergence:
            raise
        stop = k + 1
        return Trajectory(times[:stop], states[:stop], _diag_dict(diags), model, exc.time)
    return Trajectory(times, states, _diag_dict(diags), model)


def _safe_diagnostics(rho):
    if not np.all(np.isfinite(rho)):
        return math.nan, math.nan, math.nan, math.nan
    return state_diagnostics(rho)


def _diag_dict(rows):
    names = ("lambda_min", "lambda_max", "trace", "offdiag_norm")
    return {k: np.array(c, dtype=float) for k, c in zip(names, zip(*rows))}


# --- non-Hermitian propagator and the Duhamel map ---------------------------


def effective_hamiltonian(h, pair) -> np.ndarray:
    """H - i A1 - i A2 for a frozen ``RelaxationPair``."""
    h = np.asarray(h, dtype=np.complex128)
    if pair.a1.shape != h.shape or pair.a2.shape != h.shape:
        raise ContractViolation("Hamiltonian and relaxation pair dimensions differ")
    return h - 1j * (pair.a1 + pair.a2)


def _heff_from_occupations(h, omega, f):
    a = a1_diagonal(omega, f) + a2_diagonal(omega, f)
    return h - 1j * np.diag(a)


def _k_rk4(g0, gm, g1, k, h):
    """One RK4 step of dK/dt = G(t) K, with G = -i H_eff."""
    k1 = g0 @ k
    k2 = gm @ (k + 0.5 * h * k1)
    k3 = gm @ (k + 0.5 * h * k2)
    k4 = g1 @ (k + h * k3)
    return k + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _span_check(traj, *ts):
    lo, hi = traj.times[0], traj.times[-1]
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    for t in ts:
        if t < lo - tol or t > hi + tol:
            raise ContractViolation(f"time {t} outside trajectory span [{lo}, {hi}]")


def propagate_K(omega_traj: Trajectory, hamiltonian: HamiltonianSpec, rates: RateTable,
                t: float, t_prime: float, substep: float) -> np.ndarray:
    """K_Omega(t; t') by RK4 at step ``substep``.

    Omega's diagonal is interpolated linearly between trajectory samples.
    Returns the identity for t <= t'.
    """
    _span_check(omega_traj, t, t_prime)
    n = omega_traj.n
    if t <= t_prime:
        return np.eye(n, dtype=np.complex128)
    if substep <= 0:
        raise ContractViolation("substep must be positive")
    omega = rates.omega
    steps = max(1, math.ceil((t - t_prime) / substep - 1e-9))
    grid = np.linspace(t_prime, t, steps + 1)

    def g(s):
        return -1j * _heff_from_occupations(hamiltonian(s), omega, omega_traj.occupation_at(s))

    k = np.eye(n, dtype=np.complex128)
    g_prev = g(grid[0])
    for a, b in zip(grid[:-1], grid[1:]):
        g_next = g(b)
        k = _k_rk4(g_prev, g(0.5 * (a + b)), g_next, k, b - a)
        g_prev = g_next
    return k


class _WindowOperators:
    """Hamiltonian samples for one window grid, reused across Picard iterations."""

    def __init__(self, hamiltonian, times):
        self.times = times
        h = times[1] - times[0] if times.size > 1 else 0.0
        self.h = h
        self.nodes = np.array([hamiltonian(t) for t in times])
        self.mid = np.array([hamiltonian(t + 0.5 * h) for t in times[:-1]])
        # each interval is propagated in two RK4 half steps
        self.q1 = np.array([hamiltonian(t + 0.25 * h) for t in times[:-1]])
        self.q3 = np.array([hamiltonian(t + 0.75 * h) for t in times[:-1]])


def _interp_inside(f, x):
    """Values of node data ``f`` at t_k + x h for every interval k.

    Cubic Lagrange interpolation on the four nearest nodes (shifted inward at
    the window edges), so interpolation error stays below the RK4 error.
    """
    n_nodes = f.shape[0]
    p = min(4, n_nodes)
    out = np.empty((n_nodes - 1,) + f.shape[1:])
    for k in range(n_nodes - 1):
        start = min(max(k - 1, 0), n_nodes - p)
        nodes = np.arange(start, start + p, dtype=float)
        at = k + x
        acc = 0.0
        for j, xj in enumerate(nodes):
            others = np.delete(nodes, j)
            acc = acc + np.prod((at - others) / (xj - others)) * f[start + j]
        out[k] = acc
    return out


def _duhamel_window(ops: _WindowOperators, omega, f_omega, rho0):
    """Duhamel solution on one uniform grid given Omega's occupations per node.

    Each interval [t_{k-1}, t_k] is split at its midpoint: the propagator is
    the product of two RK4 half steps and the source integral is one Simpson
    panel on the half grid. All quadrature weights are positive, so each
    sample is a positive combination of K X K^H terms.
    """
    n_int = ops.times.size - 1
    h = ops.h
    n = rho0.shape[0]
    eye = np.eye(n, dtype=np.complex128)

    def rates_at(f):
        return np.array([a1_diagonal(omega, x) + a2_diagonal(omega, x) for x in f])

    a_node = rates_at(f_omega)
    b_node = np.array([np.diag(2.0 * a2_diagonal(omega, f)) for f in f_omega])
    f_mid = _interp_inside(f_omega, 0.5)
    a_mid = rates_at(f_mid)
    b_mid = np.array([np.diag(2.0 * a2_diagonal(omega, f)) for f in f_mid])
    a_q1 = rates_at(_interp_inside(f_omega, 0.25))
    a_q3 = rates_at(_interp_inside(f_omega, 0.75))

    def g(hmat, a):
        return -1j * hmat - np.diag(a)

    props = []   # K(t_k; t_{k-1})
    halves = []  # K(t_k; t_k - h/2)
    for k in range(n_int):
        gm = g(ops.mid[k], a_mid[k])
        first = _k_rk4(g(ops.nodes[k], a_node[k]), g(ops.q1[k], a_q1[k]), gm, eye, 0.5 * h)
        second = _k_rk4(gm, g(ops.q3[k], a_q3[k]), g(ops.nodes[k + 1], a_node[k + 1]), eye, 0.5 * h)
        props.append(second @ first)
        halves.append(second)

    def sand(k, x):
        return k @ x @ k.conj().T

    out = np.empty((n_int + 1, n, n), dtype=np.complex128)
    out[0] = rho0
    for k in range(1, n_int + 1):
        p = props[k - 1]
        integral = (h / 6.0) * (sand(p, b_node[k - 1]) + 4.0 * sand(halves[k - 1], b_mid[k - 1])
                                + b_node[k])
        val = sand(p, out[k - 1]) + integral
        out[k] = hermitize(val)[0]
    return out


def duhamel_apply(omega_traj: Trajectory, rho0, hamiltonian: HamiltonianSpec,
                  rates: RateTable, cfg: IntegrationConfig | None = None) -> Trajectory:
    """Apply the contraction map F to ``omega_traj`` on its own time grid.

    The grid must be uniform.
    """
    times = omega_traj.times
    if times.size < 2:
        raise ContractViolation("duhamel_apply needs at least two samples")
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ContractViolation("duhamel_apply needs a uniform time grid")
    if cfg is not None:
        tol = 1e-9 * max(1.0, abs(cfg.t0), abs(cfg.tf))
        if abs(times[0] - cfg.t0) > tol or abs(times[-1] - cfg.tf) > tol:
            raise ContractViolation(
                f"Omega spans [{times[0]}, {times[-1]}], config spans [{cfg.t0}, {cfg.tf}]"
            )
    ops = _WindowOperators(hamiltonian, times)
    states = _duhamel_window(ops, rates.omega, omega_traj.occupations, hermitize(rho0)[0])
    return Trajectory(times, states)


@dataclass
class WindowReport:
    t_start: float
    t_end: float
    start_index: int
    stop_index: int
    iterations: int
    deltas: list
    ratios: list

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0


@dataclass
class PicardReport:
    rate_bound: float
    window_length: float
    windows: list

    @property
    def max_ratio(self) -> float:
        return max((w.max_ratio for w in self.windows), default=0.0)

    @property
    def iterations(self) -> list:
        return [w.iterations for w in self.windows]

    def as_dict(self):
        return {
            "rate_bound": self.rate_bound,
            "window_length": self.window_length,
            "max_ratio": self.max_ratio,
            "windows": [
                {
                    "t_start": w.t_start,
                    "t_end": w.t_end,
                    "iterations": w.iterations,
                    "deltas": list(w.deltas),
                    "ratios": list(w.ratios),
                }
                for w in self.windows
            ],
        }


def _sup_delta(a, b):
    return max(sup_norm(hermitize(x - y)[0]) for x, y in zip(a, b))


def picard_windows(cfg: IntegrationConfig, rate_bound: float, dt: float):
    """Window grids: length <= eta/(4M), uniform steps no longer than dt."""
    window = contraction_window(rate_bound, cfg.window_safety)
    grids = []
    t = cfg.t0
    while t < cfg.tf - 1e-12 * max(1.0, abs(cfg.tf)):
        end = min(t + window, cfg.tf)
        if cfg.tf - end < 1e-9 * window:
            end = cfg.tf
        n = max(1, math.ceil((end - t) / dt - 1e-9))
        grids.append(np.linspace(t, end, n + 1))
        t = end
    return grids


def integrate_picard(rho0, hamiltonian: HamiltonianSpec, rates: RateTable,
                     cfg: IntegrationConfig):
    """Solve the fermionic equation by Picard iteration of the Duhamel map.

    On each window the first iterate is the constant window-start state; the
    map is re-applied until successive iterates differ by at most
    ``cfg.picard_tol`` in sup norm over the window. Returns the chained
    trajectory and a ``PicardReport`` with per-window iteration counts and
    observed contraction ratios.
    """
    rate_bound = transition_bound_M(rates)
    dt = cfg.dt
    if dt is None:
        dt = default_dt(rate_bound, sup_norm(hamiltonian(cfg.t0)), cfg.window_safety)
    rho = hermitize(rho0)[0]
    omega = rates.omega
    all_times, all_states, windows = [], [], []
    index = 0
    for w_idx, grid in enumerate(picard_windows(cfg, rate_bound, dt)):
        ops = _WindowOperators(hamiltonian, grid)
        current = np.repeat(rho[None], grid.size, axis=0)
        deltas, ratios = [], []
        converged = False
        for it in range(1, cfg.picard_max_iter + 1):
            f_omega = np.einsum("kii->ki", current).real
            nxt = _duhamel_window(ops, omega, f_omega, rho)
            delta = _sup_delta(nxt, current)
            if deltas and deltas[-1] > RATIO_NOISE_FLOOR and delta > RATIO_NOISE_FLOOR:
                ratios.append(delta / deltas[-1])
            deltas.append(delta)
            current = nxt
            if delta <= cfg.picard_tol:
                converged = True
                break
        if not converged:
            raise PicardNotConverged(
                "Picard iteration did not converge",
                w_idx,
                ratios[-1] if ratios else None,
                deltas[-1],
            )
        diags = [state_diagnostics(s) for s in current]
        for t, s, d in zip(grid, current, diags):
            _check_step(t, s, d, cfg)
        start = 0 if w_idx == 0 else 1
        all_times.append(grid[start:])
        all_states.append(current[start:])
        stop = index + grid.size
        windows.append(WindowReport(float(grid[0]), float(grid[-1]), index, stop, it, deltas, ratios))
        index = stop - 1
        rho = current[-1]
    times = np.concatenate(all_times)
    states = np.concatenate(all_states)
    report = PicardReport(rate_bound, contraction_window(rate_bound, cfg.window_safety), windows)
    return Trajectory(times, states, model="fermion"), report
