import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import admissible_states, random_rates
from fermikin.core import HamiltonianSpec, OrbitalBasis, RateTable, random_admissible
from fermikin.diagnostics import (
    DEFAULT_TOLERANCES,
    build_report,
    check_admissible,
    coherence_violation,
    decoherence_from_gain,
    phase_decay_check,
    predicted_phase_law,
    resolve_tolerances,
    trace_balance_profile,
    trace_balance_residual,
)
from fermikin.errors import ContractViolation
from fermikin.generators import markoff_rhs, transition_bound_M
from fermikin.integrators import FermionModel, IntegrationConfig, Trajectory, integrate_rk4, rhs_from

W2 = RateTable([[0, 1], [2, 0]])


def markoff_run(energies, rates, rho0, tf=2.0, dt=0.005, dephasing=False):
    h = HamiltonianSpec(OrbitalBasis(energies))
    rhs = rhs_from(markoff_rhs, h, rates, include_dephasing=dephasing)
    return integrate_rk4(rhs, rho0, IntegrationConfig(0.0, tf, dt, pauli_bound=False))


class TestAdmissibility:
    def test_examples(self):
        ok, lo, hi = check_admissible(0.5 * np.eye(2))
        assert ok and (lo, hi) == pytest.approx((0.5, 0.5))
        assert not check_admissible(np.diag([1.2, 0.0]))[0]
        ok, lo, hi = check_admissible([[0.5, 0.6], [0.6, 0.5]])
        assert not ok
        assert (lo, hi) == pytest.approx((-0.1, 1.1), abs=1e-14)

    @given(admissible_states())
    def test_random_states_pass(self, rho):
        assert check_admissible(rho)[0]
        assert coherence_violation(rho) <= 1e-12

    def test_coherence_violation_example(self):
        assert coherence_violation([[0.5, 0.6], [0.6, 0.5]]) == pytest.approx(0.1)
        assert coherence_violation([[0.7]]) == 0.0


class TestTraceBalance:
    def test_zero_rates(self):
        h = HamiltonianSpec(OrbitalBasis([0.0, 1.0]))
        rho0 = random_admissible(2, np.random.default_rng(0))
        traj = integrate_rk4(FermionModel(h, RateTable.zeros(2)), rho0, IntegrationConfig(0, 1, 0.01))
        assert trace_balance_residual(traj, RateTable.zeros(2)) <= 1e-10

    def test_full_shell(self):
        h = HamiltonianSpec(OrbitalBasis([0.0, 0.3, 1.0]))
        rates = RateTable(random_rates(3, np.random.default_rng(1)))
        traj = integrate_rk4(FermionModel(h, rates), np.eye(3), IntegrationConfig(0, 1, 0.01))
        assert trace_balance_residual(traj, rates) <= 1e-12

    def test_two_level_first_window(self, two_level):
        sc = two_level
        m = transition_bound_M(sc.rates)
        cfg = IntegrationConfig(0.0, 1.0 / (8 * m), sc.cfg.dt / 4)
        traj = integrate_rk4(FermionModel(sc.hamiltonian, sc.rates), sc.rho0, cfg)
        assert trace_balance_residual(traj, sc.rates) <= 1e-8
        assert trace_balance_profile(traj, sc.rates).shape == traj.times.shape

    def test_rejects_linear_models(self):
        traj = markoff_run([0.0, 1.0], W2, np.diag([0.5, 0.5]), tf=0.1)
        with pytest.raises(ContractViolation):
            trace_balance_residual(traj, W2)


class TestPhaseDecay:
    def test_predicted_law(self):
        basis = OrbitalBasis([0.2, 1.7])
        assert predicted_phase_law(W2, basis, 0, 1) == pytest.approx((1.5, 1.5))
        gamma = [[0, 0.4], [0.4, 0]]
        assert predicted_phase_law(W2, basis, 0, 1, gamma)[0] == pytest.approx(1.5 + 0.4)

    def test_zero_rates(self):
        e = [0.0, 0.6, 1.9]
        rho0 = random_admissible(3, np.random.default_rng(2))
        traj = markoff_run(e, RateTable.zeros(3), rho0)
        assert phase_decay_check(traj, RateTable.zeros(3), OrbitalBasis(e)) <= 1e-8

    def test_two_level_rates(self):
        e = [0.0, 1.0]
        rho0 = np.array([[0.5, 0.2 + 0.1j], [0.2 - 0.1j, 0.25]])
        traj = markoff_run(e, W2, rho0)
        assert phase_decay_check(traj, W2, OrbitalBasis(e)) <= 1e-6

    def test_dephasing_adds_gamma(self):
        e = [0.0, 1.0]
        rates = RateTable([[0, 1], [2, 0]], gamma=[[0, 0.3], [0.3, 0]])
        rho0 = np.array([[0.5, 0.2 + 0.1j], [0.2 - 0.1j, 0.25]])
        traj = markoff_run(e, rates, rho0, dephasing=True)
        assert phase_decay_check(traj, rates, OrbitalBasis(e), gamma=rates.gamma) <= 1e-6
        assert phase_decay_check(traj, rates, OrbitalBasis(e)) > 0.1

    def test_mode_mismatch(self, two_level):
        sc = two_level
        traj = integrate_rk4(FermionModel(sc.hamiltonian, sc.rates), sc.rho0, sc.cfg)
        with pytest.raises(ContractViolation):
            phase_decay_check(traj, sc.rates, sc.hamiltonian.basis)


class TestDecoherenceFromGain:
    def test_examples(self):
        assert decoherence_from_gain(np.diag([0.3, 0.6]), W2) == (0.0, 0.0)
        fermion, markoff = decoherence_from_gain([[0.5, 0.2], [0.2, 0.25]], W2)
        assert fermion == pytest.approx(0.125, abs=1e-15)
        assert markoff == 0.0

    @given(admissible_states(n_min=2), st.integers(0, 2**31 - 1))
    def test_markoff_component_vanishes(self, rho, seed):
        rates = RateTable(random_rates(rho.shape[0], np.random.default_rng(seed)))
        assert decoherence_from_gain(rho, rates)[1] <= 1e-14


class TestReport:
    def test_record_count_and_pass(self, two_level):
        sc = two_level
        traj = integrate_rk4(FermionModel(sc.hamiltonian, sc.rates), sc.rho0, sc.cfg)
        report = build_report(traj, rates=sc.rates)
        assert len(report.records()) == len(traj)
        assert report.passed and report.first_violation_time is None
        assert report.summary()["max_trace_balance_residual"] <= 1e-8

    def test_flags_first_violation(self):
        times = np.array([0.0, 0.1, 0.2])
        states = np.array([np.diag([0.5, 0.5]), np.diag([0.5, 0.5]), np.diag([1.1, -0.1])])
        report = build_report(Trajectory(times, states, model="fermion"))
        assert not report.passed
        assert report.first_violation_time == 0.2
        # the linear models are only bounded from below
        assert not build_report(Trajectory(times, states, model="markoff")).passed
        upper_only = np.array([np.diag([0.5, 0.5]), np.diag([0.5, 0.5]), np.diag([1.1, 0.0])])
        assert not build_report(Trajectory(times, upper_only, model="fermion")).passed
        assert build_report(Trajectory(times, upper_only, model="markoff")).summary()[
            "first_violation_time"] == 0.2  # trace drift
        assert build_report(Trajectory(times, upper_only, model="general")).first_violation_time == 0.2

    def test_deterministic_json(self, two_level):
        sc = two_level
        docs = []
        for _ in range(2):
            traj = integrate_rk4(FermionModel(sc.hamiltonian, sc.rates), sc.rho0, sc.cfg)
            docs.append(build_report(traj, rates=sc.rates).to_json())
        assert docs[0] == docs[1]
        assert json.loads(docs[0])["summary"]["passed"] is True

    def test_tolerances(self):
        tol = resolve_tolerances({"coherence": 1e-6})
        assert tol["coherence"] == 1e-6 and tol["trace"] == DEFAULT_TOLERANCES["trace"]
        assert set(resolve_tolerances(global_override=0.5).values()) == {0.5}
        with pytest.raises(ContractViolation):
            resolve_tolerances({"bogus": 1.0})
