import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import (
    antisymmetric,
    hermitian_matrices,
    random_bcs_hamiltonian,
    random_bcs_state,
    random_relaxation,
)
from fermikin.bcs import (
    assemble_quasiparticle,
    bcs_hamiltonian,
    chain_level,
    check_ph_symmetry_hamiltonian,
    constrain_relaxation,
    evolve_bcs,
    structure_violation,
    swap_operator,
)
from fermikin.core import (
    HamiltonianSpec,
    OrbitalBasis,
    random_hermitian,
    spectral_bounds,
)
from fermikin.errors import ConfigurationError, ContractViolation, DimensionMismatch, StructureViolation
from fermikin.generators import general_rhs
from fermikin.integrators import IntegrationConfig, integrate_rk4, rhs_from


class TestAssembly:
    def test_decoupled_blocks(self):
        q = assemble_quasiparticle(np.diag([0.2, 0.9]), np.zeros((2, 2)))
        assert np.allclose(q.assembled, np.diag([0.2, 0.9, 0.8, 0.1]), rtol=0, atol=1e-16)
        assert q.admissible and q.ns == 2
        q1 = assemble_quasiparticle([[0.3]], [[0.0]])
        assert np.allclose(q1.assembled, np.diag([0.3, 0.7]), rtol=0, atol=1e-16)
        with pytest.raises(ConfigurationError):
            assemble_quasiparticle([[0.3]], [[0.1]])

    def test_pairing_eigenvalues(self):
        k = 0.3
        q = assemble_quasiparticle(0.5 * np.eye(2), [[0, k], [-k, 0]])
        assert np.allclose(np.linalg.eigvalsh(q.assembled), [0.2, 0.2, 0.8, 0.8], atol=1e-14)
        assert q.bounds == pytest.approx((0.2, 0.8), abs=1e-14)

    def test_inadmissible_is_recorded(self):
        q = assemble_quasiparticle(0.5 * np.eye(2), [[0, 0.7], [-0.7, 0]])
        assert not q.admissible

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            assemble_quasiparticle([[0.5, 1.0], [0.0, 0.5]], np.zeros((2, 2)))
        with pytest.raises(DimensionMismatch):
            assemble_quasiparticle(np.eye(2), np.zeros((3, 3)))

    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_structure_identity_at_construction(self, ns, seed):
        q = random_bcs_state(ns, np.random.default_rng(seed))
        assert structure_violation(q.assembled) <= 1e-14
        assert q.admissible


class TestParticleHoleSymmetry:
    def test_examples(self):
        rng = np.random.default_rng(0)
        h = bcs_hamiltonian(random_hermitian(2, rng), [[0, 0.4 + 0.1j], [-0.4 - 0.1j, 0]])
        assert np.max(np.abs(h - h.conj().T)) == 0
        assert check_ph_symmetry_hamiltonian(h, swap_operator(2)) <= 1e-15
        assert check_ph_symmetry_hamiltonian(np.eye(4)) == 2.0
        assert check_ph_symmetry_hamiltonian(np.zeros((4, 4))) == 0.0

    def test_swap_operator(self):
        s = swap_operator(3)
        assert np.array_equal(s @ s, np.eye(6))
        assert np.array_equal(s, s.T)


class TestConstrainRelaxation:
    def test_examples(self):
        assert np.array_equal(constrain_relaxation(np.zeros((4, 4))), np.zeros((4, 4)))
        out = constrain_relaxation(np.diag([1.0, 2.0, 3.0, 4.0]))
        assert np.array_equal(out, np.diag([3.0, 4.0, 1.0, 2.0]))
        with pytest.raises(DimensionMismatch):
            constrain_relaxation(np.eye(3))

    @given(hermitian_matrices(n_min=1, n_max=4).map(lambda a: np.kron(np.eye(2), a) + np.kron([[0, 1], [0, 0]], a)))
    def test_involution(self, x):
        x = 0.5 * (x + x.conj().T)
        assert np.max(np.abs(constrain_relaxation(constrain_relaxation(x)) - x)) <= 1e-15
        assert np.max(np.abs(constrain_relaxation(x) - constrain_relaxation(x).conj().T)) <= 1e-15

    @given(st.integers(1, 4), st.integers(0, 2**31 - 1))
    def test_keeps_negative_semidefinite(self, ns, seed):
        a = random_relaxation(2 * ns, np.random.default_rng(seed))
        assert spectral_bounds(constrain_relaxation(a))[1] <= 1e-12


class TestEvolution:
    def test_unitary_keeps_structure(self):
        rng = np.random.default_rng(1)
        q0 = random_bcs_state(2, rng)
        h = random_bcs_hamiltonian(2, rng, driven=True)
        traj = evolve_bcs(q0, h, np.zeros((4, 4)), IntegrationConfig(0, 2, 0.01))
        assert max(structure_violation(s) for s in traj.states) <= 1e-10

    def test_block_decoupling(self):
        rng = np.random.default_rng(2)
        ns = 2
        e = np.array([0.1, 0.9])
        rho_s = np.diag([0.3, 0.8]).astype(complex)
        q0 = assemble_quasiparticle(rho_s, np.zeros((ns, ns)))
        a = random_relaxation(ns, rng)
        b = random_relaxation(ns, rng, 0.5)
        a_p = np.block([[a, np.zeros((ns, ns))], [np.zeros((ns, ns)), b]])
        h = HamiltonianSpec(OrbitalBasis(np.concatenate([e, -e])))
        cfg = IntegrationConfig(0, 1, 0.01)
        traj = evolve_bcs(q0, h, a_p, cfg)
        particle = integrate_rk4(rhs_from(general_rhs, HamiltonianSpec(OrbitalBasis(e)), a, b.conj()),
                                 rho_s, cfg)
        hole = integrate_rk4(rhs_from(general_rhs, HamiltonianSpec(OrbitalBasis(-e)), b, a.conj()),
                             np.eye(ns) - rho_s.conj(), cfg)
        assert np.max(np.abs(traj.states[:, :ns, :ns] - particle.states)) <= 1e-12
        assert np.max(np.abs(traj.states[:, ns:, ns:] - hole.states)) <= 1e-12
        assert np.max(np.abs(traj.states[:, :ns, ns:])) == 0

    def test_trace_is_ns(self):
        rng = np.random.default_rng(3)
        q0 = random_bcs_state(3, rng)
        traj = evolve_bcs(q0, random_bcs_hamiltonian(3, rng, True), random_relaxation(6, rng),
                          IntegrationConfig(0, 1, 0.01))
        assert np.max(np.abs(np.trace(traj.states, axis1=1, axis2=2) - 3)) <= 1e-9

    def test_time_dependent_schedule(self):
        rng = np.random.default_rng(4)
        a0, a1 = random_relaxation(4, rng), random_relaxation(4, rng)
        schedule = lambda t: a0 if t < 0.5 else a1  # noqa: E731
        traj = evolve_bcs(random_bcs_state(2, rng), random_bcs_hamiltonian(2, rng, True), schedule,
                          IntegrationConfig(0, 1, 0.01))
        assert max(structure_violation(s) for s in traj.states) <= 1e-8

    def test_preconditions(self):
        rng = np.random.default_rng(5)
        q0 = random_bcs_state(2, rng)
        good_h = random_bcs_hamiltonian(2, rng, False)
        cfg = IntegrationConfig(0, 0.1, 0.01)
        with pytest.raises(ContractViolation):
            evolve_bcs(q0, HamiltonianSpec(OrbitalBasis([0, 1, 2, 3])), np.zeros((4, 4)), cfg)
        with pytest.raises(ContractViolation):
            evolve_bcs(q0, good_h, -random_relaxation(4, rng), cfg)
        with pytest.raises(DimensionMismatch):
            evolve_bcs(q0, good_h, np.zeros((2, 2)), cfg)

    def test_structure_violation_raises_with_time(self):
        rng = np.random.default_rng(6)
        q0 = random_bcs_state(2, rng)
        # a zero tolerance is tripped by rounding at the first step
        with pytest.raises(StructureViolation) as info:
            evolve_bcs(q0, random_bcs_hamiltonian(2, rng, False), random_relaxation(4, rng),
                       IntegrationConfig(0, 0.2, 0.01), structure_tol=0.0)
        assert info.value.time == pytest.approx(0.01)

    @settings(max_examples=20)
    @given(st.integers(1, 4), st.booleans(), st.integers(0, 2**31 - 1))
    def test_randomized_suite(self, ns, driven, seed):
        rng = np.random.default_rng(seed)
        q0 = random_bcs_state(ns, rng)
        traj = evolve_bcs(q0, random_bcs_hamiltonian(ns, rng, driven),
                          random_relaxation(2 * ns, rng, rng.uniform(0.1, 2.0)),
                          IntegrationConfig(0, 1, 0.01))
        assert max(structure_violation(s) for s in traj.states) <= 1e-8
        assert traj.diagnostics["lambda_min"].min() >= -1e-8
        assert traj.diagnostics["lambda_max"].max() <= 1 + 1e-8


class TestChainLevel:
    def test_zero_pairing(self):
        rng = np.random.default_rng(7)
        prev = random_bcs_state(1, rng)
        nxt = chain_level(prev, np.zeros((2, 2)))
        expected = np.block([[prev.assembled, np.zeros((2, 2))],
                             [np.zeros((2, 2)), np.eye(2) - prev.assembled.conj()]])
        assert np.array_equal(nxt.assembled, expected)

    def test_dimensions_double(self):
        q = assemble_quasiparticle([[0.4]], [[0.0]])
        dims = [q.assembled.shape[0]]
        for _ in range(2):
            q = chain_level(q, np.zeros_like(q.assembled))
            dims.append(q.assembled.shape[0])
            assert np.count_nonzero(q.assembled - np.diag(np.diag(q.assembled))) == 0
        assert dims == [2, 4, 8]

    def test_small_pairing_stays_admissible(self):
        rng = np.random.default_rng(8)
        prev = random_bcs_state(2, rng)
        lo, hi = prev.bounds
        margin = min(lo, 1 - hi)
        kappa = antisymmetric(4, rng)
        kappa *= 0.9 * margin / np.linalg.norm(kappa, 2)
        nxt = chain_level(prev, kappa)
        assert nxt.admissible
        assert np.array_equal(nxt.kappa_s, kappa)
        with pytest.raises(DimensionMismatch):
            chain_level(prev, np.zeros((2, 2)))
