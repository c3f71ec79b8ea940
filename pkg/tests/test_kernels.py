"""Compiled and fallback kernels against numpy/LAPACK and against each other."""
import numpy as np
import pytest
from hypothesis import given

from conftest import KERNELS, hermitian_matrices, random_rates
from fermikin import _backend
from fermikin.core import random_admissible, random_hermitian
from fermikin.generators import fermion_rhs


@given(hermitian_matrices(n_max=8))
def test_jacobi_matches_lapack(a):
    for mod in (k.values[0] for k in KERNELS):
        w = mod.jacobi_eigvalsh(a)
        ref = np.linalg.eigvalsh(a)
        scale = max(1.0, np.abs(ref).max())
        assert np.max(np.abs(w - ref)) <= 1e-12 * scale


def test_jacobi_degenerate_and_diagonal(kernel_module):
    assert np.array_equal(kernel_module.jacobi_eigvalsh(np.diag([0.7, 0.2, 0.2])), [0.2, 0.2, 0.7])
    w = kernel_module.jacobi_eigvalsh(np.eye(4, dtype=complex))
    assert np.allclose(w, 1.0, atol=1e-15)
    w = kernel_module.jacobi_eigvalsh(np.array([[0, 1j], [-1j, 0]]))
    assert np.allclose(w, [-1, 1], atol=1e-15)


def test_rhs_kernel_matches_generator(kernel_module):
    rng = np.random.default_rng(5)
    for n in (1, 2, 3, 6):
        rho = random_admissible(n, rng)
        h = random_hermitian(n, rng)
        w = random_rates(n, rng)
        got = kernel_module.fermion_rhs(rho, h, w)
        assert np.max(np.abs(got - fermion_rhs(rho, h, w))) <= 1e-14


def test_rk4_step_backends_agree():
    if _backend.compiled_kernels is None:
        pytest.skip("extension not built")
    rng = np.random.default_rng(9)
    for n in (2, 4, 8):
        rho = random_admissible(n, rng)
        hs = [random_hermitian(n, rng) for _ in range(3)]
        w = random_rates(n, rng)
        a = _backend.python_kernels.fermion_rk4_step(rho, *hs, w, 0.01)
        b = _backend.compiled_kernels.fermion_rk4_step(rho, *hs, w, 0.01)
        assert np.max(np.abs(a - b)) <= 1e-14


def test_kernels_accept_readonly_inputs(kernel_module):
    a = np.diag([1.0, 2.0]).astype(complex)
    a.setflags(write=False)
    w = np.array([[0.0, 1.0], [2.0, 0.0]])
    w.setflags(write=False)
    assert np.allclose(kernel_module.jacobi_eigvalsh(a), [1, 2])
    kernel_module.fermion_rk4_step(a / 4, a, a, a, w, 0.01)
