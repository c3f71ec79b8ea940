import math
import pathlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from fermikin import _backend
from fermikin.bcs import assemble_quasiparticle, bcs_hamiltonian
from fermikin.scenario import load_scenario
from fermikin.core import (
    ConstantDrive,
    HamiltonianSpec,
    OrbitalBasis,
    SinusoidalDrive,
    hermitize,
    random_admissible,
    random_hermitian,
)

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "fermikin" / "data"
SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "scenarios"

KERNELS = [pytest.param(_backend.python_kernels, id="python")]
if _backend.compiled_kernels is not None:
    KERNELS.append(pytest.param(_backend.compiled_kernels, id="cython"))


@pytest.fixture(params=KERNELS)
def kernel_module(request):
    return request.param


def random_rates(n, rng, m_max=4.0, density=1.0):
    """Nonnegative zero-diagonal table rescaled so that M lies in (0, m_max]."""
    w = rng.uniform(0.0, 1.0, size=(n, n))
    if density < 1.0:
        w *= rng.uniform(size=(n, n)) < density
    np.fill_diagonal(w, 0.0)
    m = max(0.5 * w.sum(axis=0).max(), 0.5 * w.sum(axis=1).max())
    if m == 0:
        w[0, -1] = 1.0 if n > 1 else 0.0
        m = 0.5 if n > 1 else 1.0
    target = rng.uniform(0.25, 1.0) * m_max
    return w * (target / m)


def expm_taylor(a, tol=1e-13):
    """Matrix exponential by scaling and squaring with a truncated Taylor series."""
    a = np.asarray(a, dtype=np.complex128)
    norm = np.abs(a).sum(axis=1).max()
    s = max(0, math.ceil(math.log2(norm))) + 1 if norm > 0 else 0
    b = a / 2.0**s
    term = np.eye(a.shape[0], dtype=np.complex128)
    out = term.copy()
    for k in range(1, 40):
        term = term @ b / k
        out = out + term
        if np.abs(term).max() < tol * 1e-3:
            break
    for _ in range(s):
        out = out @ out
    return out


def finite_floats(lo=-2.0, hi=2.0):
    return st.floats(lo, hi, allow_nan=False, allow_infinity=False)


@st.composite
def hermitian_matrices(draw, n_min=1, n_max=6, scale=2.0):
    n = draw(st.integers(n_min, n_max))
    re = draw(st.lists(finite_floats(-scale, scale), min_size=n * n, max_size=n * n))
    im = draw(st.lists(finite_floats(-scale, scale), min_size=n * n, max_size=n * n))
    z = np.array(re).reshape(n, n) + 1j * np.array(im).reshape(n, n)
    return hermitize(z)[0]


@st.composite
def admissible_states(draw, n_min=1, n_max=6):
    n = draw(st.integers(n_min, n_max))
    seed = draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    rank = draw(st.one_of(st.none(), st.integers(1, n)))
    return random_admissible(n, rng, rank=rank)


@st.composite
def rate_tables(draw, n, m_max=4.0):
    seed = draw(st.integers(0, 2**31 - 1))
    return random_rates(n, np.random.default_rng(seed), m_max)


# quasiparticle (BCS) generators


def antisymmetric(ns, rng, scale=1.0):
    k = scale * (rng.normal(size=(ns, ns)) + 1j * rng.normal(size=(ns, ns)))
    return k - k.T


def random_bcs_state(ns, rng, beta=2.0):
    """Fermi function of a particle-hole symmetric generator: always of block form."""
    k = bcs_hamiltonian(random_hermitian(ns, rng), antisymmetric(ns, rng, 0.5))
    e, v = np.linalg.eigh(k)
    q = (v * (1.0 / (1.0 + np.exp(beta * e)))) @ v.conj().T
    rho_s, kappa_s = q[:ns, :ns], q[:ns, ns:]
    return assemble_quasiparticle(0.5 * (rho_s + rho_s.conj().T), 0.5 * (kappa_s - kappa_s.T))


def random_bcs_hamiltonian(ns, rng, driven):
    """Basis energies (E, -E) plus a particle-hole symmetric constant or periodic part."""
    e = np.sort(rng.uniform(0, 1.5, ns))
    basis = OrbitalBasis(np.concatenate([e, -e]))
    v = bcs_hamiltonian(random_hermitian(ns, rng, 0.3), antisymmetric(ns, rng, 0.2))
    drive = SinusoidalDrive(v, rng.uniform(0.5, 3.0)) if driven else ConstantDrive(v)
    return HamiltonianSpec(basis, drive)


def random_relaxation(dim, rng, strength=1.0):
    b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    a = -b @ b.conj().T
    return strength * a / np.abs(np.linalg.eigvalsh(a)).max()


@pytest.fixture(scope="session")
def two_level():
    """The shipped two-level reference scenario."""
    return load_scenario(DATA / "two_level.json")


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
