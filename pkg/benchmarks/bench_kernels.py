"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--sizes 2 4 8 16] [--repeat 5]

Each kernel is checked for agreement between the two backends before it is
timed; the table reports the best time per call and the speedup.
"""
import argparse
import timeit

import numpy as np

from fermikin import _backend
from fermikin.core import HamiltonianSpec, OrbitalBasis, RateTable, SinusoidalDrive, random_admissible, random_hermitian
from fermikin.integrators import FermionModel, IntegrationConfig, integrate_rk4


def random_rates(n, rng):
    w = rng.uniform(size=(n, n))
    np.fill_diagonal(w, 0.0)
    return w


def cases(n, rng):
    rho = random_admissible(n, rng)
    h = random_hermitian(n, rng)
    w = random_rates(n, rng)
    dt = 1e-3
    return {
        "jacobi_eigvalsh": lambda k: k.jacobi_eigvalsh(rho),
        "fermion_rhs": lambda k: k.fermion_rhs(rho, h, w),
        "fermion_rk4_step": lambda k: k.fermion_rk4_step(rho, h, h, h, w, dt),
    }


def best_time(fn, repeat):
    number, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def run_integration(n, rng, kernels, repeat):
    """A short driven RK4 run with both the step and the eigenvalue kernel swapped in."""
    from fermikin import core, integrators

    h = HamiltonianSpec(OrbitalBasis(np.sort(rng.uniform(0, 2, n))),
                        SinusoidalDrive(random_hermitian(n, rng, 0.3), 2.0))
    rates = RateTable(random_rates(n, rng))
    rho0 = random_admissible(n, rng)
    cfg = IntegrationConfig(0.0, 0.2, 1e-3)
    saved = core.kernels, integrators.kernels
    core.kernels = integrators.kernels = kernels
    try:
        return best_time(lambda: integrate_rk4(FermionModel(h, rates), rho0, cfg), repeat)
    finally:
        core.kernels, integrators.kernels = saved


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[2, 4, 8, 16])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    py, cy = _backend.python_kernels, _backend.compiled_kernels
    if cy is None:
        print("compiled extension not built; install with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'N':>4}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for n in args.sizes:
        for name, fn in cases(n, rng).items():
            a, b = np.asarray(fn(py)), np.asarray(fn(cy))
            if np.max(np.abs(a - b)) > 1e-12 * max(1.0, np.max(np.abs(a))):
                raise SystemExit(f"{name} (N={n}): backends disagree")
            tp, tc = best_time(lambda: fn(py), args.repeat), best_time(lambda: fn(cy), args.repeat)
            print(f"{name:<22}{n:>4}{tp * 1e6:>14.2f}{tc * 1e6:>14.2f}{tp / tc:>10.1f}")
        tp = run_integration(n, rng, py, max(1, args.repeat // 2))
        tc = run_integration(n, rng, cy, max(1, args.repeat // 2))
        print(f"{'integrate_rk4 (200)':<22}{n:>4}{tp * 1e6:>14.0f}{tc * 1e6:>14.0f}{tp / tc:>10.1f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
