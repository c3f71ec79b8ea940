"""Reference final occupations for the shipped two-level scenario.

Independent of the package: the right-hand side is written out entrywise
from the scenario file, integrated by RK4 at two step sizes and combined by
Richardson extrapolation; scipy's DOP853 at tight tolerance is the cross-check.

    python tools/regression_oracle.py [--write]
"""
import argparse
import json
import pathlib

import numpy as np
from scipy.integrate import solve_ivp

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "fermikin" / "data"


def cplx(x):
    return complex(*x) if isinstance(x, list) else complex(x)


def load(path):
    doc = json.loads(path.read_text())
    e = np.array(doc["basis"]["energies"], dtype=float)
    w = np.array(doc["rates"]["omega"], dtype=float)
    amp = np.array([[cplx(x) for x in r] for r in doc["drive"]["amplitude"]])
    freq = doc["drive"]["frequency"]
    phase = doc["drive"].get("phase", 0.0)
    rho0 = np.array([[cplx(x) for x in r] for r in doc["initial"]["matrix"]])
    integ = doc["integrator"]
    return e, w, amp, freq, phase, rho0, integ["t0"], integ["tf"]


def make_rhs(e, w, amp, freq, phase):
    n = e.size

    def rhs(t, rho):
        h = np.diag(e) + np.cos(freq * t + phase) * amp
        f = rho.diagonal().real
        out = np.zeros((n, n), dtype=complex)
        for a in range(n):
            for b in range(n):
                comm = sum(rho[a, k] * h[k, b] - h[a, k] * rho[k, b] for k in range(n))
                # loss: rho_ab times half the Pauli-blocked out-rates of a and b
                la = 0.5 * sum(w[k, a] * (1 - f[k]) for k in range(n))
                lb = 0.5 * sum(w[k, b] * (1 - f[k]) for k in range(n))
                ga = 0.5 * sum(w[a, k] * f[k] for k in range(n))
                gb = 0.5 * sum(w[b, k] * f[k] for k in range(n))
                hole = (1.0 if a == b else 0.0) - rho[a, b]
                out[a, b] = 1j * comm - rho[a, b] * (la + lb) + hole * (ga + gb)
        return out

    return rhs


def rk4(rhs, rho, t0, tf, steps):
    h = (tf - t0) / steps
    t = t0
    for k in range(steps):
        k1 = rhs(t, rho)
        k2 = rhs(t + h / 2, rho + h / 2 * k1)
        k3 = rhs(t + h / 2, rho + h / 2 * k2)
        k4 = rhs(t + h, rho + h * k3)
        rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * h
    return rho


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--write", action="store_true")
    args = ap.parse_args()
    e, w, amp, freq, phase, rho0, t0, tf = load(DATA / "two_level.json")
    rhs = make_rhs(e, w, amp, freq, phase)
    coarse = rk4(rhs, rho0, t0, tf, 400)
    fine = rk4(rhs, rho0, t0, tf, 800)
    rich = (16 * fine - coarse) / 15
    n = e.size
    flat = lambda t, y: rhs(t, y.reshape(n, n)).ravel()
    ivp = solve_ivp(flat, (t0, tf), rho0.ravel(), method="DOP853", rtol=1e-13, atol=1e-15)
    ref = ivp.y[:, -1].reshape(n, n)
    f = rich.diagonal().real
    print("richardson f:", f.tolist())
    print("RK4 fine vs coarse:", np.abs(fine - coarse).max())
    print("richardson vs DOP853:", np.abs(rich - ref).max())
    if args.write:
        doc = {"scenario": "two_level.json", "final_occupations": f.tolist(),
               "final_state": [[[z.real, z.imag] for z in row] for row in rich],
               "method": "RK4 at 400 and 800 steps, Richardson-extrapolated",
               "cross_check_dop853_max_abs": float(np.abs(rich - ref).max())}
        (DATA / "two_level_regression.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
