#!/usr/bin/env python3
"""Benchmark the hot kernels on both backends: numba (default) against the
pure-numpy fallback selected by QSTEER_PURE_NUMPY=1.

Run without arguments to time both backends in subprocesses and print a
comparison table, including a numerical-agreement column:

    python3 benchmarks/bench_kernels.py

Run with --single to time only the backend of the current process.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def build_cases():
    from qsteer import catalog
    from qsteer.dynamics import amplitude_damping_channels, control_generators, liouvillian

    rng = np.random.default_rng(7)
    cases = {}
    for dim in (4, 16, 64):
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        cases[f"matexp_d{dim}"] = ("matexp", (m * (0.5 / np.linalg.norm(m, 2)),))

    for entry_id in ("SQ2", "TQ25", "ThQ1"):
        entry = catalog.get_entry(entry_id)
        segments = 40
        amps = rng.uniform(-1, 1, size=(segments, entry.ham.n_controls))
        dt = 3.0 / segments
        cases[f"closed_prop_{entry_id}"] = (
            "propagate_closed_states",
            (entry.ham.drift, entry.ham.control_stack(), amps, dt, entry.initial),
        )
        gen0 = liouvillian(entry.ham.drift, amplitude_damping_channels(entry.n_qubits, 0.01))
        gens = control_generators(entry.ham)
        rho0 = np.outer(entry.initial, entry.initial.conj())
        from qsteer.linalg import vec

        cases[f"open_prop_{entry_id}"] = (
            "propagate_open_states",
            (gen0, gens, amps, dt, vec(rho0)),
        )
        target = np.outer(entry.target, entry.target.conj())
        cases[f"open_grad_{entry_id}"] = (
            "open_fidelity_gradient",
            (gen0, gens, amps[:8], dt, vec(rho0), vec(target)),
        )

    params = rng.normal(size=500_000)
    grads = rng.normal(size=500_000)
    cases["adam_500k"] = (
        "adam_step",
        (params, grads, np.zeros_like(params), np.zeros_like(params),
         3e-4, 0.9, 0.999, 1e-8, 0.1, 0.001),
    )
    return cases


def run_single(repeats: int) -> dict:
    from qsteer import kernels
    from qsteer.accel import backend_name

    results = {"backend": backend_name(), "cases": {}}
    for name, (fn_name, args) in build_cases().items():
        fn = getattr(kernels, fn_name)
        out = fn(*args)  # warm-up / JIT compile
        t0 = time.perf_counter()
        for _ in range(repeats):
            out = fn(*args)
        elapsed = (time.perf_counter() - t0) / repeats
        if out is None:  # in-place kernels: digest the mutated first argument
            digest = args[0]
        elif isinstance(out, tuple):
            digest = out[0]
        else:
            digest = out
        results["cases"][name] = {
            "ms": elapsed * 1e3,
            "checksum": [float(np.sum(np.abs(digest))), float(np.max(np.abs(digest)))],
        }
    return results


def run_both(repeats: int):
    rows = {}
    for backend, env_value in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, QSTEER_PURE_NUMPY=env_value)
        out = subprocess.run(
            [sys.executable, __file__, "--single", "--repeats", str(repeats), "--json"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        rows[backend] = json.loads(out.stdout)
        assert rows[backend]["backend"] == backend, rows[backend]["backend"]

    print(f"{'case':<22}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}{'agree':>12}")
    for name in rows["numba"]["cases"]:
        a = rows["numba"]["cases"][name]
        b = rows["numpy"]["cases"][name]
        ca, cb = np.array(a["checksum"]), np.array(b["checksum"])
        agree = float(np.max(np.abs(ca - cb) / np.maximum(np.abs(cb), 1e-12)))
        print(
            f"{name:<22}{a['ms']:>12.3f}{b['ms']:>12.3f}"
            f"{b['ms'] / max(a['ms'], 1e-9):>9.1f}x{agree:>12.2e}"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--single", action="store_true", help="time only this process's backend")
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args()
    if args.single:
        results = run_single(args.repeats)
        if args.json:
            print(json.dumps(results))
        else:
            print(f"backend: {results['backend']}")
            for name, row in results["cases"].items():
                print(f"{name:<22}{row['ms']:>12.3f} ms")
    else:
        run_both(args.repeats)


if __name__ == "__main__":
    main()
