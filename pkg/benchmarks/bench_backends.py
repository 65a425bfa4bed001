"""Timing comparison of the compiled and pure-array code paths.

The backend is frozen when the package is imported, so each lane runs
in a child process with GUIDEDWAVES_BACKEND set.  The parent prints a
wall-time table plus the largest disagreement between the two lanes'
results, which should sit at rounding level.

    python3 benchmarks/bench_backends.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np


def _workloads(out_npz, repeat):
    from guidedwaves.fieldsynth import synth_field_map
    from guidedwaves.greens import GreenKind, lightcone_intersect_batch
    from guidedwaves.spacetime import ConstantFrequencyLaw, Worldline

    lam = np.linspace(-40.0, 40.0, 4001)
    pts = np.zeros((lam.size, 4))
    pts[:, 0] = lam
    pts[:, 1] = 2.0 * np.sin(0.3 * lam)
    pts[:, 2] = 2.0 * np.cos(0.3 * lam)
    w = Worldline(lam, pts)

    rng = np.random.default_rng(0)
    events = np.zeros((200_000, 4))
    events[:, 0] = rng.uniform(-5.0, 5.0, len(events))
    events[:, 1:] = rng.uniform(-6.0, 6.0, (len(events), 3))

    def cone():
        ret = lightcone_intersect_batch(w, events, GreenKind.RETARDED)
        adv = lightcone_intersect_batch(w, events, GreenKind.ADVANCED)
        return ret["lam_star"], adv["lam_star"]

    law = ConstantFrequencyLaw(g0=1.0, omega0=2.0)
    wu = Worldline.uniform(velocity=(0.6, 0.0, 0.0), t_span=(-40.0, 40.0))

    def field_map():
        grid = synth_field_map(
            wu, law, GreenKind.ANTISYMMETRIC,
            axes=(("t", -6.0, 6.0, 201), ("x", -6.0, 6.0, 201)),
            fixed={"y": 0.0, "z": 0.0},
        )
        return grid.values

    results = {}
    times = {}
    for name, fn in (("cone_batch", cone), ("map_synthesis", field_map)):
        fn()  # warm-up pass so JIT compilation stays out of the timing
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            out = fn()
            best = min(best, time.perf_counter() - t0)
        times[name] = best
        results[name] = out

    np.savez(
        out_npz,
        cone_ret=results["cone_batch"][0],
        cone_adv=results["cone_batch"][1],
        map_values=results["map_synthesis"],
    )
    return times


def _child(args):
    from guidedwaves._backend import backend_name

    times = _workloads(args.out, args.repeat)
    print(json.dumps({"backend": backend_name(), "times": times}))


def _parent(args):
    lanes = {}
    with tempfile.TemporaryDirectory() as tmp:
        for backend in ("numba", "numpy"):
            out = os.path.join(tmp, f"{backend}.npz")
            env = dict(os.environ, GUIDEDWAVES_BACKEND=backend)
            proc = subprocess.run(
                [sys.executable, __file__, "--child", "--out", out,
                 "--repeat", str(args.repeat)],
                capture_output=True, text=True, env=env,
            )
            if proc.returncode != 0:
                sys.exit(f"{backend} lane failed:\n{proc.stderr}")
            report = json.loads(proc.stdout.splitlines()[-1])
            if report["backend"] != backend:
                sys.exit(f"requested {backend}, got {report['backend']}")
            lanes[backend] = (report["times"], np.load(out))

        print(f"{'workload':<16}{'numba':>10}{'numpy':>10}{'speedup':>9}")
        for name in ("cone_batch", "map_synthesis"):
            tj = lanes["numba"][0][name]
            tn = lanes["numpy"][0][name]
            print(f"{name:<16}{tj:>9.3f}s{tn:>9.3f}s{tn / tj:>8.1f}x")

        dev_cone = max(
            _nanmax_abs(lanes["numba"][1][k] - lanes["numpy"][1][k])
            for k in ("cone_ret", "cone_adv")
        )
        dev_map = _nanmax_abs(
            lanes["numba"][1]["map_values"] - lanes["numpy"][1]["map_values"]
        )
        print(f"max deviation: cone roots {dev_cone:.3e}, "
              f"map values {dev_map:.3e}")


def _nanmax_abs(d):
    finite = np.abs(d[np.isfinite(d)])
    return float(np.max(finite)) if finite.size else 0.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--out", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        _child(args)
    else:
        _parent(args)


if __name__ == "__main__":
    main()
