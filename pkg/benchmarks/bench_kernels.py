"""Throughput comparison of the two kernel backends.

Times the three batched kernels on benchmark-shaped workloads for the
compiled extension and the numpy fallback, checks that both produce the
same numbers, then times a short end-to-end training run per backend in a
subprocess (the backend is fixed at import time, so each child process
selects one via MASKCOND_KERNELS).

Run from the repository root:

    python benchmarks/bench_kernels.py [--repeats N] [--train-steps N]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from maskcond import _kernels_np

try:
    from maskcond import _kernels_cy
except ImportError:
    _kernels_cy = None

BATCH = 512

# Net shapes the Gaussian benchmark actually runs: a discriminator over
# [first_slot, x*a, a, r] and a generator over [x*a, a, r, z] with 8 noise
# dimensions, both with two 64-unit hidden layers.
SHAPES = {
    "discriminator (12-64-64-1)": (12, 64, 64, 1),
    "generator (17-64-64-3)": (17, 64, 64, 3),
}


def make_net(rng, sizes):
    weights = [rng.standard_normal((o, i)) * np.sqrt(2.0 / i)
               for i, o in zip(sizes[:-1], sizes[1:])]
    biases = [0.1 * rng.standard_normal(o) for o in sizes[1:]]
    return weights, biases


def time_call(fn, repeats, inner=20):
    fn()
    fn()
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        samples.append((time.perf_counter() - t0) / inner)
    return statistics.median(samples)


def agreement(a, b):
    flat_a = np.concatenate([np.asarray(x).ravel() for x in a])
    flat_b = np.concatenate([np.asarray(x).ravel() for x in b])
    return float(np.max(np.abs(flat_a - flat_b)))


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    rows = []
    for label, sizes in SHAPES.items():
        weights, biases = make_net(rng, sizes)
        x = rng.standard_normal((BATCH, sizes[0]))
        gy = rng.standard_normal((BATCH, sizes[-1]))
        acts = _kernels_np.forward(weights, biases, x)

        cases = {
            "forward": lambda impl: impl.forward(weights, biases, x),
            "backward": lambda impl: impl.backward(
                weights, acts, gy, need_input_grad=True),
        }
        if sizes[-1] == 1:
            cases["grad_norm_backward"] = lambda impl: impl.grad_norm_backward(
                weights, acts)

        for name, call in cases.items():
            ref = call(_kernels_np)
            t_np = time_call(lambda: call(_kernels_np), repeats)
            if _kernels_cy is None:
                rows.append((label, name, t_np, None, None))
                continue
            got = call(_kernels_cy)
            gap = agreement(
                [v for part in ref if part is not None
                 for v in (part if isinstance(part, (list, tuple)) else [part])],
                [v for part in got if part is not None
                 for v in (part if isinstance(part, (list, tuple)) else [part])])
            t_cy = time_call(lambda: call(_kernels_cy), repeats)
            rows.append((label, name, t_np, t_cy, gap))
    return rows


CHILD = """
import json, time
import maskcond as mc
cfg = mc.benchmark_config(steps={steps}, seed=0, log_every={steps})
g = mc.reference_gaussian()
data = mc.sample_joint(g, 10_000, 0)
t0 = time.perf_counter()
mc.train(cfg, data)
dt = time.perf_counter() - t0
print(json.dumps({{"backend": mc.KERNEL_BACKEND, "seconds": dt}}))
"""


def bench_training(steps):
    results = {}
    for choice in ("py", "cy"):
        if choice == "cy" and _kernels_cy is None:
            continue
        env = dict(os.environ, MASKCOND_KERNELS=choice)
        proc = subprocess.run([sys.executable, "-c", CHILD.format(steps=steps)],
                              env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            raise SystemExit(f"training child for backend {choice!r} failed")
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        results[payload["backend"]] = payload["seconds"]
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=30,
                    help="timing samples per kernel (median is reported)")
    ap.add_argument("--train-steps", type=int, default=300,
                    help="steps for the end-to-end training comparison")
    args = ap.parse_args(argv)

    if _kernels_cy is None:
        print("compiled extension not importable; timing the numpy fallback only")

    print(f"batch {BATCH}, median of {args.repeats} samples\n")
    header = f"{'net':28} {'kernel':20} {'numpy ms':>9} {'compiled ms':>12} {'speedup':>8} {'max |diff|':>11}"
    print(header)
    print("-" * len(header))
    for label, name, t_np, t_cy, gap in bench_kernels(args.repeats):
        if t_cy is None:
            print(f"{label:28} {name:20} {t_np * 1e3:9.3f} {'-':>12} {'-':>8} {'-':>11}")
        else:
            print(f"{label:28} {name:20} {t_np * 1e3:9.3f} {t_cy * 1e3:12.3f} "
                  f"{t_np / t_cy:7.2f}x {gap:11.2e}")

    print(f"\nend-to-end training, {args.train_steps} steps at benchmark settings:")
    for backend, seconds in bench_training(args.train_steps).items():
        print(f"  {backend:8} {seconds:6.2f}s ({args.train_steps / seconds:7.1f} steps/s)")


if __name__ == "__main__":
    main()
