#!/usr/bin/env python3
"""Compare the numba-compiled and pure-Python simulation backends.

Runs the same small convolution suite in two subprocesses (one per value of
RPIPE_BACKEND), checks the reports are byte-identical, and prints wall-clock
times plus simulated cycles/second for each backend.

Usage: python benchmarks/compare_backends.py [--model lenet --scale 0.25]
"""

import argparse
import json
import os
import subprocess
import sys
import time

_WORKLOAD = r"""
import json, sys, time
from rpipe.bench import RunConfig, run_benchmark
from rpipe.kernelgen import ConvSpec
import rpipe

spec_args = json.loads(sys.argv[1])
if spec_args.get("model"):
    cfg = RunConfig(models={spec_args["model"]: spec_args["scale"]}, seed=7)
else:
    cfg = RunConfig(specs=[ConvSpec(M=4, C=4, H_in=14, W_in=14, H_fil=3, W_fil=3)], seed=7)
run_benchmark(RunConfig(specs=[ConvSpec(M=1, C=1, H_in=2, W_in=2, H_fil=1, W_fil=1)]))  # JIT warm-up
t0 = time.time()
rep = run_benchmark(cfg)
sim_seconds = time.time() - t0
total_cycles = 0
for mrep in rep.models.values():
    for agg in mrep["aggregates"].values():
        total_cycles += agg["cycles"]
print(json.dumps({
    "backend": rpipe.backend_name(),
    "total_cycles": total_cycles,
    "sim_seconds": sim_seconds,
    "report": json.loads(rep.to_json()),
}))
"""


def run_backend(backend, workload_args):
    env = dict(os.environ, RPIPE_BACKEND=backend)
    t0 = time.time()
    proc = subprocess.run(
        [sys.executable, "-c", _WORKLOAD, json.dumps(workload_args)],
        env=env,
        capture_output=True,
        text=True,
    )
    elapsed = time.time() - t0
    if proc.returncode != 0:
        print(proc.stderr, file=sys.stderr)
        raise SystemExit("backend %s failed" % backend)
    doc = json.loads(proc.stdout)
    assert doc["backend"] == backend
    return doc, elapsed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", help="lenet|resnet20|mobilenetv1 (default: one small custom layer)")
    ap.add_argument("--scale", type=float, default=0.125)
    args = ap.parse_args()
    workload = {"model": args.model, "scale": args.scale}

    print("workload:", "model %s @ %s" % (args.model, args.scale) if args.model else "small custom layer")
    results = {}
    for backend in ("numba", "python"):
        try:
            doc, elapsed = run_backend(backend, workload)
        except SystemExit as exc:
            print("  %-7s unavailable (%s)" % (backend, exc))
            continue
        results[backend] = (doc, elapsed)
        rate = doc["total_cycles"] / doc["sim_seconds"]
        print(
            "  %-7s %8.2fs sim (%6.2fs wall)  %12d simulated cycles  %12.0f cycles/s"
            % (backend, doc["sim_seconds"], elapsed, doc["total_cycles"], rate)
        )

    if len(results) == 2:
        same = results["numba"][0]["report"] == results["python"][0]["report"]
        print("reports byte-identical:", same)
        speedup = results["python"][0]["sim_seconds"] / results["numba"][0]["sim_seconds"]
        print("numba speedup: %.1fx (simulation time, JIT warm-up excluded)" % speedup)
        if not same:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
