"""Times the compiled conv gather/scatter kernels against the numpy
fallback on training-shaped workloads.

Run from the repo root:

    python3 benchmarks/bench_conv.py [--batch 64] [--repeats 30]

The two backends must agree bit-for-bit (asserted here before timing);
the point of the compiled path is time, not numerics. Timings cover the
forward gather (im2row), the backward scatter (col2im_add), and a full
encoder forward+backward through the public layer API.
"""

import argparse
import importlib
import os
import statistics
import sys
import time

import numpy as np


def _load_backend(name):
    os.environ["VASCNAV_CONV_BACKEND"] = name
    for mod in [m for m in sys.modules if m.startswith("vascnav")]:
        del sys.modules[mod]
    backend = importlib.import_module("vascnav.nn.backend")
    assert backend.backend_name() == name, (
        f"asked for {name}, got {backend.backend_name()} "
        "(compiled extension not built?)")
    return backend


def _time(fn, repeats):
    best = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best.append(time.perf_counter() - t0)
    return min(best), statistics.median(best)


def bench_kernels(batch, repeats):
    shapes = {
        "conv1 64x64": (batch, 3, 64, 64, 5, 2),
        "conv2 30x30": (batch, 16, 30, 30, 3, 1),
        "conv1 140x140": (batch, 3, 140, 140, 5, 2),
    }
    rows = []
    for label, (B, C, H, W, k, stride) in shapes.items():
        rng = np.random.default_rng(0)
        x = rng.normal(size=(B, C, H, W))
        results = {}
        for name in ("numpy", "compiled"):
            backend = _load_backend(name)
            cols = backend.im2row(x, k, stride)
            gx = backend.col2im_add(cols, B, C, H, W, k, stride)
            results[name] = (cols.copy(), gx.copy())
            fwd = _time(lambda: backend.im2row(x, k, stride), repeats)
            bwd = _time(lambda: backend.col2im_add(cols, B, C, H, W, k,
                                                   stride), repeats)
            rows.append((f"{label} gather", name, fwd[0], fwd[1]))
            rows.append((f"{label} scatter", name, bwd[0], bwd[1]))
        for a, b in zip(results["numpy"], results["compiled"]):
            assert np.array_equal(a, b), f"backends disagree on {label}"
    return rows


def bench_encoder(batch, repeats):
    rows = []
    for name in ("numpy", "compiled"):
        _load_backend(name)
        from vascnav.agent.networks import (encode, encode_backward,
                                            init_networks)
        rng = np.random.default_rng(1)
        nets = init_networks(64, 64, rng)
        images = rng.normal(size=(batch, 3, 64, 64))
        shifts = np.zeros((batch, 2))

        def full_pass():
            feat, cache = encode(nets.encoder, nets.alix, images,
                                 shifts=shifts, train_shift=True)
            encode_backward(np.ones_like(feat), cache)

        t = _time(full_pass, repeats)
        rows.append((f"encoder fwd+bwd b{batch}", name, t[0], t[1]))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    print(f"{'workload':22} {'backend':9} {'best s':>10} {'median s':>10}")
    kernel_rows = bench_kernels(args.batch, args.repeats)
    encoder_rows = bench_encoder(args.batch, max(3, args.repeats // 3))
    for label, name, best, med in kernel_rows + encoder_rows:
        print(f"{label:22} {name:9} {best:10.5f} {med:10.5f}")

    by = {}
    for label, name, best, _ in kernel_rows + encoder_rows:
        by.setdefault(label, {})[name] = best
    print()
    for label, d in by.items():
        print(f"{label:22} compiled speedup x{d['numpy'] / d['compiled']:.2f}")


if __name__ == "__main__":
    main()
