#!/usr/bin/env python3
"""Benchmark the compiled vs pure numpy convolution kernels.

Times conv1d_forward and conv1d_backward on shapes representative of the
training loops, plus one full training step of the foundation model per
backend.  Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from reprogait import backend


def time_call(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_kernels(repeats):
    cases = [
        ("batch 64, 6->12 ch, T=20, K=3", (64, 6, 12, 20, 3, 1)),
        ("batch 64, 12->12 ch, T=20, K=3, dil 2", (64, 12, 12, 20, 3, 2)),
        ("batch 16, 6->10 ch, T=20, K=3", (16, 6, 10, 20, 3, 1)),
        ("batch 256, 12->12 ch, T=40, K=5", (256, 12, 12, 40, 5, 1)),
    ]
    backends = backend.available_backends()
    print(f"active backend: {backend.backend_name()}")
    print(f"available: {', '.join(sorted(backends))}\n")
    header = f"{'case':<42}{'direction':<10}" + "".join(
        f"{name:>14}" for name in sorted(backends)
    )
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for label, (b, c_in, c_out, t_len, k, dil) in cases:
        x = rng.normal(size=(b, c_in, t_len))
        kernel = rng.normal(size=(c_out, c_in, k))
        bias = rng.normal(size=c_out)
        gy = rng.normal(size=(b, c_out, t_len))
        rows = {
            "forward": {
                name: time_call(
                    lambda m=mod: m.conv1d_forward(x, kernel, bias, dil), repeats
                )
                for name, mod in backends.items()
            },
            "backward": {
                name: time_call(
                    lambda m=mod: m.conv1d_backward(x, kernel, dil, gy), repeats
                )
                for name, mod in backends.items()
            },
        }
        for direction, times in rows.items():
            line = f"{label:<42}{direction:<10}"
            for name in sorted(times):
                line += f"{times[name] * 1e6:>12.1f}us"
            if len(times) > 1:
                line += f"{times['python'] / times['cython']:>9.2f}x"
            print(line)


def bench_train_step(repeats):
    from reprogait.autodiff import Tensor
    from reprogait.foundation import (
        FoundationTrainConfig,
        build_foundation,
        predict_tensor,
    )
    from reprogait.layers import mse
    from reprogait.optim import Adam

    print("\nfull foundation train step (batch 64, 6 ch, T=20, [12,12] core):")
    cfg = FoundationTrainConfig(tasks=[0])
    model = build_foundation(6, 20, 1, cfg)
    opt = Adam(model.parameters(), lr=1e-3)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(64, 6, 20))
    y = rng.normal(size=(64, 1))

    def step():
        loss = mse(predict_tensor(model, Tensor(x), 0), Tensor(y))
        loss.backward()
        opt.step()

    per = time_call(step, max(10, repeats // 10))
    print(f"  {backend.backend_name()}: {per * 1e3:.2f} ms/step")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    bench_kernels(args.repeats)
    bench_train_step(args.repeats)


if __name__ == "__main__":
    main()
