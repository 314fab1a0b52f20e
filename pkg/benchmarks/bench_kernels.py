"""Micro-benchmark: compiled Q-network kernels vs the numpy reference.

Runs mlp_forward and mlp_backward on representative shapes (the default
production network is 99 -> 64 -> 64 -> 10 with minibatches of 64) and
prints best-of-N timings for each available backend.

Usage: python3 benchmarks/bench_kernels.py [--repeats N] [--number N]
"""

import argparse
import timeit

import numpy as np

from qpress.kernels import reference

try:
    from qpress.kernels import _native as native
except ImportError:
    native = None

# (label, batch, layer widths). The first row is the shipped default.
SHAPES = [
    ("default 99-64-64-10, batch 64", 64, (99, 64, 64, 10)),
    ("single row 99-64-64-10", 1, (99, 64, 64, 10)),
    ("wide 99-256-256-10, batch 64", 64, (99, 256, 256, 10)),
    ("tiny 8-16-10, batch 32", 32, (8, 16, 10)),
]


def build_case(batch: int, widths: tuple, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch, widths[0]))
    weights = [
        rng.standard_normal((widths[i + 1], widths[i])) * 0.1
        for i in range(len(widths) - 1)
    ]
    biases = [np.zeros(widths[i + 1]) for i in range(len(widths) - 1)]
    actions = rng.integers(0, widths[-1], size=batch)
    targets = rng.standard_normal(batch)
    return x, weights, biases, actions, targets


def best_us(fn, repeats: int, number: int) -> float:
    times = timeit.repeat(fn, repeat=repeats, number=number)
    return min(times) / number * 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--number", type=int, default=200)
    args = parser.parse_args()

    backends = [("python", reference)]
    if native is not None:
        backends.append(("native", native))
    else:
        print("note: compiled extension not importable; timing reference only")

    header = f"{'case':34s} {'op':8s}" + "".join(
        f" {name + ' (us)':>13s}" for name, _ in backends
    )
    if len(backends) == 2:
        header += f" {'speedup':>9s}"
    print(header)
    print("-" * len(header))

    for label, batch, widths in SHAPES:
        x, weights, biases, actions, targets = build_case(batch, widths)
        for op in ("forward", "backward"):
            cols = []
            for _, mod in backends:
                if op == "forward":
                    fn = lambda m=mod: m.mlp_forward(x, weights, biases)
                else:
                    fn = lambda m=mod: m.mlp_backward(
                        x, actions, targets, weights, biases
                    )
                cols.append(best_us(fn, args.repeats, args.number))
            line = f"{label:34s} {op:8s}" + "".join(f" {c:13.2f}" for c in cols)
            if len(cols) == 2:
                line += f" {cols[0] / cols[1]:8.2f}x"
            print(line)

    # Sanity: both backends must agree on the numbers they produce.
    if native is not None:
        x, weights, biases, actions, targets = build_case(64, (99, 64, 64, 10))
        out_ref = reference.mlp_forward(x, weights, biases)
        out_nat = native.mlp_forward(x, weights, biases)
        loss_ref, gw_ref, _ = reference.mlp_backward(x, actions, targets, weights, biases)
        loss_nat, gw_nat, _ = native.mlp_backward(x, actions, targets, weights, biases)
        assert np.allclose(out_ref, out_nat, atol=1e-10)
        assert abs(loss_ref - loss_nat) < 1e-10
        assert all(np.allclose(a, b, atol=1e-10) for a, b in zip(gw_ref, gw_nat))
        print("\nagreement check: outputs, loss, and gradients match")


if __name__ == "__main__":
    main()
