"""Desk-scale performance runs with CSV output.

Smaller parameter grids than the CLI defaults so the script finishes in
seconds; `oblivion-bench` runs the full sweeps (attributes 1..50, key sizes
512..4096, requests 2000+).
"""

from oblivion.bench import (
    fit_linear,
    results_to_csv,
    run_certify,
    run_throughput,
    run_verify_attrs,
)
from oblivion.corpus import generate_corpus


def main():
    print("=== certification scales linearly in the attribute count ===")
    results = run_certify([1024], range(1, 21), reps=5, seed=1)
    slope, intercept, r2 = fit_linear(
        [r.params["attrs"] for r in results], [r.minimum for r in results]
    )
    print(f"per-attribute cost ~ {1000 * slope:.2f} ms, R^2 = {r2:.4f}\n")

    print("=== packed vs individual attribute verification ===")
    results = run_verify_attrs([1024], [1, 10, 25, 50], reps=5, seed=1)
    for r in results:
        print(f"  l={r.params['attrs']:3}: packed uses "
              f"{r.extra['packed_modexps']} exponentiation, individual uses "
              f"{r.extra['individual_modexps']}")
    print()

    print("=== request throughput (message + attribute verification) ===")
    articles = generate_corpus(count=10, seed=7)
    [result] = run_throughput([300], articles, attrs=20, bits=1024, seed=1)
    print(f"  {result.extra['req_per_s']} requests/second, attribute share "
          f"{float(result.extra['attr_share']):.1%}\n")

    print("=== CSV (stable schema per experiment) ===")
    print(results_to_csv(results[:4]))


if __name__ == "__main__":
    main()
