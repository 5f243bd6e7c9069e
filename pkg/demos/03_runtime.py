"""Initializer cost as the number of positive instances grows.

The original initializer evaluates the objective once per positive instance,
so its cost is quadratic in N+. The clustering initializers evaluate it K
times (or not at all). Their time is mostly clustering, and the iteration
count varies from dataset to dataset, so their curves are bumpy. They still
stay far below the original once N+ is in the thousands.

Run:  python demos/03_runtime.py   (under a minute)
"""

from miace.bench import COMPLEXITY, run_bench

N_NEG, BAGS, D = 500, 40, 8
sizes = [(n, N_NEG, BAGS, D) for n in (4000, 8000, 16000)]
report = run_bench(sizes, K=5, trials=5)

print(f"{'N+':>6} " + "".join(f"{m:>15}" for m in COMPLEXITY))
for n, *_ in sizes:
    cells = "".join(f"{report.row(m, n, N_NEG, BAGS, D).median_ms:>12.1f} ms" for m in COMPLEXITY)
    print(f"{n:>6} {cells}")

print("\nlog-log slope of time against N+:")
for m, cost in COMPLEXITY.items():
    print(f"  {m:<14} {report.slope(m, N_NEG):5.2f}   {cost}")
