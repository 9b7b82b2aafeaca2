"""Full active-learning runs on the synthetic open-set benchmark.

Eight known Gaussian clusters sit on an inner circle and unknown clusters on
an outer one. Every strategy sees the same data and initial pool per seed.
The table reports final test accuracy on known classes and the recognition
rate, which is the fraction of queried examples that turned out known.
"""

import time

import numpy as np

from bual.config import RunConfig, to_plan
from bual.loop import aggregate, recognition_rate, run_comparison

strategies = ["Random", "Coreset", "Margin", "B-Margin", "Entropy", "B-Entropy"]
for openness in (0.2, 0.6):
    t0 = time.perf_counter()
    results = run_comparison(to_plan(RunConfig(openness=openness)), strategies)
    print(f"\nopenness {openness}  ({time.perf_counter() - t0:.1f} s)")
    print(f"  {'strategy':10s} {'final acc':>14s} {'recognition':>12s}")
    for name, per_seed in results.items():
        acc = [recs[-1].accuracy for recs in per_seed.values()]
        rec = [recognition_rate(recs) for recs in per_seed.values()]
        print(f"  {name:10s} {np.mean(acc):7.4f} ± {np.std(acc):.4f} {np.mean(rec):12.3f}")
    print("  B-Margin per round (mean over seeds): accuracy / r")
    for row in aggregate(results["B-Margin"]):
        print(f"    round {row['round']}: {row['acc_mean']:.4f} / {row['r_mean']:.3f}")
