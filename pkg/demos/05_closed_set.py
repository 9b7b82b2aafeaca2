"""Without unknown classes the bidirectional strategies reduce to their classical versions.

No unknown is ever queried, so the known fraction r stays at 1 and the
auxiliary classifier is never trained (its unknown probability is taken as
zero). The score then equals the positive-head uncertainty and the query sets
match exactly, round for round.
"""

import numpy as np

from bual.config import RunConfig, to_plan
from bual.loop import run_comparison

plan = to_plan(RunConfig(openness=0.0, seeds=(0,), rounds=4))
for family in ("LC", "Margin", "Entropy"):
    out = run_comparison(plan, [family, "B-" + family])
    same = all(np.array_equal(a.queried, b.queried) and a.accuracy == b.accuracy
               for a, b in zip(out[family][0], out["B-" + family][0]))
    accs = [f"{r.accuracy:.4f}" for r in out["B-" + family][0]]
    print(f"{family:8s} vs B-{family:8s} identical every round: {same}  accuracy {accs}")
