"""Acquisition scores on a handful of hand-made predictions.

The bidirectional score mixes two uncertainties per candidate:
p_aux * unc_n + r * (1 - p_aux) * unc_p, where p_aux is the auxiliary
classifier's unknown-class probability and r is the known fraction of the
previous query. With p_aux = 0 and r = 1 it is plain uncertainty sampling.
"""

import numpy as np

from bual.data import PoolState
from bual.strategies import bidirectional_scores, kcenter_greedy, select_batch, uncertainty
from bual.trainer import PredictionSnapshot

positive = np.array([[0.50, 0.45, 0.05],   # two classes nearly tied
                     [0.90, 0.05, 0.05],   # confident
                     [0.40, 0.30, 0.30],   # spread out
                     [0.34, 0.33, 0.33]])  # unsure, but actually an unknown
negative = np.array([[0.40, 0.35, 0.25],
                     [0.50, 0.30, 0.20],
                     [0.38, 0.32, 0.30],
                     [0.95, 0.03, 0.02]])  # negative head is sure about the unknown
p_aux = np.array([0.05, 0.02, 0.10, 0.90])
snap = PredictionSnapshot(np.arange(4), positive, negative, p_aux)

for family in ("LC", "Margin", "Entropy"):
    print(f"{family:8s} unc_p {np.round(uncertainty(positive, family), 3)}  "
          f"unc_n {np.round(uncertainty(negative, family), 3)}")

for r in (1.0, 0.5):
    table = bidirectional_scores(snap, r, "Margin")
    print(f"B-Margin with r={r}: order {table.indices.tolist()} scores {np.round(table.score, 3).tolist()}")

pool = PoolState(np.array([], dtype=np.int64), np.array([], dtype=np.int64), np.arange(4))
rng = np.random.default_rng(0)
print("top-2 Margin  :", select_batch("Margin", snap, pool, 2, 1.0, rng).tolist())
print("top-2 B-Margin:", select_batch("B-Margin", snap, pool, 2, 1.0, rng).tolist())

pts = np.array([[0.0], [1.0], [10.0], [4.0]])
print("k-center from seed 0, three picks:", kcenter_greedy(pts, [0], 3))
