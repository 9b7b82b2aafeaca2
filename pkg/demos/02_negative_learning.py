"""Where do unknown-class examples land after negative learning?

A classifier is trained on the few labeled known examples, then a copy with
a fresh head is fine-tuned on random complementary labels. Labeled rows never
receive their own class; unlabeled rows receive any class. Averaging the
softmax over a few epochs gives the negative-head confidence. Unknown
examples should end up more confident than known ones, which is what the
bidirectional score exploits.
"""

import numpy as np

from bual.config import RunConfig, to_plan
from bual.loop import separation_data


def histogram(values, bins):
    counts, _ = np.histogram(values, bins=bins)
    return counts / max(len(values), 1)


plan = to_plan(RunConfig(openness=0.5))
bins = np.linspace(0.0, 1.0, 11)
for seed in (0, 1, 2):
    _, known, pos, neg = separation_data(plan, seed)
    print(f"seed {seed}: {known.sum()} known and {(~known).sum()} unknown unlabeled examples")
    print(f"  positive head mean max-prob  known {pos[known].mean():.3f}  unknown {pos[~known].mean():.3f}")
    print(f"  negative head mean max-prob  known {neg[known].mean():.3f}  unknown {neg[~known].mean():.3f}")

print("\nnegative-head max-prob histogram, last seed (fraction per bin)")
hk, hu = histogram(neg[known], bins), histogram(neg[~known], bins)
for lo, a, b in zip(bins[:-1], hk, hu):
    print(f"  [{lo:.1f}, {lo + 0.1:.1f})  known {a:5.2f} {'#' * int(40 * a):40s} unknown {b:5.2f} {'#' * int(40 * b)}")
