"""Check the hand-written backward pass against central finite differences.

Both losses are covered: ordinary cross-entropy, and the complementary-label
loss -log(1 - p_k) that trains the negative head. Cases whose rectifier
inputs sit too close to zero are redrawn, since the kink would make the
numeric derivative meaningless.
"""

import numpy as np

from bual.gradcheck import max_relative_error, numeric_gradient, random_case, run_gradcheck
from bual.nn import ce_loss_grad, nl_loss_grad

rng = np.random.default_rng(0)
net, x, targets = random_case(rng, "nl")
loss, analytic = nl_loss_grad(net, x, targets)
numeric = numeric_gradient(net, x, targets, "nl")
print(f"one case: {x.shape[0]} rows, layers {[w.shape for w in net.weights]}")
print(f"  loss {loss:.6f}, max relative error {max_relative_error(analytic, numeric):.2e}")

loss, analytic = ce_loss_grad(net, x, targets, weight_decay=1e-3)
numeric = numeric_gradient(net, x, targets, "ce", weight_decay=1e-3)
print(f"  same batch with cross-entropy and weight decay: {max_relative_error(analytic, numeric):.2e}")

report = run_gradcheck(n_cases=20, seed=1)
print(f"20 random cases: CE {report.max_error_ce:.2e}, NL {report.max_error_nl:.2e}")
