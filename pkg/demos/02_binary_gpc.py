"""Binary GP classification with EP on a 1-d toy problem.

Fits the probit-likelihood GPC to points whose class is indicated by which
of two count features fires, then prints the EP evidence and predictive
probabilities along a sweep of inputs.
"""

import numpy as np

from rumourgp import (
    BinaryDataset,
    EPConfig,
    LinearKernelParams,
    TaskedInput,
    ep_fit,
    predict_latent,
    predict_prob,
)
from rumourgp.kernels import add_jitter, linear_gram_matrix, stack_features
from rumourgp.textproc import SparseFeatureVector


def vec(a, b):
    dense = np.array([a, b], dtype=float)
    idx = np.flatnonzero(dense)
    return SparseFeatureVector(dims=2, indices=idx, values=dense[idx])


rng = np.random.default_rng(0)
inputs, targets = [], []
for _ in range(24):
    y = 1.0 if rng.random() < 0.5 else -1.0
    strength = float(rng.integers(1, 4))
    x = vec(strength, 0) if y > 0 else vec(0, strength)
    inputs.append(TaskedInput(x=x, task=0))
    targets.append(y)
data = BinaryDataset(inputs=inputs, targets=np.array(targets))

params = LinearKernelParams(variance=1.0)
X = stack_features([ti.x for ti in data.inputs])
K, jitter = add_jitter(linear_gram_matrix(X, params))
# duplicated inputs slow the sweep-wise fixed point down; allow extra sweeps
approx = ep_fit(K, data.targets, EPConfig(max_sweeps=400))
print(f"EP converged={approx.converged} after {approx.sweeps} sweeps")
print(f"log evidence {approx.log_evidence:.3f} (jitter {jitter:.2e})")

print()
print("predictive sweep: feature-0 count from 0..3 against feature-1 = 1")
tests = [vec(c, 1) for c in range(4)]
Xs = stack_features(tests)
k_star = linear_gram_matrix(X, params, Xs)
k_ss = np.array([linear_gram_matrix(Xs[i], params)[0, 0] for i in range(len(tests))])
lp = predict_latent(approx, K, k_star, k_ss)
probs = predict_prob(lp)
for c, (m, v, p) in enumerate(zip(lp.mean, lp.variance, probs)):
    print(f"count={c}: latent mean {m:+.3f} var {v:.3f} -> p(+1) = {p:.3f}")
