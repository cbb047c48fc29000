"""
The loss stack and its gradient
===============================

Evaluate each weighted term for a random prediction, then check one entry
of the analytic gradient against a central difference.
"""

import numpy as np

from nucleitool import encode_targets, loss_breakdown, total_loss, total_loss_grad
from nucleitool.core import PredictionMaps
from nucleitool.synthetic import random_blobs

rng = np.random.default_rng(3)
target = encode_targets(random_blobs(rng, shape=(48, 48), n_range=(2, 4)))
tp = rng.uniform(0.1, 1, (7, 48, 48))
pred = PredictionMaps(
    np_prob=rng.uniform(0.05, 0.95, (48, 48)),
    hv=rng.uniform(-1, 1, (2, 48, 48)),
    dg=rng.uniform(-1, 1, (2, 48, 48)),
    tp_prob=tp / tp.sum(axis=0),
)

for name, value in loss_breakdown(pred, target).items():
    print(f"{name:>14s}  {value:.5f}")

# a perfect prediction scores (numerically) zero
print("loss at the target:", total_loss(target.as_prediction(), target))

grad = total_loss_grad(pred, target)
idx, h = (1, 20, 20), 1e-5
old = pred.hv[idx]
pred.hv[idx] = old + h
up = total_loss(pred, target)
pred.hv[idx] = old - h
down = total_loss(pred, target)
pred.hv[idx] = old
print("d/d hv%s analytic %.6e, finite difference %.6e" % (idx, grad.hv[idx], (up - down) / (2 * h)))
