"""Reference log-softmax + NLL for the 4x7 cross-entropy test case.

Uses numpy's float64 log-sum-exp directly (no shared code with the C++
implementation). Prints the logits literal and the expected masked mean NLL.
"""
import numpy as np

rng = np.random.default_rng(20240501)
logits = np.round(rng.normal(scale=2.0, size=(4, 7)), 6)
targets = [3, 0, 6, 2]
mask = [1, 0, 1, 1]

lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1)) + logits.max(axis=1)
nll = lse - logits[np.arange(4), targets]
loss_all = nll.mean()
loss_masked = nll[np.array(mask, bool)].mean()

print("logits = {" + ", ".join(repr(float(v)) for v in logits.ravel()) + "}")
print("targets =", targets, "mask =", mask)
print("loss_all = %.17g" % loss_all)
print("loss_masked = %.17g" % loss_masked)
