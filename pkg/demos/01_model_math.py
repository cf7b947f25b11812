"""
The model, checked by brute force
=================================

A conditional RBM has binary visible units v (users), binary hidden units h
and a binary feature vector f (an item's actors and genres).  Its energy is

    E(v, h; f) = -a.v - b.h - v W h - f U h

Everything the trainer relies on follows from this one function.  For tiny
models we can enumerate every configuration and compare.
"""

import math

import numpy as np

from coldstart_crbm import oracles, verify
from coldstart_crbm.model import CrbmParams, RbmParams, energy_rbm, hidden_probs
from coldstart_crbm.training import exact_gradient

# %%
# A one-visible, one-hidden machine with a = 1, b = 2, W = 3.  The all-on
# state has energy -(1 + 2 + 3).

p = RbmParams([1.0], [2.0], [[3.0]])
print("E(1, 1) =", energy_rbm(p, [1], [1]))

# %%
# The partition function sums exp(-E) over the four states.  With only a
# visible bias of 1 it is 1 + 1 + e + e.

q = RbmParams([1.0], [0.0], [[0.0]])
print("Z =", oracles.partition_brute_force(q), " 2(1+e) =", 2 * (1 + math.e))

# %%
# The hidden units are conditionally independent given v, so
# p(h_n = 1 | v, f) is a logistic function of b + vW + fU.  Summing the
# enumerated joint over the other units gives the same number.

rng = np.random.default_rng(0)
p = verify.random_crbm(rng, n_visible=4, n_hidden=3, n_features=2)
v = np.array([1.0, 0.0, 1.0, 1.0])
f = np.array([0.0, 1.0])
closed = hidden_probs(p, v, f)
enumerated = [oracles.conditional_h_enumerated(p, v, n, f) for n in range(3)]
print("closed form :", np.round(closed, 12))
print("enumerated  :", np.round(enumerated, 12))

# %%
# The log-likelihood gradient is <.>_data - <.>_model.  Compare the
# enumerated expectations with central finite differences of ln p(v | f).

visibles = rng.integers(0, 2, (3, 4)).astype(float)
features = rng.integers(0, 2, (3, 2)).astype(float)
g = exact_gradient(p, visibles, features).flat()
fd = verify.finite_difference_gradient(p, visibles, features)
print("relative gradient error:", np.linalg.norm(g - fd) / np.linalg.norm(fd))

# %%
# Features only move the hidden biases: conditioning on f gives an ordinary
# RBM with b replaced by b + fU.

r = p.conditioned(f)
print("b + fU :", r.b)

# %%
# The same checks on fifty random machines, as run by
# ``coldstart-crbm verify``.

for result in verify.run_checks(trials=50, seed=0):
    print(result.line())

# %%
# With U = 0 the conditional model is the plain RBM.

flat = CrbmParams(p.base, np.zeros_like(p.U))
print("U = 0 reduces to RBM:",
      np.array_equal(hidden_probs(flat, v, f), hidden_probs(p.base, v)))
