"""Exact quantities by full enumeration, for tiny models only.

Nothing here uses the closed-form conditionals of :mod:`.model`; every
probability comes from summing ``exp(-E)`` over binary configurations, so
these functions can check the fast paths.
"""

import itertools

import numpy as np
from scipy.special import logsumexp

from .model import CrbmParams, energy_crbm, energy_rbm

MAX_UNITS = 20


class EnumerationBoundError(ValueError):
    pass


def check_bound(n_visible, n_hidden):
    if n_visible + n_hidden > MAX_UNITS:
        raise EnumerationBoundError(
            f"exact enumeration needs M + N <= {MAX_UNITS}, got {n_visible} + {n_hidden}; "
            "use the sampling-based training diagnostics instead")


def binary_configs(n):
    """All 2**n binary vectors as rows, in lexicographic order."""
    if n == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def _rbm_of(p, f):
    if isinstance(p, CrbmParams):
        return p.conditioned(np.zeros(p.n_features) if f is None else f)
    if f is not None:
        raise ValueError("feature vector given for a plain RBM")
    return p


def neg_energy_table(p, f=None):
    """``-E(v, h)`` for every configuration; rows index v, columns h."""
    r = _rbm_of(p, f)
    check_bound(r.n_visible, r.n_hidden)
    V = binary_configs(r.n_visible)
    H = binary_configs(r.n_hidden)
    return (V @ r.a)[:, None] + (H @ r.b)[None, :] + V @ r.W @ H.T


def log_partition(p, f=None):
    return float(logsumexp(neg_energy_table(p, f)))


def partition_brute_force(p, f=None):
    return float(np.exp(log_partition(p, f)))


def joint_probabilities(p, f=None):
    t = neg_energy_table(p, f)
    return np.exp(t - logsumexp(t))


def _visible_row(v):
    """Row of ``v`` in :func:`binary_configs` ordering."""
    v = np.asarray(v)
    return int(sum(int(x) << (len(v) - 1 - k) for k, x in enumerate(v)))


def log_marginal(p, v, f=None):
    """``ln p(v)`` (or ``ln p(v | f)`` for a conditional model)."""
    t = neg_energy_table(p, f)
    return float(logsumexp(t[_visible_row(v)]) - logsumexp(t))


def log_likelihood_brute_force(p, visibles, features=None):
    """Sum of ``ln p(v_t)`` over a list of visible vectors.

    For a :class:`CrbmParams` each vector may carry its own feature vector
    (``features[t]``); omitted features mean ``f = 0``.
    """
    total = 0.0
    cache = {}
    for t, v in enumerate(visibles):
        f = None if features is None else np.asarray(features[t], dtype=np.float64)
        key = None if f is None else f.tobytes()
        if key not in cache:
            table = neg_energy_table(p, f)
            cache[key] = (table, logsumexp(table))
        table, log_z = cache[key]
        total += float(logsumexp(table[_visible_row(v)]) - log_z)
    return total


def model_moments(p, f=None):
    """Exact ``<v>``, ``<h>`` and ``<v h^T>`` under the model."""
    r = _rbm_of(p, f)
    P = joint_probabilities(p, f)
    V = binary_configs(r.n_visible)
    H = binary_configs(r.n_hidden)
    pv = P.sum(axis=1)
    ph = P.sum(axis=0)
    return V.T @ pv, H.T @ ph, V.T @ P @ H


def hidden_posterior_mean(p, v, f=None):
    """Exact ``E[h | v]`` by summing over hidden configurations."""
    t = neg_energy_table(p, f)[_visible_row(v)]
    w = np.exp(t - logsumexp(t))
    r = _rbm_of(p, f)
    return binary_configs(r.n_hidden).T @ w


def conditional_v_enumerated(p, h, m):
    """p(v_m = 1 | h) from the energy function evaluated on every v."""
    if isinstance(p, CrbmParams):
        p = p.base
    check_bound(p.n_visible, p.n_hidden)
    V = binary_configs(p.n_visible)
    neg = np.array([-energy_rbm(p, v, h) for v in V])
    return float(np.exp(logsumexp(neg[V[:, m] == 1]) - logsumexp(neg)))


def conditional_h_enumerated(p, v, n, f=None):
    """p(h_n = 1 | v[, f]) from the energy function evaluated on every h."""
    check_bound(p.n_visible, p.n_hidden)
    H = binary_configs(p.n_hidden)
    if isinstance(p, CrbmParams):
        fv = np.zeros(p.n_features) if f is None else f
        neg = np.array([-energy_crbm(p, v, h, fv) for h in H])
    else:
        neg = np.array([-energy_rbm(p, v, h) for h in H])
    return float(np.exp(logsumexp(neg[H[:, n] == 1]) - logsumexp(neg)))
