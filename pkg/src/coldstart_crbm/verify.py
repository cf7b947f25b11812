"""Check the closed-form model math against brute-force enumeration.

Three checks on random tiny models:

* normalization: the joint table sums to one;
* conditionals: p(v_m|h), p(h_n|v) and p(h_n|v,f) equal the ratios of
  enumerated Boltzmann weights;
* gradient: the exact gradient equals central finite differences of the
  exact log-likelihood.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model, oracles
from .model import CrbmParams, RbmParams
from .training import exact_gradient

NORMALIZATION_TOL = 1e-10
CONDITIONAL_TOL = 1e-10
GRADIENT_TOL = 1e-6
FD_STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    tolerance: float
    trials: int = 0
    max_error: float = 0.0
    failures: list = field(default_factory=list)  # instance seeds

    @property
    def passed(self):
        return not self.failures

    def record(self, error, instance_seed):
        self.trials += 1
        self.max_error = max(self.max_error, float(error))
        if not error <= self.tolerance:
            self.failures.append(instance_seed)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" failing seeds {self.failures[:5]}" if self.failures else ""
        return (f"{status} {self.name}: max error {self.max_error:.3e} "
                f"(tol {self.tolerance:.0e}, {self.trials} instances){extra}")


def random_crbm(rng, n_visible, n_hidden, n_features, scale=1.0):
    return CrbmParams(
        RbmParams(rng.normal(0, scale, n_visible), rng.normal(0, scale, n_hidden),
                  rng.normal(0, scale, (n_visible, n_hidden))),
        rng.normal(0, scale, (n_features, n_hidden)))


def random_instance(seed, max_visible=5, max_hidden=4, max_features=3):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(1, max_visible + 1))
    N = int(rng.integers(1, max_hidden + 1))
    K = int(rng.integers(0, max_features + 1))
    return rng, random_crbm(rng, M, N, K)


def normalization_error(p, f=None):
    return abs(float(oracles.joint_probabilities(p, f).sum()) - 1.0)


def conditional_error(p, rng):
    M, N, K = p.n_visible, p.n_hidden, p.n_features
    v = rng.integers(0, 2, M).astype(float)
    h = rng.integers(0, 2, N).astype(float)
    f = rng.integers(0, 2, K).astype(float)
    errs = []
    for m in range(M):
        errs.append(abs(model.p_v_given_h(p.base, h, m) - oracles.conditional_v_enumerated(p, h, m)))
    for n in range(N):
        errs.append(abs(model.p_h_given_v(p.base, v, n)
                        - oracles.conditional_h_enumerated(p.base, v, n)))
        errs.append(abs(model.p_h_given_v_f(p, v, f, n)
                        - oracles.conditional_h_enumerated(p, v, n, f)))
    return max(errs)


def _flatten(p):
    return np.concatenate([p.a, p.b, p.W.ravel(), p.U.ravel()])


def _unflatten(x, M, N, K):
    a, b = x[:M], x[M:M + N]
    W = x[M + N:M + N + M * N].reshape(M, N)
    U = x[M + N + M * N:].reshape(K, N)
    return CrbmParams(RbmParams(a, b, W), U)


def finite_difference_gradient(p, visibles, features, step=FD_STEP):
    M, N, K = p.n_visible, p.n_hidden, p.n_features
    x = _flatten(p)
    out = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        up = oracles.log_likelihood_brute_force(_unflatten(x + e, M, N, K), visibles, features)
        dn = oracles.log_likelihood_brute_force(_unflatten(x - e, M, N, K), visibles, features)
        out[j] = (up - dn) / (2 * step)
    return out


def gradient_error(p, rng, n_vectors=None):
    T = int(rng.integers(1, 5)) if n_vectors is None else n_vectors
    visibles = rng.integers(0, 2, (T, p.n_visible)).astype(float)
    features = rng.integers(0, 2, (T, p.n_features)).astype(float)
    g = exact_gradient(p, visibles, features).flat()
    fd = finite_difference_gradient(p, visibles, features)
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))


def run_checks(trials=50, seed=0, max_visible=5, max_hidden=4, max_features=3):
    """Run all checks on ``trials`` random instances each."""
    results = [CheckResult("normalization", NORMALIZATION_TOL),
               CheckResult("conditional consistency", CONDITIONAL_TOL),
               CheckResult("gradient vs finite differences", GRADIENT_TOL)]
    sizes = dict(max_visible=max_visible, max_hidden=max_hidden, max_features=max_features)
    for t in range(trials):
        inst = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        rng, p = random_instance(inst, **sizes)
        f = rng.integers(0, 2, p.n_features).astype(float)
        results[0].record(max(normalization_error(p.base), normalization_error(p, f)), inst)
        results[1].record(conditional_error(p, rng), inst)
        results[2].record(gradient_error(p, rng), inst)
    return results
