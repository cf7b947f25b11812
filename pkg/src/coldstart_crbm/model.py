"""Binary RBM / feature-conditional RBM parameterization.

Visible units are users, hidden units are latent item factors, and one set
of parameters is shared by every item.  Shapes: ``a`` (M,), ``b`` (N,),
``W`` (M, N), ``U`` (K, N).
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODEL_FORMAT = "coldstart-crbm/1"

# pre-activations are clipped here before exponentiation
SATURATION = 30.0


def sigmoid(x):
    x = np.clip(x, -SATURATION, SATURATION)
    return 1.0 / (1.0 + np.exp(-x))


def _frozen(x, name, ndim):
    a = np.array(x, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


def _check_len(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"{what} must have length {n}, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class RbmParams:
    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, "a", 1))
        object.__setattr__(self, "b", _frozen(self.b, "b", 1))
        object.__setattr__(self, "W", _frozen(self.W, "W", 2))
        if self.W.shape != (len(self.a), len(self.b)):
            raise ValueError(f"W has shape {self.W.shape}, expected {(len(self.a), len(self.b))}")

    @property
    def n_visible(self):
        return len(self.a)

    @property
    def n_hidden(self):
        return len(self.b)

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)))

    def restrict(self, visible):
        """The sub-RBM over a subset of visible units."""
        return RbmParams(self.a[visible], self.b, self.W[visible])


@dataclass(frozen=True, eq=False)
class CrbmParams:
    base: RbmParams
    U: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(self.U, "U", 2))
        if self.U.shape[1] != self.base.n_hidden:
            raise ValueError(f"U has {self.U.shape[1]} columns, expected {self.base.n_hidden}")

    @property
    def a(self):
        return self.base.a

    @property
    def b(self):
        return self.base.b

    @property
    def W(self):
        return self.base.W

    @property
    def n_visible(self):
        return self.base.n_visible

    @property
    def n_hidden(self):
        return self.base.n_hidden

    @property
    def n_features(self):
        return self.U.shape[0]

    @classmethod
    def zeros(cls, n_visible, n_hidden, n_features):
        return cls(RbmParams.zeros(n_visible, n_hidden), np.zeros((n_features, n_hidden)))

    def conditioned(self, f):
        """RBM whose hidden biases absorb the feature drive ``b + f U``."""
        f = _check_len(f, self.n_features, "f")
        return RbmParams(self.a, self.b + f @ self.U, self.W)

    def to_dict(self):
        return {"a": self.a.tolist(), "b": self.b.tolist(),
                "W": self.W.tolist(), "U": self.U.tolist()}

    @classmethod
    def from_dict(cls, d):
        n = len(d["b"])
        U = np.array(d["U"], dtype=np.float64).reshape(-1, n)
        W = np.array(d["W"], dtype=np.float64).reshape(-1, n)
        return cls(RbmParams(d["a"], d["b"], W), U)

    def fingerprint(self):
        h = hashlib.sha256()
        for x in (self.a, self.b, self.W, self.U):
            h.update(np.ascontiguousarray(x, dtype="<f8").tobytes())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, CrbmParams):
            return NotImplemented
        return all(np.array_equal(x, y) for x, y in zip(
            (self.a, self.b, self.W, self.U), (other.a, other.b, other.W, other.U)))

    __hash__ = None


def _as_rbm(p):
    return p.base if isinstance(p, CrbmParams) else p


def energy_rbm(p, v, h):
    p = _as_rbm(p)
    v = _check_len(v, p.n_visible, "v")
    h = _check_len(h, p.n_hidden, "h")
    return float(-(p.a @ v) - (p.b @ h) - v @ p.W @ h)


def energy_crbm(p, v, h, f):
    f = _check_len(f, p.n_features, "f")
    h = _check_len(h, p.n_hidden, "h")
    return energy_rbm(p.base, v, h) - float(f @ p.U @ h)


def visible_probs(p, h):
    """p(v_m = 1 | h) for every visible unit."""
    p = _as_rbm(p)
    h = _check_len(h, p.n_hidden, "h")
    return sigmoid(p.a + p.W @ h)


def hidden_probs(p, v, f=None):
    """p(h_n = 1 | v[, f]) for every hidden unit."""
    v = _check_len(v, p.n_visible, "v")
    pre = p.b + v @ p.W
    if f is not None:
        f = _check_len(f, p.n_features, "f")
        pre = pre + f @ p.U
    return sigmoid(pre)


def p_v_given_h(p, h, m):
    return float(visible_probs(p, h)[m])


def p_h_given_v(p, v, n):
    return float(hidden_probs(_as_rbm(p), v)[n])


def p_h_given_v_f(p, v, f, n):
    return float(hidden_probs(p, v, f)[n])


def cold_start_scores(p, f):
    """Mean-field reconstruction of every user's visible unit for a new item.

    With no ratings the hidden layer is driven only by ``b + f U``; the
    visible units are then reconstructed from the hidden probabilities.
    An all-zero ``f`` gives the bias-only score.
    """
    f = _check_len(f, p.n_features, "f")
    h = sigmoid(p.b + f @ p.U)
    return sigmoid(p.a + p.W @ h)


def cold_start_score_matrix(p, F):
    """Scores for several items at once; rows of ``F`` are feature vectors."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    if F.shape[1] != p.n_features:
        raise ValueError(f"F has {F.shape[1]} columns, expected {p.n_features}")
    H = sigmoid(p.b + F @ p.U)
    return sigmoid(p.a + H @ p.W.T)


def save_model(path, params, users=(), feature_labels=(), config=None):
    """Write a model file (JSON, floats as shortest round-trip repr)."""
    config = dict(config or {})
    doc = {
        "format": MODEL_FORMAT,
        "M": params.n_visible,
        "N": params.n_hidden,
        "K": params.n_features,
        "users": list(users),
        "feature_labels": list(feature_labels),
        "config": config,
        "config_hash": config_hash(config),
        "params": params.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class ModelFile:
    params: CrbmParams
    users: tuple
    feature_labels: tuple
    config: dict
    config_hash: str


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unsupported model format {doc.get('format')!r}")
    params = CrbmParams.from_dict(doc["params"])
    if (params.n_visible, params.n_hidden, params.n_features) != (doc["M"], doc["N"], doc["K"]):
        raise ValueError(f"{path}: parameter shapes disagree with header")
    return ModelFile(params, tuple(doc["users"]), tuple(doc["feature_labels"]),
                     doc["config"], doc["config_hash"])


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
