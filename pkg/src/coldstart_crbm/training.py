"""Contrastive-divergence training of the shared CRBM.

Every training item is its own RBM over the users in its batch; all of them
share one parameter set.  Gradients from ``batch_items`` items are summed
before each update.  Per-item random streams are derived from
``(seed, epoch, item)``, so the result does not depend on the thread count.
"""

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracles
from .data import Density, Task, TaskDataset, to_task
from .model import CrbmParams, RbmParams, sigmoid

logger = logging.getLogger(__name__)

# stream tags mixed into per-epoch seeds
_SHUFFLE, _NEGATIVES, _ITEM = 0, 1, 2


class NumericalError(ArithmeticError):
    """Training produced non-finite parameters.

    ``last_good`` holds the parameters before the failing update.
    """

    def __init__(self, message, last_good=None, epoch=None):
        super().__init__(message)
        self.last_good = last_good
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    hidden_units: int = 100
    learning_rate: float = 0.05
    weight_decay: float = 0.001
    epochs: int = 50
    cd_steps: int = 1
    seed: int = 0
    negative_sample_ratio: float = None
    init_scale: float = 0.01
    batch_items: int = 8
    like_threshold: int = 3
    # both off by default
    momentum: float = 0.0
    lr_decay: float = 0.0

    def __post_init__(self):
        problems = []
        if int(self.hidden_units) != self.hidden_units or self.hidden_units < 1:
            problems.append("hidden_units must be a positive integer")
        if not self.learning_rate > 0:
            problems.append("learning_rate must be positive")
        if not self.weight_decay >= 0:
            problems.append("weight_decay must be non-negative")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            problems.append("epochs must be a non-negative integer")
        if int(self.cd_steps) != self.cd_steps or self.cd_steps < 1:
            problems.append("cd_steps must be >= 1")
        if self.negative_sample_ratio is not None and not self.negative_sample_ratio >= 0:
            problems.append("negative_sample_ratio must be non-negative")
        if not self.init_scale >= 0:
            problems.append("init_scale must be non-negative")
        if int(self.batch_items) != self.batch_items or self.batch_items < 1:
            problems.append("batch_items must be a positive integer")
        if not 0 <= self.momentum < 1:
            problems.append("momentum must be in [0, 1)")
        if not self.lr_decay >= 0:
            problems.append("lr_decay must be non-negative")
        if problems:
            raise ValueError("invalid training config: " + "; ".join(problems))

    def negative_ratio_for(self, task):
        if self.negative_sample_ratio is not None:
            return float(self.negative_sample_ratio)
        return 10.0 if Task(task).dense else 0.0

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_file(cls, path, **overrides):
        """Load from JSON or TOML; ``overrides`` that are not None win."""
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # Python 3.10
                import tomli as tomllib

            values = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            values = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(values) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"{path}: unknown config fields {sorted(unknown)}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class ItemBatch:
    """One item's visible units: the users present and their binary values."""

    item: int
    raters: np.ndarray
    values: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.raters, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        if r.shape != v.shape:
            raise ValueError("raters and values differ in length")
        if len(np.unique(r)) != len(r):
            raise ValueError(f"item {self.item}: duplicate rater indices")
        if not np.isin(v, (0.0, 1.0)).all():
            raise ValueError(f"item {self.item}: visible values must be binary")
        object.__setattr__(self, "raters", r)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))


@dataclass
class GradientAccumulator:
    da: np.ndarray
    db: np.ndarray
    dW: np.ndarray
    dU: np.ndarray
    count: int = 0
    recon_sq: float = 0.0
    n_visible: int = 0

    @classmethod
    def zeros(cls, n_visible, n_hidden, n_features):
        return cls(np.zeros(n_visible), np.zeros(n_hidden),
                   np.zeros((n_visible, n_hidden)), np.zeros((n_features, n_hidden)))

    @classmethod
    def like(cls, p):
        return cls.zeros(p.n_visible, p.n_hidden, p.U.shape[0] if isinstance(p, CrbmParams) else 0)

    def flat(self):
        return np.concatenate([self.da, self.db, self.dW.ravel(), self.dU.ravel()])

    def norm(self):
        return float(np.linalg.norm(self.flat()))


@dataclass(frozen=True)
class _Contribution:
    raters: np.ndarray
    da: np.ndarray
    db: np.ndarray
    dW: np.ndarray
    dU: np.ndarray
    recon_sq: float


def _contribution(p, batch, rng, cd_steps):
    r, v, f = batch.raters, batch.values, batch.features
    W_r = p.W[r]
    a_r = p.a[r]
    drive = p.b + f @ p.U
    h_data = sigmoid(drive + v @ W_r)
    h_model = h_data
    v_model = v
    for _ in range(cd_steps):
        h_state = (rng.random(p.n_hidden) < h_model).astype(np.float64)
        v_prob = sigmoid(a_r + W_r @ h_state)
        v_model = (rng.random(len(r)) < v_prob).astype(np.float64)
        h_model = sigmoid(drive + v_model @ W_r)
    dh = h_data - h_model
    return _Contribution(
        raters=r,
        da=v - v_model,
        db=dh,
        dW=np.outer(v, h_data) - np.outer(v_model, h_model),
        dU=np.outer(f, dh),
        recon_sq=float(((v - v_prob) ** 2).sum()),
    )


def _accumulate(g, c):
    g.da[c.raters] += c.da
    g.db += c.db
    g.dW[c.raters] += c.dW
    g.dU += c.dU
    g.count += 1
    g.recon_sq += c.recon_sq
    g.n_visible += len(c.raters)


def cd_step(p, batch, rng, cd_steps=1, into=None):
    """CD-k statistics ``<.>_data - <.>_recon`` for one item.

    Hidden statistics use probabilities in both phases; the reconstruction
    samples binary visible states.  Only the batch's raters receive visible
    and weight-row gradient.  Returns ``into`` (or a fresh accumulator), or
    None when the item has no visible units.
    """
    if len(batch.raters) == 0:
        return None
    g = GradientAccumulator.like(p) if into is None else into
    _accumulate(g, _contribution(p, batch, rng, cd_steps))
    return g


def apply_updates(p, g, config, velocity=None, epoch=1):
    """One parameter update from summed statistics.

    a, b, W move by ``eps * g / count``; U also shrinks by ``eps * decay * U``.
    The step size is ``learning_rate / (1 + lr_decay * (epoch - 1))``.  When
    ``velocity`` (a list of four arrays, updated in place) is given and
    ``momentum`` is non-zero, classical momentum is applied.
    """
    if g.count < 1:
        raise ValueError("gradient accumulator is empty")
    eps = config.learning_rate / (1.0 + getattr(config, "lr_decay", 0.0) * (epoch - 1))
    s = eps / g.count
    mu = getattr(config, "momentum", 0.0)
    # overflow shows up as non-finite values, reported below
    with np.errstate(over="ignore", invalid="ignore"):
        steps = [s * g.da, s * g.db, s * g.dW, eps * (g.dU / g.count - config.weight_decay * p.U)]
        if velocity is not None and mu:
            for i, x in enumerate(steps):
                velocity[i] = mu * velocity[i] + x
            steps = list(velocity)
        a, b, W, U = (x + d for x, d in zip((p.a, p.b, p.W, p.U), steps))
    bad = [n for n, x in (("a", a), ("b", b), ("W", W), ("U", U)) if not np.isfinite(x).all()]
    if bad:
        raise NumericalError(
            f"non-finite values in {', '.join(bad)} after update "
            f"(gradient norm {g.norm():.3g}, learning rate {eps})", last_good=p)
    return CrbmParams(RbmParams(a, b, W), U)


def init_params(n_visible, n_hidden, n_features, config):
    rng = np.random.default_rng(config.seed)
    W = rng.normal(0.0, config.init_scale, size=(n_visible, n_hidden))
    U = rng.normal(0.0, config.init_scale, size=(n_features, n_hidden))
    return CrbmParams(RbmParams(np.zeros(n_visible), np.zeros(n_hidden), W), U)


def negative_sample(task, ratio, rng):
    """Positives of a dense task plus ``ceil(ratio * positives)`` sampled zeros.

    Negatives are drawn uniformly without replacement from the unlabeled
    (user, item) pairs of the task's items.
    """
    if task.density is not Density.DENSE:
        raise ValueError("negative sampling applies to dense one-class tasks")
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    items = np.asarray(task.items)
    n_pos = len(task.label)
    col = np.searchsorted(items, task.item_index)
    positive = task.user_index * len(items) + col
    wanted = int(math.ceil(ratio * n_pos - 1e-9)) if n_pos else 0
    available = task.n_users * len(items) - len(np.unique(positive))
    if wanted > available:
        logger.warning("requested %d negatives but only %d unlabeled pairs exist; clamping",
                       wanted, available)
        wanted = available
    if wanted:
        pool = np.setdiff1d(np.arange(task.n_users * len(items)), positive, assume_unique=False)
        chosen = np.sort(rng.choice(pool, size=wanted, replace=False))
    else:
        chosen = np.empty(0, dtype=np.int64)
    users = np.concatenate([task.user_index, chosen // len(items)])
    item_idx = np.concatenate([task.item_index, items[chosen % len(items)]])
    labels = np.concatenate([np.ones(n_pos, dtype=np.int8), np.zeros(len(chosen), dtype=np.int8)])
    return TaskDataset(task.task, Density.SPARSE, task.n_users, items, users, item_idx, labels)


def item_batches(task, features, items=None):
    items = task.items if items is None else items
    out = []
    for item in items:
        users, labels = task.item_pairs(item)
        out.append(ItemBatch(int(item), users, labels, features.rows[item]))
    return out


def exact_gradient(p, visibles, features=None):
    """Exact log-likelihood gradient by enumeration, summed over vectors.

    ``<.>_data - <.>_model`` with every expectation taken from the full
    joint table.  For a conditional model ``features[t]`` conditions the
    t-th vector and the U gradient is ``f_t (<h>_data - <h>_model)``.
    """
    g = GradientAccumulator.like(p)
    cache = {}
    for t, v in enumerate(visibles):
        v = np.asarray(v, dtype=np.float64)
        f = None if features is None else np.asarray(features[t], dtype=np.float64)
        key = None if f is None else f.tobytes()
        if key not in cache:
            cache[key] = oracles.model_moments(p, f)
        ev, eh, evh = cache[key]
        h_data = oracles.hidden_posterior_mean(p, v, f)
        g.da += v - ev
        g.db += h_data - eh
        g.dW += np.outer(v, h_data) - evh
        if f is not None:
            g.dU += np.outer(f, h_data - eh)
        g.count += 1
    return g


def exact_log_likelihood(p, batches):
    """Sum over items of ``ln p(v_item | f_item)`` on each item's own units."""
    total = 0.0
    for batch in batches:
        if len(batch.raters) == 0:
            continue
        sub = CrbmParams(p.base.restrict(batch.raters), p.U)
        total += oracles.log_likelihood_brute_force(sub, [batch.values], [batch.features])
    return total


@dataclass
class TrainingReport:
    epochs: list = field(default_factory=list)
    initial_exact_ll: float = None
    skipped_batches: int = 0
    negative_ratio: float = 0.0

    def write_jsonl(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.epochs:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def train(split, features, task, config, threads=1, on_epoch=None):
    """Fit a CRBM on the training half of a cold-start split.

    Returns ``(params, report)``.  One-class tasks train on positives plus
    freshly sampled negatives each epoch; rating prediction trains on the
    observed ratings only.
    """
    task = Task(task)
    M, T = split.train.n_users, split.train.n_items
    if len(features.items) != T or tuple(features.items) != tuple(split.train.items):
        raise ValueError("feature matrix items do not match the split's item vocabulary")
    N, K = int(config.hidden_units), features.n_features
    ratio = config.negative_ratio_for(task)
    train_task, _ = to_task(split, task, config.like_threshold)

    params = init_params(M, N, K, config)
    report = TrainingReport(negative_ratio=ratio)

    exact = M + N <= oracles.MAX_UNITS
    if exact:
        # a dense task's full vector; a sparse task's observed units
        ll_batches = item_batches(train_task, features)
        report.initial_exact_ll = exact_log_likelihood(params, ll_batches)

    velocity = [np.zeros(M), np.zeros(N), np.zeros((M, N)), np.zeros((K, N))]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for epoch in range(1, int(config.epochs) + 1):
            started = time.perf_counter()
            if task.dense and ratio > 0:
                data = negative_sample(train_task, ratio,
                                       np.random.default_rng([config.seed, epoch, _NEGATIVES]))
            else:
                data = train_task
            if task.dense and ratio == 0:
                batches = [ItemBatch(b.item, b.raters[b.values == 1], b.values[b.values == 1],
                                     b.features) for b in item_batches(data, features)]
            else:
                batches = item_batches(data, features)
            order = np.random.default_rng([config.seed, epoch, _SHUFFLE]).permutation(len(batches))
            batches = [batches[k] for k in order]

            report.skipped_batches += sum(1 for b in batches if len(b.raters) == 0)
            batches = [b for b in batches if len(b.raters)]

            recon_sq, n_vis = 0.0, 0
            for start in range(0, len(batches), int(config.batch_items)):
                group = batches[start:start + int(config.batch_items)]

                def work(b, p=params, e=epoch):
                    rng = np.random.default_rng([config.seed, e, b.item, _ITEM])
                    return _contribution(p, b, rng, int(config.cd_steps))

                contribs = list(pool.map(work, group)) if pool else [work(b) for b in group]
                g = GradientAccumulator.like(params)
                for c in contribs:
                    _accumulate(g, c)
                recon_sq += g.recon_sq
                n_vis += g.n_visible
                try:
                    params = apply_updates(params, g, config, velocity, epoch)
                except NumericalError as exc:
                    exc.epoch = epoch
                    raise
            rec = {
                "epoch": epoch,
                "recon_error": recon_sq / n_vis if n_vis else 0.0,
                "wall_ms": round(1000 * (time.perf_counter() - started), 3),
            }
            if exact:
                rec["exact_ll"] = exact_log_likelihood(params, ll_batches)
            report.epochs.append(rec)
            if on_epoch is not None:
                on_epoch(rec, params)
    finally:
        if pool:
            pool.shutdown()
    return params, report
