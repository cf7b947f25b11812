"""Cold-start scoring and ROC/AUC evaluation."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Task, to_task
from .model import cold_start_scores

logger = logging.getLogger(__name__)


class DegenerateLabelsError(ValueError):
    pass


@dataclass(frozen=True)
class ScoredPairs:
    user: np.ndarray
    item: np.ndarray
    score: np.ndarray
    label: np.ndarray
    missing_items: tuple = ()

    def __post_init__(self):
        for name, dtype in (("user", np.int64), ("item", np.int64),
                            ("score", np.float64), ("label", np.int8)):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype))
        if not (len(self.user) == len(self.item) == len(self.score) == len(self.label)):
            raise ValueError("scored pair arrays differ in length")
        if not np.isfinite(self.score).all():
            raise ValueError("scores must be finite")

    def __len__(self):
        return len(self.score)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float
    n_pos: int
    n_neg: int

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("fpr,tpr\n")
            for x, y in zip(self.fpr, self.tpr):
                fh.write(f"{float(x)!r},{float(y)!r}\n")


def score_cold_start(p, split, features, task, threshold=3):
    """Score every held-out item from its features alone.

    Dense tasks score all users for each held-out item; rating prediction
    scores only the users who rated the item in the test set.
    """
    _, test = to_task(split, task, threshold)
    users, items, scores, labels = [], [], [], []
    missing = []
    for item in test.items:
        item = int(item)
        if item >= len(features.items) or features.items[item] != split.test.items[item]:
            missing.append(split.test.items[item])
            continue
        s = cold_start_scores(p, features.rows[item])
        u, y = test.item_pairs(item)
        users.append(u)
        items.append(np.full(len(u), item))
        scores.append(s[u])
        labels.append(y)
    if missing:
        logger.warning("%d held-out items have no feature row and were skipped", len(missing))
    return ScoredPairs(_cat(users, np.int64), _cat(items, np.int64),
                       _cat(scores, np.float64), _cat(labels, np.int8), tuple(missing))


def _cat(parts, dtype):
    return np.concatenate(parts) if parts else np.empty(0, dtype=dtype)


def roc(pairs_or_scores, labels=None):
    """ROC curve by a descending sweep; tied scores form one diagonal step.

    Accepts a :class:`ScoredPairs` or ``(scores, labels)``.  The area is the
    trapezoid rule over the swept points, which equals the Mann-Whitney
    statistic with ties counted one half.
    """
    if labels is None:
        scores, labels = pairs_or_scores.score, pairs_or_scores.label
    else:
        scores = pairs_or_scores
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int((labels == 1).sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        which = "positive" if n_pos == 0 else "negative"
        raise DegenerateLabelsError(f"no {which} labels; ROC is undefined")

    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order].astype(np.int64)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0, tp] / n_pos
    fpr = np.r_[0, fp] / n_neg
    thresholds = np.r_[np.inf, s[ends]]
    # integrate in counts to keep the sum exact for equal step widths
    area = float(np.sum(np.diff(np.r_[0, fp]) * (np.r_[0, tp][1:] + np.r_[0, tp][:-1]))) / 2.0
    return RocCurve(fpr, tpr, thresholds, area / (n_pos * n_neg), n_pos, n_neg)


def auc_mann_whitney(scores, labels):
    """Pairwise AUC by direct counting; quadratic, for checking :func:`roc`."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateLabelsError("need both classes")
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (len(pos) * len(neg)))


@dataclass
class EvalReport:
    task: str
    auc: float
    n_pos: int
    n_neg: int
    n_pairs: int
    model_hash: str
    split_seed: int
    roc: RocCurve = field(repr=False, default=None)
    missing_items: list = field(default_factory=list)

    def to_dict(self):
        return {
            "task": self.task,
            "auc": self.auc,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "n_pairs": self.n_pairs,
            "model_hash": self.model_hash,
            "split_seed": self.split_seed,
            "missing_items": list(self.missing_items),
        }

    def write(self, report_path, roc_path=None):
        Path(report_path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
        if roc_path is not None:
            self.roc.write_csv(roc_path)


def evaluate(p, split, features, task, threshold=3, roc_path=None):
    task = Task(task)
    pairs = score_cold_start(p, split, features, task, threshold)
    curve = roc(pairs)
    report = EvalReport(task.value, curve.auc, curve.n_pos, curve.n_neg, len(pairs),
                        p.fingerprint(), split.seed, curve, list(pairs.missing_items))
    if roc_path is not None:
        curve.write_csv(roc_path)
    return report

