"""Ratings, item features, cold-start splits and task transforms.

Indices are positions in the vocabularies: ``users[u]`` is the raw id of
user ``u`` and ``items[i]`` the raw id of item ``i``.  Both splits of a
:class:`ColdStartSplit` keep the full vocabularies so item indices line up
with rows of the :class:`FeatureMatrix`.
"""

import csv
import enum
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

LIKE_THRESHOLD = 3

# Column order of the genre flags in MovieLens-100K ``u.item`` / ``u.genre``.
MOVIELENS_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)


class DataError(ValueError):
    """Invalid input data."""


class ParseError(DataError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class ValidationError(DataError):
    pass


class Task(str, enum.Enum):
    ONE_CLASS_EXPLICIT = "explicit"
    ONE_CLASS_IMPLICIT = "implicit"
    RATING_PREDICTION = "rating"

    @property
    def dense(self):
        return self is not Task.RATING_PREDICTION


class Density(str, enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RatingDataset:
    """Sparse (user, item, rating) triples over fixed vocabularies."""

    users: tuple
    items: tuple
    user_index: np.ndarray
    item_index: np.ndarray
    rating: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.user_index, dtype=np.int64)
        i = np.asarray(self.item_index, dtype=np.int64)
        r = np.asarray(self.rating, dtype=np.int64)
        if not (u.shape == i.shape == r.shape) or u.ndim != 1:
            raise ValidationError("user/item/rating arrays must be 1-d and of equal length")
        if len(u):
            if u.min() < 0 or u.max() >= len(self.users):
                raise ValidationError("user index outside vocabulary")
            if i.min() < 0 or i.max() >= len(self.items):
                raise ValidationError("item index outside vocabulary")
            if r.min() < 1 or r.max() > 5:
                raise ValidationError("ratings must be integers in [1, 5]")
            key = u * len(self.items) + i
            uniq, counts = np.unique(key, return_counts=True)
            if (counts > 1).any():
                k = uniq[counts > 1][0]
                pair = (self.users[k // len(self.items)], self.items[k % len(self.items)])
                raise ValidationError(f"duplicate rating for (user, item) = {pair}")
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "user_index", _readonly(u))
        object.__setattr__(self, "item_index", _readonly(i))
        object.__setattr__(self, "rating", _readonly(r))

    @property
    def n_users(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)

    def __len__(self):
        return len(self.rating)

    def rated_items(self):
        return np.unique(self.item_index)

    def subset(self, mask):
        """Ratings selected by a boolean mask; vocabularies are kept."""
        return RatingDataset(self.users, self.items, self.user_index[mask],
                             self.item_index[mask], self.rating[mask])

    def write(self, path, sep="\t"):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for u, i, r in zip(self.user_index, self.item_index, self.rating):
                fh.write(f"{self.users[u]}{sep}{self.items[i]}{sep}{r}\n")


def _split_fields(line):
    if "\t" in line:
        return [p.strip() for p in line.split("\t")]
    if "," in line:
        return [p.strip() for p in line.split(",")]
    return line.split()


def parse_ratings(path, users=None, items=None):
    """Read a ratings file.

    Lines are ``user, item, rating[, timestamp]`` separated by tabs
    (MovieLens ``u.data``), commas or whitespace.  The timestamp is ignored.
    Vocabularies are ordered by first appearance unless ``users``/``items``
    are given, in which case those vocabularies are used (and unknown ids
    are an error).
    """
    path = Path(path)
    user_vocab = {u: k for k, u in enumerate(users)} if users is not None else {}
    item_vocab = {i: k for k, i in enumerate(items)} if items is not None else {}
    fixed = users is not None
    rows_u, rows_i, rows_r = [], [], []
    seen = {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = _split_fields(line)
            if len(parts) < 3:
                raise ParseError(path, lineno, f"expected user, item, rating; got {line!r}")
            uid, iid, rtxt = parts[0], parts[1], parts[2]
            try:
                rating = float(rtxt)
            except ValueError:
                raise ParseError(path, lineno, f"rating {rtxt!r} is not a number") from None
            if rating != int(rating) or not 1 <= rating <= 5:
                raise ValidationError(f"{path}:{lineno}: rating {rtxt} outside integer range [1, 5]")
            if fixed:
                if uid not in user_vocab or iid not in item_vocab:
                    raise ValidationError(f"{path}:{lineno}: id not in vocabulary")
            else:
                user_vocab.setdefault(uid, len(user_vocab))
                item_vocab.setdefault(iid, len(item_vocab))
            pair = (uid, iid)
            if pair in seen:
                raise ValidationError(
                    f"{path}:{lineno}: duplicate rating for (user, item) = {pair}, "
                    f"first seen on line {seen[pair]}")
            seen[pair] = lineno
            rows_u.append(user_vocab[uid])
            rows_i.append(item_vocab[iid])
            rows_r.append(int(rating))
    return RatingDataset(tuple(user_vocab), tuple(item_vocab),
                         np.array(rows_u, dtype=np.int64),
                         np.array(rows_i, dtype=np.int64),
                         np.array(rows_r, dtype=np.int64))


@dataclass(frozen=True)
class FeatureMatrix:
    """Binary item-by-feature matrix.

    ``rows[i]`` is the feature vector of item ``items[i]``.  ``empty_rows``
    flags items without any feature; ``unknown_items`` counts feature lines
    whose item id was not in the vocabulary.
    """

    labels: tuple
    items: tuple
    rows: np.ndarray
    unknown_items: int = 0

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.shape != (len(self.items), len(self.labels)):
            raise ValidationError(
                f"feature matrix shape {rows.shape} does not match "
                f"{len(self.items)} items x {len(self.labels)} labels")
        if not np.isin(rows, (0.0, 1.0)).all():
            raise ValidationError("feature entries must be 0 or 1")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "rows", _readonly(rows))

    @property
    def n_features(self):
        return len(self.labels)

    @property
    def empty_rows(self):
        return ~self.rows.any(axis=1)

    def row(self, item):
        return self.rows[item]

    def vector(self, labels):
        """Binary vector for a collection of labels; returns (f, unknown)."""
        index = {lab: k for k, lab in enumerate(self.labels)}
        f = np.zeros(self.n_features)
        unknown = []
        for lab in labels:
            if lab in index:
                f[index[lab]] = 1.0
            else:
                unknown.append(lab)
        return f, unknown

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for i, item in enumerate(self.items):
                for k in np.flatnonzero(self.rows[i]):
                    w.writerow([item, self.labels[k]])


def parse_features(path, items):
    """Read ``item_id,feature_label`` pairs into a :class:`FeatureMatrix`.

    Labels are ordered by first appearance.  Lines naming items outside
    ``items`` are skipped and counted in ``unknown_items``.
    """
    path = Path(path)
    item_vocab = {it: k for k, it in enumerate(items)}
    labels = {}
    pairs = []
    unknown = 0
    n_lines = 0
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or not "".join(rec).strip():
                continue
            n_lines += 1
            if len(rec) < 2:
                raise ParseError(path, lineno, "expected item_id,feature_label")
            iid, lab = rec[0].strip(), ",".join(rec[1:]).strip()
            if iid not in item_vocab:
                unknown += 1
                continue
            labels.setdefault(lab, len(labels))
            pairs.append((item_vocab[iid], labels[lab]))
    if n_lines == 0:
        raise DataError(f"{path}: feature file is empty")
    if unknown:
        logger.warning("%s: skipped %d lines with unknown item ids", path, unknown)
    rows = np.zeros((len(item_vocab), len(labels)))
    for i, k in pairs:
        rows[i, k] = 1.0
    fm = FeatureMatrix(tuple(labels), tuple(items), rows, unknown)
    if fm.empty_rows.any():
        logger.warning("%s: %d items have no features", path, int(fm.empty_rows.sum()))
    return fm


def parse_movielens_genres(path, items, genres=MOVIELENS_GENRES):
    """Genre features from a MovieLens ``u.item`` file (pipe-separated)."""
    path = Path(path)
    item_vocab = {it: k for k, it in enumerate(items)}
    rows = np.zeros((len(item_vocab), len(genres)))
    unknown = 0
    n_lines = 0
    with open(path, encoding="latin-1") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            n_lines += 1
            parts = line.split("|")
            if len(parts) < len(genres) + 1:
                raise ParseError(path, lineno, f"expected {len(genres)} genre flags")
            flags = parts[-len(genres):]
            if any(x not in ("0", "1") for x in flags):
                raise ParseError(path, lineno, "genre flags must be 0 or 1")
            if parts[0] not in item_vocab:
                unknown += 1
                continue
            rows[item_vocab[parts[0]]] = [float(x) for x in flags]
    if n_lines == 0:
        raise DataError(f"{path}: feature file is empty")
    return FeatureMatrix(tuple(genres), tuple(items), rows, unknown)


@dataclass(frozen=True)
class ColdStartSplit:
    train: RatingDataset
    test: RatingDataset
    held_out_items: np.ndarray
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "held_out_items",
                           _readonly(np.asarray(self.held_out_items, dtype=np.int64)))

    @property
    def train_items(self):
        mask = np.ones(self.train.n_items, dtype=bool)
        mask[self.held_out_items] = False
        return np.flatnonzero(mask)

    def manifest(self):
        return {
            "seed": self.seed,
            "n_users": self.train.n_users,
            "n_items": self.train.n_items,
            "held_out_count": len(self.held_out_items),
            "held_out_items": [self.train.items[i] for i in self.held_out_items],
            "n_train_ratings": len(self.train),
            "n_test_ratings": len(self.test),
        }

    def save(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.train.write(out / "train.tsv")
        self.test.write(out / "test.tsv")
        vocab = {"users": list(self.train.users), "items": list(self.train.items)}
        (out / "vocab.json").write_text(json.dumps(vocab) + "\n", encoding="utf-8")
        (out / "split.json").write_text(json.dumps(self.manifest(), indent=2) + "\n",
                                        encoding="utf-8")

    @classmethod
    def load(cls, split_dir):
        d = Path(split_dir)
        vocab = json.loads((d / "vocab.json").read_text(encoding="utf-8"))
        man = json.loads((d / "split.json").read_text(encoding="utf-8"))
        train = parse_ratings(d / "train.tsv", vocab["users"], vocab["items"])
        test = parse_ratings(d / "test.tsv", vocab["users"], vocab["items"])
        index = {it: k for k, it in enumerate(vocab["items"])}
        held = np.array(sorted(index[i] for i in man["held_out_items"]), dtype=np.int64)
        return cls(train, test, held, man["seed"])


def split_cold_start(data, held_out_count, seed=0):
    """Move ``held_out_count`` uniformly chosen items wholly into the test set."""
    if held_out_count < 0:
        raise ValueError("held_out_count must be non-negative")
    if held_out_count and held_out_count >= data.n_items:
        raise ValueError(f"held_out_count={held_out_count} must be smaller than "
                         f"the number of items ({data.n_items})")
    rng = np.random.default_rng(seed)
    held = np.sort(rng.permutation(data.n_items)[:held_out_count])
    in_test = np.isin(data.item_index, held)
    return ColdStartSplit(data.subset(~in_test), data.subset(in_test), held, seed)


@dataclass(frozen=True)
class TaskDataset:
    """Binary labels over (user, item) pairs for one recommendation task.

    Dense tasks label every pair between the ``n_users`` users and ``items``;
    only the positive pairs are stored and all other labels are 0.  Sparse
    tasks label exactly the stored pairs.
    """

    task: Task
    density: Density
    n_users: int
    items: np.ndarray
    user_index: np.ndarray
    item_index: np.ndarray
    label: np.ndarray
    _by_item: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", _readonly(np.asarray(self.items, dtype=np.int64)))
        object.__setattr__(self, "user_index", _readonly(np.asarray(self.user_index, dtype=np.int64)))
        object.__setattr__(self, "item_index", _readonly(np.asarray(self.item_index, dtype=np.int64)))
        object.__setattr__(self, "label", _readonly(np.asarray(self.label, dtype=np.int8)))
        if self.density is Density.DENSE and (self.label != 1).any():
            raise ValidationError("dense task datasets store positive pairs only")
        order = np.lexsort((self.user_index, self.item_index))
        bounds = np.searchsorted(self.item_index[order], self.items)
        ends = np.searchsorted(self.item_index[order], self.items, side="right")
        by_item = {int(i): order[s:e] for i, s, e in zip(self.items, bounds, ends)}
        object.__setattr__(self, "_by_item", by_item)

    def __len__(self):
        if self.density is Density.DENSE:
            return self.n_users * len(self.items)
        return len(self.label)

    @property
    def n_positive(self):
        return int((self.label == 1).sum())

    def item_pairs(self, item):
        """(users, labels) for one item; all users for dense tasks."""
        idx = self._by_item.get(int(item), np.empty(0, dtype=np.int64))
        if self.density is Density.DENSE:
            labels = np.zeros(self.n_users, dtype=np.int8)
            labels[self.user_index[idx]] = 1
            return np.arange(self.n_users), labels
        return self.user_index[idx], self.label[idx]

    def label_of(self, user, item):
        users, labels = self.item_pairs(item)
        if self.density is Density.DENSE:
            return int(labels[user])
        hit = np.flatnonzero(users == user)
        return int(labels[hit[0]]) if len(hit) else None


def _task_for(data, items, task, threshold):
    task = Task(task)
    liked = data.rating > threshold
    if task is Task.ONE_CLASS_EXPLICIT:
        m = liked
        return TaskDataset(task, Density.DENSE, data.n_users, items,
                           data.user_index[m], data.item_index[m], np.ones(m.sum()))
    if task is Task.ONE_CLASS_IMPLICIT:
        return TaskDataset(task, Density.DENSE, data.n_users, items,
                           data.user_index, data.item_index, np.ones(len(data)))
    return TaskDataset(task, Density.SPARSE, data.n_users, items,
                       data.user_index, data.item_index, liked.astype(np.int8))


def to_task(split, task, threshold=LIKE_THRESHOLD):
    """Apply a task transform to both halves of a cold-start split.

    Returns ``(train, test)`` where train covers the non-held-out items and
    test the held-out ones.
    """
    return (_task_for(split.train, split.train_items, task, threshold),
            _task_for(split.test, split.held_out_items, task, threshold))


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()

