"""Deterministic synthetic source-to-target transfer tasks, labeled/unlabeled
splitting, and CSV ingestion.

A task is a set of Gaussian clusters. Source clusters sit on mutually
orthogonal unit directions; the target task reuses a subset of the source
cluster means, rotated in a random plane and shifted, so one knob pair
(rotation, shift) controls how related the two domains are.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidSplit, ParseError


@dataclass
class SyntheticTaskSpec:
    input_dim: int = 16
    source_classes: int = 10
    target_classes: int = 4
    cluster_std: float = 0.475
    transfer_rotation_deg: float = 30.0
    transfer_shift: float = 0.2
    source_train: int = 4000
    target_train: int = 2000
    target_test: int = 1000
    seed: int = 0

    def validate(self):
        if self.target_classes < 2 or self.source_classes < self.target_classes:
            raise ConfigError("need source_classes >= target_classes >= 2")
        if self.input_dim < 2:
            raise ConfigError("input_dim must be >= 2")
        if self.cluster_std <= 0:
            raise ConfigError("cluster_std must be > 0")
        if min(self.source_train, self.target_train, self.target_test) < 1:
            raise ConfigError("all split sizes must be >= 1")
        return self


@dataclass
class SplitSet:
    """Labeled (x, y), unlabeled x, and test (x, y) with disjoint example ids."""

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    labeled_ids: np.ndarray
    unlabeled_ids: np.ndarray
    test_ids: np.ndarray
    label_map: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        pool = [self.labeled_y, self.test_y]
        return int(max(y.max() for y in pool if y.size) + 1)

    def all_train_x(self) -> np.ndarray:
        """Full target training pool (labels ignored) for unlabeled sampling."""
        if self.unlabeled_x.size == 0:
            return self.labeled_x
        return np.vstack([self.labeled_x, self.unlabeled_x])


def _balanced_labels(n: int, n_classes: int, rng) -> np.ndarray:
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    return y


def _orthogonal_means(n: int, dim: int, rng) -> np.ndarray:
    if n <= dim:
        q, _ = np.linalg.qr(rng.normal(size=(dim, n)))
        return q.T[:n]
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _plane_rotation(dim: int, angle_rad: float, rng) -> np.ndarray:
    """Rotation by angle_rad in a random 2-plane."""
    q, _ = np.linalg.qr(rng.normal(size=(dim, 2)))
    e1, e2 = q[:, 0], q[:, 1]
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    r = np.eye(dim)
    r += (c - 1.0) * (np.outer(e1, e1) + np.outer(e2, e2))
    r += s * (np.outer(e2, e1) - np.outer(e1, e2))
    return r


def _sample_clusters(means, std, n, rng):
    y = _balanced_labels(n, means.shape[0], rng)
    x = means[y] + rng.normal(0.0, std, size=(n, means.shape[1]))
    return x, y


def generate_task(spec: SyntheticTaskSpec):
    """Build (source, target) SplitSets, fully determined by spec.seed.

    The source set is fully labeled (used for pre-training); the target set
    starts fully labeled too and is split with `split_labeled`.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    means_s = _orthogonal_means(spec.source_classes, spec.input_dim, rng)

    rot = _plane_rotation(spec.input_dim, np.deg2rad(spec.transfer_rotation_deg), rng)
    shift_dir = rng.normal(size=spec.input_dim)
    shift_dir /= np.linalg.norm(shift_dir)
    means_t = means_s[: spec.target_classes] @ rot.T + spec.transfer_shift * shift_dir

    sx, sy = _sample_clusters(means_s, spec.cluster_std, spec.source_train, rng)
    tx, ty = _sample_clusters(means_t, spec.cluster_std, spec.target_train, rng)
    ex, ey = _sample_clusters(means_t, spec.cluster_std, spec.target_test, rng)

    empty = np.zeros((0, spec.input_dim))
    source = SplitSet(
        labeled_x=sx, labeled_y=sy,
        unlabeled_x=empty.copy(),
        test_x=empty.copy(), test_y=np.zeros(0, dtype=int),
        labeled_ids=np.arange(spec.source_train),
        unlabeled_ids=np.zeros(0, dtype=int),
        test_ids=np.zeros(0, dtype=int),
    )
    target = SplitSet(
        labeled_x=tx, labeled_y=ty,
        unlabeled_x=empty.copy(),
        test_x=ex, test_y=ey,
        labeled_ids=np.arange(spec.target_train),
        unlabeled_ids=np.zeros(0, dtype=int),
        test_ids=np.arange(spec.target_train, spec.target_train + spec.target_test),
    )
    return source, target


def split_labeled(target: SplitSet, n: int, seed: int) -> SplitSet:
    """Keep a class-stratified draw of n examples labeled; the rest become
    unlabeled. Per-class labeled counts differ by at most one."""
    x, y, ids = target.labeled_x, target.labeled_y, target.labeled_ids
    n_classes = int(y.max()) + 1
    if n < n_classes:
        raise InvalidSplit(f"n={n} < {n_classes} classes (imprinting needs each)")
    if n > x.shape[0]:
        raise InvalidSplit(f"n={n} exceeds available {x.shape[0]} examples")
    rng = np.random.default_rng(seed)
    per_class, extra = divmod(n, n_classes)
    order = rng.permutation(n_classes)
    chosen = []
    for rank, c in enumerate(order):
        idx = np.flatnonzero(y == c)
        rng.shuffle(idx)
        take = per_class + (1 if rank < extra else 0)
        if take > idx.size:
            raise InvalidSplit(f"class {c} has only {idx.size} examples, need {take}")
        chosen.append(idx[:take])
    chosen = np.sort(np.concatenate(chosen))
    mask = np.zeros(x.shape[0], dtype=bool)
    mask[chosen] = True
    return replace(
        target,
        labeled_x=x[mask], labeled_y=y[mask], labeled_ids=ids[mask],
        unlabeled_x=x[~mask], unlabeled_ids=ids[~mask],
    )


def load_csv(path, label_column: str = "label") -> SplitSet:
    """Read a header-bearing numeric CSV into a fully labeled SplitSet.

    Labels are remapped to dense 0..C-1; the mapping is recorded in
    `label_map` (original -> dense). Parse failures report line and column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if label_column not in header:
            raise ParseError(f"{path}: no '{label_column}' column in header")
        label_idx = header.index(label_column)
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            feats = []
            for col, cell in enumerate(row):
                if col == label_idx:
                    try:
                        labels.append(int(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}:{line_no}:{col + 1}: bad label {cell!r}"
                        ) from None
                else:
                    try:
                        feats.append(float(cell))
                    except ValueError:
                        raise ParseError(
                            f"{path}:{line_no}:{col + 1}: non-numeric {cell!r}"
                        ) from None
            rows.append(feats)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    x = np.asarray(rows, dtype=np.float64)
    raw = np.asarray(labels, dtype=int)
    uniques = sorted(set(raw.tolist()))
    label_map = {orig: dense for dense, orig in enumerate(uniques)}
    y = np.asarray([label_map[v] for v in raw], dtype=int)
    dim = x.shape[1]
    return SplitSet(
        labeled_x=x, labeled_y=y,
        unlabeled_x=np.zeros((0, dim)),
        test_x=np.zeros((0, dim)), test_y=np.zeros(0, dtype=int),
        labeled_ids=np.arange(x.shape[0]),
        unlabeled_ids=np.zeros(0, dtype=int),
        test_ids=np.zeros(0, dtype=int),
        label_map=label_map,
    )


def save_csv(path, x, y, label_column: str = "label"):
    """Inverse of load_csv for already-dense labels."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(x.shape[1])] + [label_column])
        for row, lab in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
