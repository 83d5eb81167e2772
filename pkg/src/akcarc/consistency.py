"""Adaptive knowledge consistency (AKC) and adaptive representation
consistency (ARC): entropy-gated sample selection, the replay buffer, and
the two regularization losses with analytic gradients.

AKC penalizes divergence between frozen-source and target extractor
features on confidently recognized inputs. ARC penalizes MMD between the
representation distributions of confidently predicted labeled and
unlabeled examples, stabilized by replay buffers of recent selections.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, ShapeError
from .numerics import (
    LOG_CLAMP,
    as_tensor2,
    check_probvec,
    entropy,
    entropy_rows,
    median_sigmas,
    mmd2,
    mmd2_value_grad,
    softmax_backward,
    softmax_rows,
)


@dataclass
class GateConfig:
    """Entropy thresholds in nats for AKC (eps_k) and ARC (eps_r)."""

    eps_k: float
    eps_r: float

    @classmethod
    def default(cls, n_source_classes: int, n_target_classes: int) -> "GateConfig":
        # 0.7 * max-entropy per stream
        return cls(
            eps_k=0.7 * np.log(n_source_classes),
            eps_r=0.7 * np.log(n_target_classes),
        )


def akc_gate(p_source, eps_k: float) -> int:
    """1 iff the source prediction's entropy is at or below eps_k."""
    return int(entropy(check_probvec(p_source)) <= eps_k)


def akc_weights(source_model, x, eps_k: float) -> np.ndarray:
    """Binary AKC selection weights for a batch, from the frozen source model."""
    probs = softmax_rows(source_model.forward(x))
    return (entropy_rows(probs) <= eps_k).astype(np.float64)


def akc_loss(pair, x, eps_k: float, mode: str = "mse", weights=None):
    """Knowledge-consistency penalty between source and target features.

    R_K = (1/B) sum_i w_i * D(F_source(x_i), F_target(x_i)), D per `mode`
    ("mse" on raw features, "kl" on softmax-normalized features). Returns
    (value, grads for the target extractor keyed "ext.*", selected_fraction).
    Precomputed `weights` skip the source forward pass.
    """
    x = as_tensor2(x)
    b = x.shape[0]
    if b == 0:
        raise EmptyInput("akc_loss requires a non-empty batch")
    if weights is None:
        weights = akc_weights(pair.source, x, eps_k)
    w = np.asarray(weights, dtype=np.float64)
    frac = float(w.sum() / b)

    ext = pair.target.extractor
    zero = {f"ext.{k}": np.zeros_like(v) for k, v in ext.params().items()}
    if w.sum() == 0:
        return 0.0, zero, frac

    f0 = pair.source.extractor.forward(x)
    f = ext.forward(x)
    if mode == "mse":
        # squared euclidean distance per sample (summed over feature dims,
        # matching the dimensional scaling of the KL mode)
        diff = f - f0
        value = float((w * (diff * diff).sum(axis=1)).sum() / b)
        d_f = (2.0 / b) * w[:, None] * diff
    elif mode == "kl":
        p0 = softmax_rows(f0)
        q = softmax_rows(f)
        qc = np.maximum(q, LOG_CLAMP)
        per = (np.where(p0 > 0, p0 * (np.log(np.maximum(p0, LOG_CLAMP)) - np.log(qc)), 0.0)).sum(axis=1)
        value = float((w * per).sum() / b)
        d_q = np.where(q > LOG_CLAMP, -p0 / qc, 0.0)
        d_f = softmax_backward(q, d_q) * (w[:, None] / b)
    else:
        raise ValueError(f"unknown AKC mode {mode!r}")
    grads = {f"ext.{k}": v for k, v in ext.backward(d_f).items()}
    return value, grads, frac


class ReplayBuffer:
    """Bounded FIFO of detached representation rows.

    `update` appends copies (evicting oldest beyond capacity);
    `get_last_k` returns the newest min(k, len) rows, oldest first.
    """

    def __init__(self, capacity: int = 256, k: int = 256):
        if capacity < 1 or k < 1:
            raise ValueError("capacity and k must be >= 1")
        self.capacity = capacity
        self.k = k
        self.entries = []  # (row, push index)
        self._pushes = 0

    def __len__(self):
        return len(self.entries)

    @property
    def dim(self):
        return self.entries[0][0].shape[0] if self.entries else None

    def update(self, rows):
        rows = as_tensor2(rows) if np.size(rows) else np.zeros((0, self.dim or 0))
        if self.entries and rows.shape[0] and rows.shape[1] != self.dim:
            raise ShapeError(f"row dim {rows.shape[1]} != buffer dim {self.dim}")
        for r in rows:
            self.entries.append((r.copy(), self._pushes))
            self._pushes += 1
        if len(self.entries) > self.capacity:
            del self.entries[: len(self.entries) - self.capacity]

    def get_last_k(self) -> np.ndarray:
        take = self.entries[-self.k :]
        if not take:
            return np.zeros((0, self.dim or 0))
        return np.stack([r for r, _ in take])


def buffer_update_and_fetch(buf: ReplayBuffer, new_rows) -> np.ndarray:
    buf.update(new_rows)
    return buf.get_last_k()


def arc_select(features, preds, eps_r: float):
    """Indices and rows of features whose prediction entropy is <= eps_r."""
    f = as_tensor2(features)
    p = as_tensor2(preds)
    if f.shape[0] != p.shape[0]:
        raise ShapeError("features/preds row mismatch")
    idx = np.flatnonzero(entropy_rows(p) <= eps_r)
    return idx, f[idx]


def arc_loss(pair, x_labeled, x_unlabeled, eps_r, buf_l, buf_u, sigmas=None):
    """Representation-consistency penalty between labeled and unlabeled streams.

    Selected current-batch features are pushed into the per-stream replay
    buffers; the MMD is computed on the fetched recent-k sets. Gradients
    flow only through current-batch selected rows (buffered rows are
    detached). If either fetched set has fewer than 2 rows the loss is 0
    with zero gradient. Returns (value, grads keyed "ext.*",
    labeled_fraction, unlabeled_fraction).

    `sigmas=None` uses the median-distance heuristic on the fetched sets;
    bandwidths are constants with respect to the gradient.
    """
    ext = pair.target.extractor
    x_l, x_u = as_tensor2(x_labeled), as_tensor2(x_unlabeled)

    f_l = ext.forward(x_l)
    cache_l = ext.take_cache()
    f_u = ext.forward(x_u)
    cache_u = ext.take_cache()

    p_l = softmax_rows(pair.target.head.forward(f_l))
    p_u = softmax_rows(pair.target.head.forward(f_u))
    idx_l, sel_l = arc_select(f_l, p_l, eps_r)
    idx_u, sel_u = arc_select(f_u, p_u, eps_r)
    frac_l = len(idx_l) / max(x_l.shape[0], 1)
    frac_u = len(idx_u) / max(x_u.shape[0], 1)

    star_l = buffer_update_and_fetch(buf_l, sel_l)
    star_u = buffer_update_and_fetch(buf_u, sel_u)

    zero = {f"ext.{k}": np.zeros_like(v) for k, v in ext.params().items()}
    if star_l.shape[0] < 2 or star_u.shape[0] < 2:
        return 0.0, zero, frac_l, frac_u

    if sigmas is None:
        sigmas = median_sigmas(star_l, star_u)
    value, d_star_l, d_star_u = mmd2_value_grad(star_l, star_u, sigmas)

    # current-batch rows are the newest pushes, i.e. the tail of the fetched
    # set; only they carry gradients back into the extractor
    def scatter(d_star, idx, n_rows, dim):
        d_f = np.zeros((n_rows, dim))
        n_current = min(len(idx), d_star.shape[0])
        if n_current:
            d_f[idx[-n_current:]] = d_star[-n_current:]
        return d_f

    d_f_l = scatter(d_star_l, idx_l, f_l.shape[0], f_l.shape[1])
    d_f_u = scatter(d_star_u, idx_u, f_u.shape[0], f_u.shape[1])
    grads = {f"ext.{k}": v for k, v in ext.backward(d_f_l, cache_l).items()}
    for k, v in ext.backward(d_f_u, cache_u).items():
        grads[f"ext.{k}"] += v
    return float(value), grads, frac_l, frac_u
