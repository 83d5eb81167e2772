"""Loss assembly, SGD with momentum under a cosine schedule, batch sampling,
and the pre-train / imprint / fine-tune pipeline with per-epoch metrics."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import consistency, model, ssl_baselines
from .data import SplitSet, SyntheticTaskSpec, generate_task, split_labeled
from .errors import EmptyInput, InvalidInput, ShapeError
from .model import Classifier, LinearHead, MlpExtractor, ModelPair, imprint

METRICS_SCHEMA_VERSION = 1
METRICS_COLUMNS = [
    "epoch", "lr", "loss_ce", "loss_ssl", "loss_akc", "loss_arc",
    "akc_fraction", "arc_labeled_fraction", "arc_unlabeled_fraction",
    "train_acc", "test_acc",
]


@dataclass
class LossWeights:
    lambda_k: float = 1.0
    lambda_r: float = 30.0
    lambda_s: float = 1.0

    def validate(self):
        if min(self.lambda_k, self.lambda_r, self.lambda_s) < 0:
            raise InvalidInput("loss weights must be >= 0")
        return self


def cosine_lr(t: int, total_steps: int, eta0: float) -> float:
    """eta0 * cos(7 pi t / (16 T)); decreasing on [0, T], always positive."""
    if total_steps < 1:
        raise InvalidInput("total_steps must be >= 1")
    if t < 0 or t > total_steps:
        raise InvalidInput(f"step {t} outside [0, {total_steps}]")
    return eta0 * float(np.cos(7.0 * np.pi * t / (16.0 * total_steps)))


class SgdMomentum:
    """SGD with momentum 0.9 and cosine-decayed learning rate."""

    def __init__(self, params: dict, eta0: float, total_steps: int,
                 momentum: float = 0.9):
        self.eta0 = eta0
        self.total_steps = max(total_steps, 1)
        self.momentum = momentum
        self.t = 0
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def lr(self) -> float:
        return cosine_lr(self.t, self.total_steps, self.eta0)

    def step(self, params: dict, grads: dict):
        eta = self.lr()
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape mismatch for {name}")
            v = self.velocity[name]
            v *= self.momentum
            v += g
            p -= eta * v
        self.t += 1


class BatchSampler:
    """Uniform without-replacement batches, reshuffled every epoch.

    When fewer than batch_size indices remain the epoch wraps: the sampler
    reshuffles and completes the batch from the fresh permutation.
    """

    def __init__(self, n: int, batch_size: int, rng):
        if n < 1:
            raise EmptyInput("cannot sample from an empty set")
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self._order = rng.permutation(n)
        self._pos = 0

    def next(self) -> np.ndarray:
        out = []
        need = self.batch_size
        while need > 0:
            avail = self.n - self._pos
            if avail == 0:
                self._order = self.rng.permutation(self.n)
                self._pos = 0
                avail = self.n
            take = min(need, avail)
            out.append(self._order[self._pos : self._pos + take])
            self._pos += take
            need -= take
        return np.concatenate(out)


def sample_batches(labeled: BatchSampler, unlabeled: BatchSampler):
    """One (labeled, unlabeled) index pair per training step."""
    return labeled.next(), unlabeled.next()


def total_loss(pair: ModelPair, x_l, y_l, x_u, weights: LossWeights,
               gate: consistency.GateConfig, buf_l, buf_u,
               ssl: ssl_baselines.SslConfig, rng=None, akc_mode="mse",
               akc_batch_weights=None, teacher=None, use_akc=True,
               use_arc=True, arc_sigmas=None):
    """Composite objective: L_CE + lambda_S L_S + lambda_K R_K + lambda_R R_R.

    Returns (scalar, grads dict over target params, breakdown dict). The
    breakdown records each raw term value and the gate selected fractions;
    the scalar equals the weighted sum of the terms.
    """
    x_l = np.asarray(x_l, dtype=np.float64)
    if x_l.shape[0] == 0:
        raise EmptyInput("labeled batch must be non-empty")
    target = pair.target
    value, grads = ssl_baselines.cross_entropy_loss(target, x_l, y_l)
    breakdown = {
        "ce": value, "ssl": 0.0, "akc": 0.0, "arc": 0.0,
        "akc_fraction": 0.0, "arc_labeled_fraction": 0.0,
        "arc_unlabeled_fraction": 0.0,
    }

    def accumulate(term_grads, lam):
        for k, g in term_grads.items():
            grads[k] += lam * g

    if ssl.method != "none" and weights.lambda_s > 0 and x_u.shape[0] > 0:
        if ssl.method == "pseudo_label":
            v_s, g_s = ssl_baselines.pseudo_label_loss(target, x_u, ssl.pl_confidence)
        else:
            v_s, g_s = ssl_baselines.mean_teacher_loss(
                target, teacher, x_u, ssl.noise_std, rng
            )
        breakdown["ssl"] = v_s
        value += weights.lambda_s * v_s
        accumulate(g_s, weights.lambda_s)

    if use_akc:
        x_all = np.vstack([x_l, x_u]) if x_u.shape[0] else x_l
        v_k, g_k, frac_k = consistency.akc_loss(
            pair, x_all, gate.eps_k, mode=akc_mode, weights=akc_batch_weights
        )
        breakdown["akc"] = v_k
        breakdown["akc_fraction"] = frac_k
        value += weights.lambda_k * v_k
        accumulate(g_k, weights.lambda_k)

    if use_arc and x_u.shape[0] > 0:
        v_r, g_r, frac_rl, frac_ru = consistency.arc_loss(
            pair, x_l, x_u, gate.eps_r, buf_l, buf_u, sigmas=arc_sigmas
        )
        breakdown["arc"] = v_r
        breakdown["arc_labeled_fraction"] = frac_rl
        breakdown["arc_unlabeled_fraction"] = frac_ru
        value += weights.lambda_r * v_r
        accumulate(g_r, weights.lambda_r)

    return float(value), grads, breakdown


@dataclass
class MetricsLog:
    """Per-epoch training records with a fixed, versioned column schema."""

    schema_version: int = METRICS_SCHEMA_VERSION
    records: list = field(default_factory=list)

    def append(self, **kwargs):
        rec = {k: kwargs[k] for k in METRICS_COLUMNS}
        self.records.append(rec)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRICS_COLUMNS)
            for rec in self.records:
                writer.writerow(
                    [rec["epoch"]] + [repr(float(rec[c])) for c in METRICS_COLUMNS[1:]]
                )

    def to_json(self, path):
        payload = {"schema_version": self.schema_version, "records": self.records}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        return payload

    def best(self, column="test_acc"):
        return max(r[column] for r in self.records)

    def last(self, column="test_acc"):
        return self.records[-1][column]


def accuracy(classifier: Classifier, x, y) -> float:
    if np.asarray(x).shape[0] == 0:
        return 0.0
    return float((classifier.predict(x) == np.asarray(y)).mean())


def train_supervised(classifier: Classifier, x, y, epochs: int, batch_size: int,
                     eta0: float, rng) -> Classifier:
    """Plain cross-entropy training loop (used for source pre-training)."""
    n = x.shape[0]
    steps_per_epoch = max(1, int(np.ceil(n / batch_size)))
    total = steps_per_epoch * max(epochs, 1)
    opt = SgdMomentum(classifier.params(), eta0, total)
    sampler = BatchSampler(n, min(batch_size, n), rng)
    for _ in range(epochs * steps_per_epoch):
        idx = sampler.next()
        _, grads = ssl_baselines.cross_entropy_loss(classifier, x[idx], y[idx])
        opt.step(classifier.params(), grads)
    return classifier


@dataclass
class RunResult:
    metrics: MetricsLog
    pair: ModelPair
    source_model: Classifier
    target_split: SplitSet
    akc_pool_fraction: float


def run_pipeline(cfg) -> RunResult:
    """Pre-train on the source task, copy and freeze, imprint the target
    head, then fine-tune with the composite loss. Deterministic per seed."""
    from .config import ExperimentConfig  # deferred: config imports this module

    assert isinstance(cfg, ExperimentConfig)
    cfg.validate()

    seeds = np.random.SeedSequence(cfg.seed).spawn(6)
    rngs = [np.random.default_rng(s) for s in seeds]
    rng_init_src, rng_pretrain, rng_init_tgt, rng_split, rng_train, rng_noise = rngs

    source_set, target_set = cfg.load_data()
    target_set = (
        split_labeled(target_set, cfg.n_labeled, int(rng_split.integers(2**31)))
        if target_set.unlabeled_x.shape[0] == 0
        else target_set
    )

    d = source_set.labeled_x.shape[1]
    c_s = source_set.n_classes
    c_t = target_set.n_classes
    dims = [d] + list(cfg.hidden_dims) + [cfg.feature_dim]

    src = Classifier(
        MlpExtractor(dims, rng_init_src),
        LinearHead(c_s, cfg.feature_dim, rng_init_src),
    )
    train_supervised(
        src, source_set.labeled_x, source_set.labeled_y,
        cfg.source_epochs, cfg.batch_labeled, cfg.source_eta0, rng_pretrain,
    )

    tgt_ext = src.extractor.copy()
    tgt_head = LinearHead(c_t, cfg.feature_dim, rng_init_tgt)
    if cfg.imprint_head:
        feats = tgt_ext.forward(target_set.labeled_x)
        imprint(tgt_head, feats, target_set.labeled_y)
        tgt_ext._cache = None
    target_model = Classifier(tgt_ext, tgt_head)
    pair = ModelPair(source=src, target=target_model)

    gate = consistency.GateConfig(
        eps_k=cfg.eps_k_scale * np.log(c_s),
        eps_r=cfg.eps_r_scale * np.log(c_t),
    )
    pool_x = target_set.all_train_x()
    n_l = target_set.labeled_x.shape[0]
    pool_akc_w = consistency.akc_weights(pair.source, pool_x, gate.eps_k)
    akc_pool_fraction = float(pool_akc_w.mean())

    buf_l = consistency.ReplayBuffer(cfg.buffer_capacity, cfg.buffer_k)
    buf_u = consistency.ReplayBuffer(cfg.buffer_capacity, cfg.buffer_k)

    ssl = cfg.ssl_config()
    noise_std = ssl.noise_std * float(pool_x.std(axis=0).mean())
    ssl = ssl_baselines.SslConfig(
        method=ssl.method, lambda_s=ssl.lambda_s,
        pl_confidence=ssl.pl_confidence, ema_alpha=ssl.ema_alpha,
        noise_std=noise_std,
    )
    teacher = target_model.copy() if ssl.method == "mean_teacher" else None

    metrics = MetricsLog()

    def log_epoch(epoch, lr, sums, n_steps):
        div = max(n_steps, 1)
        metrics.append(
            epoch=epoch, lr=lr,
            loss_ce=sums["ce"] / div, loss_ssl=sums["ssl"] / div,
            loss_akc=sums["akc"] / div, loss_arc=sums["arc"] / div,
            akc_fraction=akc_pool_fraction,
            arc_labeled_fraction=sums["arc_labeled_fraction"] / div,
            arc_unlabeled_fraction=sums["arc_unlabeled_fraction"] / div,
            train_acc=accuracy(target_model, target_set.labeled_x,
                               target_set.labeled_y),
            test_acc=accuracy(target_model, target_set.test_x,
                              target_set.test_y),
        )

    zero_sums = {k: 0.0 for k in
                 ("ce", "ssl", "akc", "arc",
                  "arc_labeled_fraction", "arc_unlabeled_fraction")}
    log_epoch(0, cfg.eta0, dict(zero_sums), 0)
    if cfg.epochs == 0:
        return RunResult(metrics, pair, src, target_set, akc_pool_fraction)

    steps_per_epoch = max(1, int(np.ceil(pool_x.shape[0] / cfg.batch_unlabeled)))
    total_steps = steps_per_epoch * cfg.epochs
    opt = SgdMomentum(target_model.params(), cfg.eta0, total_steps)
    sampler_l = BatchSampler(n_l, min(cfg.batch_labeled, max(n_l, 1)), rng_train)
    sampler_u = BatchSampler(pool_x.shape[0], cfg.batch_unlabeled, rng_train)
    weights = cfg.loss_weights()

    for epoch in range(1, cfg.epochs + 1):
        sums = dict(zero_sums)
        lr_at_epoch_start = opt.lr()
        for _ in range(steps_per_epoch):
            idx_l, idx_u = sample_batches(sampler_l, sampler_u)
            x_l, y_l = target_set.labeled_x[idx_l], target_set.labeled_y[idx_l]
            x_u = pool_x[idx_u]
            akc_w = np.concatenate(
                [pool_akc_w[idx_l], pool_akc_w[idx_u]]
            )
            _, grads, bd = total_loss(
                pair, x_l, y_l, x_u, weights, gate, buf_l, buf_u, ssl,
                rng=rng_noise, akc_mode=cfg.akc_mode,
                akc_batch_weights=akc_w, teacher=teacher,
                use_akc=cfg.use_akc, use_arc=cfg.use_arc,
            )
            opt.step(target_model.params(), grads)
            if teacher is not None:
                model.ema_update(teacher.params(), target_model.params(),
                                 ssl.ema_alpha)
            for k in sums:
                sums[k] += bd[k]
        log_epoch(epoch, lr_at_epoch_start, sums, steps_per_epoch)

    return RunResult(metrics, pair, src, target_set, akc_pool_fraction)
