"""Declarative experiment configuration: JSON round-trip, method-flag
parsing, dotted-path overrides, and validation with field-path diagnostics."""

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace

from .data import SyntheticTaskSpec, generate_task, load_csv
from .errors import ConfigError
from .ssl_baselines import SslConfig
from .training import LossWeights

METHOD_TOKENS = ("supervised", "akc", "arc", "pseudo_label", "mean_teacher")
OUT_ROOT_ENV = "AKCARC_OUT"


@dataclass
class ExperimentConfig:
    """Full description of one run. Every field has a default; the run seed
    offsets the synthetic task seed so each seed sees fresh data."""

    task: SyntheticTaskSpec = field(default_factory=SyntheticTaskSpec)
    source_train_csv: str = ""
    target_train_csv: str = ""
    target_test_csv: str = ""
    method: str = "supervised"
    n_labeled: int = 40
    lambda_k: float = 1.0
    lambda_r: float = 30.0
    lambda_s: float = 1.0
    eps_k_scale: float = 0.7
    eps_r_scale: float = 0.7
    akc_mode: str = "mse"
    buffer_capacity: int = 256
    buffer_k: int = 256
    eta0: float = 0.001
    source_eta0: float = 0.01
    epochs: int = 60
    source_epochs: int = 30
    batch_labeled: int = 64
    batch_unlabeled: int = 64
    hidden_dims: tuple = (64, 64)
    feature_dim: int = 32
    imprint_head: bool = True
    pl_confidence: float = 0.95
    ema_alpha: float = 0.999
    noise_std: float = 0.1
    seed: int = 0
    out_dir: str = ""

    # ------------------------------------------------------------------ flags

    def method_parts(self):
        parts = [p.strip() for p in self.method.split("+") if p.strip()]
        for p in parts:
            if p not in METHOD_TOKENS:
                raise ConfigError(f"method: unknown token {p!r}")
        return parts

    @property
    def use_akc(self) -> bool:
        return "akc" in self.method_parts()

    @property
    def use_arc(self) -> bool:
        return "arc" in self.method_parts()

    def ssl_method(self) -> str:
        parts = self.method_parts()
        ssl = [p for p in parts if p in ("pseudo_label", "mean_teacher")]
        if len(ssl) > 1:
            raise ConfigError("method: at most one SSL baseline may be combined")
        return ssl[0] if ssl else "none"

    def ssl_config(self) -> SslConfig:
        return SslConfig(
            method=self.ssl_method(), lambda_s=self.lambda_s,
            pl_confidence=self.pl_confidence, ema_alpha=self.ema_alpha,
            noise_std=self.noise_std,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lambda_k, self.lambda_r, self.lambda_s).validate()

    # ------------------------------------------------------------ validation

    def validate(self) -> "ExperimentConfig":
        self.method_parts()
        self.ssl_method()
        self.loss_weights()
        checks = [
            ("n_labeled", self.n_labeled >= 2),
            ("eps_k_scale", 0 <= self.eps_k_scale <= 1),
            ("eps_r_scale", 0 <= self.eps_r_scale <= 1),
            ("akc_mode", self.akc_mode in ("mse", "kl")),
            ("buffer_capacity", self.buffer_capacity >= 1),
            ("buffer_k", self.buffer_k >= 1),
            ("eta0", self.eta0 > 0),
            ("epochs", self.epochs >= 0),
            ("source_epochs", self.source_epochs >= 0),
            ("batch_labeled", self.batch_labeled >= 1),
            ("batch_unlabeled", self.batch_unlabeled >= 1),
            ("feature_dim", self.feature_dim >= 1),
            ("pl_confidence", 0 < self.pl_confidence <= 1),
            ("ema_alpha", 0 <= self.ema_alpha < 1),
            ("noise_std", self.noise_std >= 0),
        ]
        bad = [name for name, ok in checks if not ok]
        if bad:
            raise ConfigError("invalid config fields: " + ", ".join(bad))
        if not self.use_csv():
            self.task.validate()
        return self

    # ------------------------------------------------------------------ data

    def use_csv(self) -> bool:
        return bool(self.target_train_csv)

    def load_data(self):
        """(source, target) SplitSets, synthetic unless CSV paths are set."""
        if not self.use_csv():
            task = replace(self.task, seed=self.task.seed + self.seed)
            return generate_task(task)
        if not (self.source_train_csv and self.target_test_csv):
            raise ConfigError(
                "CSV mode needs source_train_csv, target_train_csv and "
                "target_test_csv"
            )
        source = load_csv(self.source_train_csv)
        target = load_csv(self.target_train_csv)
        test = load_csv(self.target_test_csv)
        target.test_x, target.test_y = test.labeled_x, test.labeled_y
        target.test_ids = test.labeled_ids + target.labeled_ids.size
        return source, target

    # ------------------------------------------------------------- json i/o

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
        kwargs = dict(raw)
        if "task" in kwargs:
            task_known = {f.name for f in dataclasses.fields(SyntheticTaskSpec)}
            task_unknown = set(kwargs["task"]) - task_known
            if task_unknown:
                raise ConfigError(
                    "unknown config keys: "
                    + ", ".join(f"task.{k}" for k in sorted(task_unknown))
                )
            kwargs["task"] = SyntheticTaskSpec(**kwargs["task"])
        if "hidden_dims" in kwargs:
            kwargs["hidden_dims"] = tuple(kwargs["hidden_dims"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        # accept both a bare config object and the wrapped form that
        # to_json writes ({"config": ..., "metadata": ...})
        if "config" in raw and "metadata" in raw:
            raw = raw["config"]
        return cls.from_dict(raw)

    def to_json(self, path, extra_metadata=None):
        payload = self.to_dict()
        payload_meta = {
            "mmd_estimator": "biased_v_statistic",
            "non_paper_defaults": ["pl_confidence", "ema_alpha", "noise_std"],
        }
        if extra_metadata:
            payload_meta.update(extra_metadata)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"config": payload, "metadata": payload_meta}, fh, indent=2)

    # ----------------------------------------------------------- overrides

    def with_overrides(self, assignments) -> "ExperimentConfig":
        """Apply "dotted.key=value" strings; value types follow the current
        field value (JSON-parsed where that fails)."""
        d = self.to_dict()
        for item in assignments:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, _, value = item.partition("=")
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                if p not in node or not isinstance(node[p], dict):
                    raise ConfigError(f"unknown config key: {key}")
                node = node[p]
            leaf = parts[-1]
            if leaf not in node:
                raise ConfigError(f"unknown config key: {key}")
            node[leaf] = _coerce(value, node[leaf])
        return ExperimentConfig.from_dict(d)

    def default_out_dir(self) -> str:
        if self.out_dir:
            return self.out_dir
        root = os.environ.get(OUT_ROOT_ENV, "runs")
        return os.path.join(root, f"{self.method.replace('+', '_')}_seed{self.seed}")


def _coerce(text: str, current):
    if isinstance(current, bool):
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean from {text!r}")
    if isinstance(current, int) and not isinstance(current, bool):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, (list, tuple)):
        return json.loads(text)
    return text
