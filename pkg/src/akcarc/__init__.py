"""Semi-supervised transfer learning with adaptive consistency regularization.

The package trains a small feedforward classifier on a target task while
regularizing it against a frozen source model (adaptive knowledge
consistency, AKC) and aligning the representation distributions of labeled
and unlabeled target data (adaptive representation consistency, ARC), with
entropy-gated sample selection, replay buffers, imprinting initialization,
and pseudo-label / mean-teacher baselines.
"""

from .config import ExperimentConfig
from .consistency import GateConfig, ReplayBuffer, akc_loss, arc_loss
from .data import SplitSet, SyntheticTaskSpec, generate_task, split_labeled
from .model import Classifier, LinearHead, MlpExtractor, ModelPair, imprint
from .numerics import entropy, kl_div, mmd2, rbf_kernel, softmax
from .ssl_baselines import SslConfig, cross_entropy_loss
from .training import LossWeights, MetricsLog, cosine_lr, run_pipeline, total_loss

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "GateConfig", "ReplayBuffer", "akc_loss", "arc_loss",
    "SplitSet", "SyntheticTaskSpec", "generate_task", "split_labeled",
    "Classifier", "LinearHead", "MlpExtractor", "ModelPair", "imprint",
    "entropy", "kl_div", "mmd2", "rbf_kernel", "softmax",
    "SslConfig", "cross_entropy_loss",
    "LossWeights", "MetricsLog", "cosine_lr", "run_pipeline", "total_loss",
]
