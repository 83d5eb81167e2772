import copy

import numpy as np
import pytest

from akcarc.model import Classifier, LinearHead, MlpExtractor, ModelPair


def finite_diff(params: dict, loss_fn, picks, h=1e-5, rng=None):
    """Central finite differences of loss_fn at `picks` random entries per
    parameter. Yields (name, index, fd_value)."""
    rng = rng or np.random.default_rng(0)
    for name, p in params.items():
        flat = p.reshape(-1)
        for _ in range(picks):
            i = int(rng.integers(flat.size))
            old = flat[i]
            flat[i] = old + h
            hi = loss_fn()
            flat[i] = old - h
            lo = loss_fn()
            flat[i] = old
            yield name, i, (hi - lo) / (2 * h)


def assert_grads_match(params, grads, loss_fn, picks=3, rel=1e-4, abs_tol=1e-7,
                       rng=None):
    for name, i, fd in finite_diff(params, loss_fn, picks, rng=rng):
        g = grads[name].reshape(-1)[i]
        assert g == pytest.approx(fd, rel=rel, abs=abs_tol), (
            f"gradient mismatch at {name}[{i}]: analytic {g} vs fd {fd}"
        )


@pytest.fixture
def small_pair():
    """Source/target pair on a 5-input, 3-feature net; target head 3 classes,
    source head 4 classes; target parameters perturbed away from source."""
    rng = np.random.default_rng(42)
    ext = MlpExtractor([5, 8, 3], rng)
    src = Classifier(ext, LinearHead(4, 3, rng))
    tgt_ext = ext.copy()
    for w in tgt_ext.weights:
        w += rng.normal(0, 0.05, size=w.shape)
    tgt = Classifier(tgt_ext, LinearHead(3, 3, rng))
    return ModelPair(source=src, target=tgt)


@pytest.fixture
def micro_batch():
    rng = np.random.default_rng(7)
    x_l = rng.normal(size=(6, 5))
    y_l = rng.integers(0, 3, size=6)
    x_u = rng.normal(size=(6, 5))
    return x_l, y_l, x_u
