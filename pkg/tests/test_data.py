import numpy as np
import pytest

from akcarc.data import (
    SyntheticTaskSpec,
    _orthogonal_means,
    _plane_rotation,
    generate_task,
    load_csv,
    save_csv,
    split_labeled,
)
from akcarc.errors import ConfigError, InvalidSplit, ParseError
from akcarc.model import Classifier, LinearHead, MlpExtractor
from akcarc.training import train_supervised, accuracy


class TestSpecValidation:
    def test_defaults_valid(self):
        SyntheticTaskSpec().validate()

    def test_too_few_target_classes(self):
        with pytest.raises(ConfigError):
            SyntheticTaskSpec(target_classes=1).validate()

    def test_source_smaller_than_target(self):
        with pytest.raises(ConfigError):
            SyntheticTaskSpec(source_classes=3, target_classes=4).validate()

    def test_nonpositive_std(self):
        with pytest.raises(ConfigError):
            SyntheticTaskSpec(cluster_std=0.0).validate()


class TestGeometry:
    def test_orthogonal_means_when_they_fit(self):
        m = _orthogonal_means(5, 16, np.random.default_rng(0))
        np.testing.assert_allclose(m @ m.T, np.eye(5), atol=1e-10)

    def test_unit_norm_when_overcomplete(self):
        m = _orthogonal_means(10, 4, np.random.default_rng(1))
        np.testing.assert_allclose(np.linalg.norm(m, axis=1), 1.0, atol=1e-12)

    def test_plane_rotation_is_orthogonal(self):
        r = _plane_rotation(8, 0.7, np.random.default_rng(2))
        np.testing.assert_allclose(r @ r.T, np.eye(8), atol=1e-10)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-10)

    def test_zero_angle_is_identity(self):
        r = _plane_rotation(6, 0.0, np.random.default_rng(3))
        np.testing.assert_allclose(r, np.eye(6), atol=1e-12)

    def test_rotation_preserves_norms(self):
        rng = np.random.default_rng(4)
        r = _plane_rotation(8, 1.2, rng)
        v = rng.normal(size=(5, 8))
        np.testing.assert_allclose(
            np.linalg.norm(v @ r.T, axis=1), np.linalg.norm(v, axis=1), atol=1e-10
        )


class TestGenerateTask:
    def test_shapes_and_label_ranges(self):
        spec = SyntheticTaskSpec(source_train=200, target_train=120, target_test=80)
        source, target = generate_task(spec)
        assert source.labeled_x.shape == (200, 16)
        assert target.labeled_x.shape == (120, 16)
        assert target.test_x.shape == (80, 16)
        assert set(source.labeled_y) == set(range(10))
        assert set(target.labeled_y) == set(range(4))

    def test_deterministic_per_seed(self):
        a = generate_task(SyntheticTaskSpec(seed=9))
        b = generate_task(SyntheticTaskSpec(seed=9))
        np.testing.assert_array_equal(a[1].labeled_x, b[1].labeled_x)
        c = generate_task(SyntheticTaskSpec(seed=10))
        assert not np.array_equal(a[1].labeled_x, c[1].labeled_x)

    def test_class_balance(self):
        _, target = generate_task(SyntheticTaskSpec(target_train=400))
        counts = np.bincount(target.labeled_y)
        assert counts.max() - counts.min() <= 1

    def test_ids_disjoint_between_train_and_test(self):
        _, target = generate_task(SyntheticTaskSpec())
        assert not set(target.labeled_ids) & set(target.test_ids)

    def test_linear_probe_sanity(self):
        # a small classifier trained on the full target train set should beat
        # chance comfortably on held-out data: clusters must be learnable
        spec = SyntheticTaskSpec(target_train=600, target_test=400, seed=3)
        _, target = generate_task(spec)
        rng = np.random.default_rng(0)
        model = Classifier(
            MlpExtractor([16, 32, 16], rng), LinearHead(4, 16, rng)
        )
        train_supervised(model, target.labeled_x, target.labeled_y,
                         epochs=10, batch_size=64, eta0=0.01,
                         rng=np.random.default_rng(1))
        assert accuracy(model, target.test_x, target.test_y) > 0.5


class TestSplitLabeled:
    def make_target(self, n=200, n_classes=4, seed=0):
        _, target = generate_task(
            SyntheticTaskSpec(target_train=n, target_classes=n_classes, seed=seed)
        )
        return target

    def test_sizes(self):
        t = split_labeled(self.make_target(), 40, 0)
        assert t.labeled_x.shape[0] == 40
        assert t.unlabeled_x.shape[0] == 160
        assert t.labeled_y.shape == (40,)

    def test_stratified_within_one(self):
        t = split_labeled(self.make_target(), 42, 1)
        counts = np.bincount(t.labeled_y, minlength=4)
        assert counts.max() - counts.min() <= 1

    def test_ids_partition_original(self):
        orig = self.make_target()
        t = split_labeled(orig, 40, 2)
        combined = sorted(t.labeled_ids.tolist() + t.unlabeled_ids.tolist())
        assert combined == sorted(orig.labeled_ids.tolist())
        assert not set(t.labeled_ids) & set(t.unlabeled_ids)

    def test_deterministic(self):
        a = split_labeled(self.make_target(), 40, 7)
        b = split_labeled(self.make_target(), 40, 7)
        np.testing.assert_array_equal(a.labeled_ids, b.labeled_ids)

    def test_rejects_fewer_than_classes(self):
        with pytest.raises(InvalidSplit):
            split_labeled(self.make_target(), 3, 0)

    def test_rejects_more_than_available(self):
        with pytest.raises(InvalidSplit):
            split_labeled(self.make_target(n=50), 60, 0)


class TestCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(12, 3))
        y = rng.integers(0, 3, size=12)
        p = tmp_path / "d.csv"
        save_csv(p, x, y)
        loaded = load_csv(p)
        np.testing.assert_array_equal(loaded.labeled_x, x)
        np.testing.assert_array_equal(loaded.labeled_y, y)

    def test_sparse_labels_remapped_dense(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,label\n1.0,10\n2.0,30\n3.0,10\n")
        loaded = load_csv(p)
        assert loaded.label_map == {10: 0, 30: 1}
        assert loaded.labeled_y.tolist() == [0, 1, 0]

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,f1\n1.0,2.0\n")
        with pytest.raises(ParseError, match="label"):
            load_csv(p)

    def test_bad_cell_reports_line_and_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,f1,label\n1.0,2.0,0\n1.0,oops,1\n")
        with pytest.raises(ParseError, match=r":3:2"):
            load_csv(p)

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,f1,label\n1.0,2.0\n")
        with pytest.raises(ParseError, match="expected 3 fields"):
            load_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(ParseError, match="empty"):
            load_csv(p)

    def test_header_only(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("f0,label\n")
        with pytest.raises(ParseError, match="no data rows"):
            load_csv(p)
