import numpy as np
import pytest

from ficaug.data import FeatureDataset
from ficaug.errors import ConfigurationError, DegenerateGeometryError, ExportError
from ficaug.fixtures import make_blobs
from ficaug.kmeans import KMeansConfig
from ficaug.purity import ClusterView, NodeStatus, RefinementConfig, refine_clusters
from ficaug.sampler import (AugmentConfig, ClusterGeometry, SyntheticBatch, augment_dataset,
                            cluster_radius, covariance_from_radius, export_attribute_vectors,
                            gaussian_noise_augment, read_attribute_vectors, read_batch,
                            sample_from_tree, sample_synthetic, synthetic_budget, write_batch)


def view(points, label=0):
    points = np.asarray(points, dtype=np.float64)
    return ClusterView.from_members(points, np.full(len(points), label), np.arange(len(points)))


def test_radius_fixtures():
    assert cluster_radius(view([[4.0, 4.0]]), [1, 2, 3]) == pytest.approx(0.02, abs=1e-12)
    assert cluster_radius(view([[0, 0], [3, 0]]), [1, 1]) == pytest.approx(1.5, abs=1e-12)
    assert cluster_radius(view([[-3.0], [1.0], [2.0]]), [1.0]) == pytest.approx(3.2, abs=1e-12)


def test_radius_degenerate_paths():
    assert cluster_radius(view([[1, 1], [1, 1]]), [2, 2]) == pytest.approx(0.02)
    with pytest.raises(DegenerateGeometryError):
        cluster_radius(view([[1, 1]]), [0, 0])


def test_covariance_from_radius():
    assert covariance_from_radius(3.0, 2).tolist() == [1.0, 1.0]
    assert np.allclose(covariance_from_radius(0.02, 15), 0.02 ** 2 / 9)
    assert np.allclose(covariance_from_radius(4.0, 3), 4 * covariance_from_radius(2.0, 3))
    with pytest.raises(ConfigurationError):
        covariance_from_radius(0.0, 2)


def test_budget():
    assert synthetic_budget(4, 3) == 12
    assert synthetic_budget(3, 0.1) == 1
    assert synthetic_budget(2, 2.5) == 5
    assert synthetic_budget(1, 2.5) == 2  # half to even


def geometry(mu, r, label=0):
    mu = np.asarray(mu, dtype=np.float64)
    return ClusterGeometry(mu, r, covariance_from_radius(r, len(mu)), label, 1)


def test_sampling_moments():
    pts, lab = sample_synthetic(geometry([5.0, 5.0], 3.0), 1000, seed=1)
    assert np.all(np.abs(pts.mean(axis=0) - 5.0) < 0.15)
    assert set(lab.tolist()) == {0}
    pts, _ = sample_synthetic(geometry([0.0, 1.0, 2.0], 0.6), 10_000, seed=2)
    assert np.allclose(pts.var(axis=0), 0.04, rtol=0.1)
    again, _ = sample_synthetic(geometry([0.0, 1.0, 2.0], 0.6), 10_000, seed=2)
    assert np.array_equal(pts, again)


def test_batch_sizes_and_labels(separable):
    refine = RefinementConfig(kmeans=KMeansConfig(k=3))
    batch, tree = augment_dataset(separable, refine, AugmentConfig(alpha=1.0, seed=0))
    assert len(batch) == separable.n
    assert np.bincount(batch.labels).tolist() == np.bincount(separable.y).tolist()
    batch2, _ = augment_dataset(separable, refine, AugmentConfig(alpha=2.0, seed=0))
    assert len(batch2) == 2 * separable.n


def test_provenance_is_pure(blobs):
    refine = RefinementConfig(threshold=0.2, kmeans=KMeansConfig(k=4))
    batch, tree = augment_dataset(blobs, refine, AugmentConfig(alpha=1.5, seed=3))
    expected = 0
    for path in set(batch.paths):
        node = tree.node(path)
        assert node.status is NodeStatus.PURE
        idx = [i for i, p in enumerate(batch.paths) if p == path]
        assert set(batch.labels[idx].tolist()) == {node.view.label}
        expected += synthetic_budget(node.view.size, 1.5)
    assert len(batch) == expected
    assert batch.source_ids() <= set(blobs.ids.tolist())


def test_determinism_and_translation(blobs):
    refine = RefinementConfig(kmeans=KMeansConfig(k=3, seed=5))
    aug = AugmentConfig(alpha=1.0, seed=9)
    a, _ = augment_dataset(blobs, refine, aug)
    b, _ = augment_dataset(blobs, refine, aug)
    assert np.array_equal(a.points, b.points) and a.paths == b.paths
    moved, _ = augment_dataset(blobs.with_features(blobs.X + 100.0), refine, aug)
    assert np.allclose(moved.points, a.points + 100.0, atol=1e-9)


def test_empty_batch_when_nothing_is_pure(caplog):
    X = np.array([[0.0], [0.0], [5.0], [5.0], [10.0], [10.0]])
    ds = FeatureDataset(X, [0, 1, 0, 1, 0, 1], ["a"], ["p", "q"])
    batch, _ = augment_dataset(ds, RefinementConfig(threshold=1.0), AugmentConfig())
    assert len(batch) == 0 and batch.points.shape == (0, 1)


def test_singleton_uses_parent_stds():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.2, 5.0], [20.0, 20.0], [5.1, 5.1]])
    ds = FeatureDataset(X, [0, 0, 1, 1, 1, 0], ["a", "b"], ["p", "q"])
    tree = refine_clusters(ds, RefinementConfig(threshold=0.0, kmeans=KMeansConfig(k=3)))
    batch = sample_from_tree(ds, tree, AugmentConfig(alpha=1.0))
    for node in tree.leaves():
        if node.status is NodeStatus.PURE and node.view.size == 1:
            parent = tree.parent(node)
            pts = ds.X if parent is None else parent.view.points
            r = cluster_radius(node.view, pts.std(axis=0))
            assert r == pytest.approx(0.01 * pts.std(axis=0).mean())
    assert len(batch) == sum(n.view.size for n in tree.leaves() if n.status is NodeStatus.PURE)


def test_gaussian_noise():
    ds = make_blobs(10, 3, seed=0)
    tiny = gaussian_noise_augment(ds, 1e-12, 1.0, seed=0)
    assert len(tiny) == 20 and np.allclose(tiny.points, ds.X, atol=1e-9)
    assert np.array_equal(tiny.labels, ds.y)
    one = ds.subset([0])
    many = gaussian_noise_augment(one, 0.5, 10_000, seed=1)
    assert np.all(np.abs(many.points.mean(axis=0) - one.X[0]) < 0.05 * 0.5)
    with pytest.raises(ConfigurationError):
        gaussian_noise_augment(ds, 0.0, 1.0, 0)


def test_export_and_round_trip(tmp_path, blobs):
    refine = RefinementConfig(kmeans=KMeansConfig(k=3))
    batch, _ = augment_dataset(blobs, refine, AugmentConfig(alpha=1.0))
    res = export_attribute_vectors(batch, tmp_path / "a.csv", blobs.label_names,
                                   blobs.feature_names, clamp=None)
    assert res.n_records == len(batch) and res.clamp_events == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "id,label," + ",".join(blobs.feature_names)
    assert len(lines) == len(batch) + 1
    ids, labels, X, names = read_attribute_vectors(tmp_path / "a.csv")
    assert np.array_equal(X, batch.points) and list(names) == list(blobs.feature_names)
    path = write_batch(batch, tmp_path / "b.csv", blobs.label_names, blobs.feature_names)
    points, labels, paths, draws = read_batch(path, blobs.label_names)
    assert np.array_equal(points, batch.points) and paths == batch.paths
    assert np.array_equal(labels, batch.labels) and np.array_equal(draws, batch.draws)


def test_export_clamps(tmp_path):
    batch = SyntheticBatch(np.array([[-0.3, 2.0], [6.0, 1.0]]), np.array([0, 1]), [(0,), (1,)],
                           np.array([0, 0]), 0, 1.0)
    res = export_attribute_vectors(batch, tmp_path / "c.csv", ["a", "b"], ["x", "y"])
    assert res.clamp_events == 2
    _, _, X, _ = read_attribute_vectors(tmp_path / "c.csv")
    assert X.tolist() == [[0.0, 2.0], [5.0, 1.0]]
    with pytest.raises(ExportError):
        export_attribute_vectors(SyntheticBatch.empty(2, 0, 1.0), tmp_path / "e.csv", ["a"], ["x", "y"])
    with pytest.raises(ExportError):
        export_attribute_vectors(batch, tmp_path / "missing" / "x.csv", ["a", "b"], ["x", "y"])


def test_mean_error_is_calibrated():
    # fraction of coordinate means outside the 3-sigma/sqrt(q) band should be near 0.27%
    z = []
    for seed in range(400):
        pts, _ = sample_synthetic(geometry(np.zeros(5), 3.0), 2000, seed=seed)
        z.extend(np.abs(pts.mean(axis=0)) * np.sqrt(2000))
    z = np.array(z)
    assert np.mean(z > 3) < 0.01
    assert abs(np.mean(z > 2) - 0.0455) < 0.015
