import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corrfeat.correlation import CorrelationMatrix, correlation_matrix
from corrfeat.data import Dataset
from corrfeat.features import (
    EdgeSet,
    FeatureConfig,
    FeatureTransform,
    NeighborhoodSet,
    apply_transform,
    build_edges,
    build_neighborhoods,
    edge_features,
    export_masks,
    feature_masks,
    fit_transform_pipeline,
    mask_image,
    neighborhood_features,
)


def cm(rho):
    rho = np.asarray(rho, dtype=float)
    return CorrelationMatrix(rho, np.ones(rho.shape[0], dtype=bool))


def loop_neighborhood_features(X, members):
    n = X.shape[0]
    Z = np.zeros((n, len(members)))
    for i in range(n):
        for k, J in enumerate(members):
            Z[i, k] = sum(X[i, j] for j in J) / len(J)
    return Z


def loop_edge_features(Z, pairs):
    S = np.zeros((Z.shape[0], len(pairs)))
    for i in range(Z.shape[0]):
        for k, (a, b) in enumerate(pairs):
            S[i, k] = Z[i, a] - Z[i, b]
    return S


def random_corr(rng, p):
    A = rng.normal(size=(3 * p, p)) + rng.normal(size=(3 * p, 1))
    return correlation_matrix(A)


class TestNeighborhoods:
    def test_identity_gives_singletons(self):
        NS = build_neighborhoods(cm(np.eye(4)), [0.5])
        assert NS.members == ((0,), (1,), (2,), (3,))

    def test_duplicates_collapse(self):
        rho = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        NS = build_neighborhoods(cm(rho), [0.5])
        assert NS.members == ((0, 1), (2,))

    def test_threshold_is_inclusive_and_signed(self):
        rho = np.array([[1.0, 0.5, -0.9], [0.5, 1.0, 0.0], [-0.9, 0.0, 1.0]])
        NS = build_neighborhoods(cm(rho), [0.5])
        assert NS.members[0] == (0, 1)
        assert (2,) in NS.members

    def test_concentric_thresholds(self):
        rho = np.array([[1.0, 0.8, 0.3], [0.8, 1.0, 0.1], [0.3, 0.1, 1.0]])
        NS = build_neighborhoods(cm(rho), [0.9, 0.5, 0.2])
        assert NS.members[:3] == ((0,), (0, 1), (0, 1, 2))
        assert len(set(NS.members)) == NS.q

    def test_selected_maps_to_raw(self):
        rho = np.array([[1.0, 0.9], [0.9, 1.0]])
        NS = build_neighborhoods(cm(rho), [0.5], selected=[10, 42])
        assert NS.raw_members(0) == [10, 42]

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            build_neighborhoods(cm(np.eye(2)), [1.5])
        with pytest.raises(ValueError):
            build_neighborhoods(cm(np.eye(2)), [])

    def test_self_membership_and_idempotence(self, rng):
        C = random_corr(rng, 12)
        a = build_neighborhoods(C, [0.3, 0.6])
        b = build_neighborhoods(C, [0.3, 0.6])
        assert a == b
        for j in range(12):
            assert any(j in m for m in a.members)
        single = [tuple(np.flatnonzero(C.rho[j] >= 0.6)) for j in range(12)]
        assert all(j in single[j] for j in range(12))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_monotone_in_rho_n(self, seed, t1, t2):
        lo, hi = sorted((t1, t2))
        C = random_corr(np.random.default_rng(seed), 8)
        for j in range(8):
            big = set(np.flatnonzero(C.rho[j] >= lo))
            small = set(np.flatnonzero(C.rho[j] >= hi))
            assert small <= big
        # the same holds for the sets the builder emits (before dedup, per feature)
        a = build_neighborhoods(C, [hi])
        b = build_neighborhoods(C, [lo])
        for m in a.members:
            assert any(set(m) <= set(mb) for mb in b.members)


class TestNeighborhoodFeatures:
    def test_singletons_are_identity(self, rng):
        X = rng.normal(size=(6, 3))
        NS = NeighborhoodSet((0, 1, 2), ((0,), (1,), (2,)), (0.5,))
        assert np.array_equal(neighborhood_features(X, NS), X)

    def test_mean_of_members(self):
        NS = NeighborhoodSet((0, 1, 2), ((0, 1),), (0.5,))
        assert neighborhood_features(np.array([[2.0, 4.0, 100.0]]), NS)[0, 0] == 3.0

    def test_matches_loop(self, rng):
        X = rng.normal(size=(10, 5))
        members = tuple(tuple(sorted(rng.choice(5, size=rng.integers(1, 6), replace=False)))
                        for _ in range(7))
        NS = NeighborhoodSet(tuple(range(5)), members, (0.5,))
        assert np.max(np.abs(neighborhood_features(X, NS) - loop_neighborhood_features(X, members))) < 1e-12

    def test_column_mismatch(self):
        NS = NeighborhoodSet((0, 1), ((0,),), (0.5,))
        with pytest.raises(IndexError):
            neighborhood_features(np.zeros((2, 3)), NS)


class TestEdges:
    def test_uncorrelated_no_edges(self):
        assert build_edges(cm(np.eye(5)), 0.7).pairs == ()

    def test_duplicate_features_connect(self, rng):
        z = rng.normal(size=20)
        C = correlation_matrix(np.column_stack([z, z, rng.normal(size=20)]))
        for rho_e in (0.1, 0.7, 1.0):
            assert (0, 1) in build_edges(C, rho_e).pairs

    def test_matches_enumeration(self):
        rho = np.array([[1.0, 0.6, 0.2, 0.5],
                        [0.6, 1.0, 0.49, -0.8],
                        [0.2, 0.49, 1.0, 0.9],
                        [0.5, -0.8, 0.9, 1.0]])
        expected = [(a, b) for a in range(4) for b in range(4) if a < b and rho[a, b] >= 0.5]
        assert list(build_edges(cm(rho), 0.5).pairs) == expected == [(0, 1), (0, 3), (2, 3)]

    def test_raising_rho_e_shrinks(self, rng):
        C = random_corr(rng, 10)
        for lo, hi in [(0.2, 0.4), (0.4, 0.8), (0.5, 0.5)]:
            assert set(build_edges(C, hi).pairs) <= set(build_edges(C, lo).pairs)

    def test_edge_feature_values(self):
        Z = np.array([[1.0, 0.0], [2.0, 5.0]])
        assert np.array_equal(edge_features(Z, EdgeSet(((0, 1),), 0.7))[:, 0], [1.0, -3.0])

    def test_identical_columns_give_zero(self, rng):
        z = rng.normal(size=(5, 1))
        assert not edge_features(np.hstack([z, z]), EdgeSet(((0, 1),), 0.7)).any()

    def test_matches_loop(self, rng):
        Z = rng.normal(size=(9, 6))
        pairs = tuple((a, b) for a in range(6) for b in range(a + 1, 6) if rng.random() < 0.5)
        S = edge_features(Z, EdgeSet(pairs, 0.7))
        assert np.max(np.abs(S - loop_edge_features(Z, pairs))) <= 1e-15

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            edge_features(np.zeros((2, 2)), EdgeSet(((0, 2),), 0.7))


def correlated_dataset(rng, n=400, groups=3, per=4, geometry=None):
    latent = rng.normal(size=(n, groups))
    cols = [latent[:, g] + 0.4 * rng.normal(size=n) for g in range(groups) for _ in range(per)]
    X = np.column_stack(cols)
    return Dataset(X, rng.integers(1, 4, n), K=3, geometry=geometry)


class TestPipeline:
    def test_output_width(self, rng):
        ds = correlated_dataset(rng)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.5, 0.8), rho_e=0.3, subsample=300))
        out = apply_transform(T, ds.X)
        assert out.shape == (ds.n, T.neighborhoods.q + T.edges.L)

    def test_singletons_no_edges_is_restriction(self, rng):
        ds = Dataset(rng.normal(size=(200, 5)), rng.integers(1, 3, 200), K=2)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.999999,), rho_e=0.999999,
                                                     selected=[4, 1, 2], normalize=False))
        assert T.neighborhoods.q == 3 and T.edges.L == 0
        assert np.array_equal(apply_transform(T, ds.X), ds.X[:, [4, 1, 2]])

    def test_held_out_rows_match_hand_formulas(self, rng):
        ds = correlated_dataset(rng)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.5,), rho_e=0.5, subsample=200,
                                                     normalize=True))
        X_new = rng.normal(size=(5, ds.d))
        out = apply_transform(T, X_new)
        mu, sigma = T.normalizer.mu, T.normalizer.sigma
        for i in range(5):
            xn = [(X_new[i, j] - mu[j]) / sigma[j] for j in range(ds.d)]
            z = [sum(xn[T.neighborhoods.selected[j]] for j in m) / len(m)
                 for m in T.neighborhoods.members]
            s = [z[a] - z[b] for a, b in T.edges.pairs]
            assert np.max(np.abs(out[i] - np.array(z + s))) < 1e-12

    def test_deterministic_and_label_blind(self, rng):
        ds = correlated_dataset(rng)
        shuffled = Dataset(ds.X, rng.permutation(ds.y), K=3)
        cfg = FeatureConfig(rho_n=(0.4, 0.7), rho_e=0.5, subsample=250, seed=4)
        a = fit_transform_pipeline(ds, cfg)
        b = fit_transform_pipeline(shuffled, cfg)
        assert a.to_json() == b.to_json()
        assert np.array_equal(apply_transform(a, ds.X), apply_transform(a, ds.X))

    def test_normalization_default_follows_geometry(self, rng):
        ds = correlated_dataset(rng)
        assert fit_transform_pipeline(ds, FeatureConfig()).normalizer is not None
        img = correlated_dataset(rng, groups=2, per=2, geometry=(2, 2, 1))
        assert fit_transform_pipeline(img, FeatureConfig()).normalizer is None

    def test_groups_recovered(self, rng):
        ds = correlated_dataset(rng, n=1000)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.5,), rho_e=0.99))
        assert sorted(T.neighborhoods.members) == [(0, 1, 2, 3), (4, 5, 6, 7), (8, 9, 10, 11)]

    def test_dimension_mismatch(self, rng):
        ds = correlated_dataset(rng)
        T = fit_transform_pipeline(ds, FeatureConfig(subsample=100))
        with pytest.raises(ValueError):
            apply_transform(T, np.zeros((2, ds.d + 1)))

    def test_serialization_round_trip(self, rng, tmp_path):
        ds = correlated_dataset(rng)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.3, 0.6), rho_e=0.4, subsample=200))
        T.save(tmp_path / "t.json")
        back = FeatureTransform.load(tmp_path / "t.json")
        assert back.to_json() == T.to_json()
        assert back.digest() == T.digest()
        assert np.array_equal(apply_transform(back, ds.X), apply_transform(T, ds.X))
        doc = json.loads((tmp_path / "t.json").read_text())
        assert doc["format"] == "corrfeat.transform" and doc["version"] == 1

    def test_rejects_wrong_version(self, rng):
        d = fit_transform_pipeline(correlated_dataset(rng), FeatureConfig(subsample=100)).to_dict()
        d["version"] = 99
        with pytest.raises(ValueError):
            FeatureTransform.from_dict(d)


class TestMasks:
    def test_kinds(self, rng):
        ds = correlated_dataset(rng)
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.5,), rho_e=0.1, subsample=200))
        assert feature_masks(T, 0)[0] == "neighborhood"
        if T.edges.L:
            kind, pos, neg = feature_masks(T, T.neighborhoods.q)
            assert kind == "edge" and pos and neg

    def test_image_levels(self):
        img = mask_image((2, 3, 1), positive=[0, 4], negative=[5])
        assert img.tolist() == [[255, 0, 0], [0, 255, 96]]

    def test_color_channels_collapse(self):
        img = mask_image((2, 2, 3), positive=[4 + 3])
        assert img[1, 1] == 255

    def test_export_files(self, rng, tmp_path):
        ds = correlated_dataset(rng, groups=2, per=2, geometry=(2, 2, 1))
        T = fit_transform_pipeline(ds, FeatureConfig(rho_n=(0.5,), rho_e=0.1, subsample=200))
        out = export_masks(T, tmp_path / "m", geometry=ds.geometry)
        pgms = sorted(out.glob("*.pgm"))
        assert len(pgms) == T.n_outputs
        assert pgms[0].read_bytes().startswith(b"P5\n2 2\n255\n")
        assert len((out / "masks.csv").read_text().splitlines()) == T.n_outputs + 1
