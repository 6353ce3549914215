import math

import numpy as np
import pytest
from scipy.linalg import orthogonal_procrustes
from scipy.spatial.distance import pdist, squareform

from seedrelay import codec, privacy
from seedrelay import dataset as ds
from seedrelay.dataset import LabelIndicator


def ind(*labels):
    return LabelIndicator.from_labels(labels)


class TestLabelPrivacy:
    def test_one_target_one_dummy_is_exactly_half(self):
        assert privacy.label_privacy_single(ind(7), ind(7, 9)) == 0.5

    def test_no_dummies_means_zero_privacy(self):
        assert privacy.label_privacy_single(ind(2, 5), ind(2, 5)) == 0.0

    def test_full_cover_is_09(self):
        assert privacy.label_privacy_single(ind(3), ind(*range(10))) == pytest.approx(0.9)

    def test_empty_public_set_is_undefined(self):
        with pytest.raises(privacy.UndefinedPrivacyError):
            privacy.label_privacy_single(LabelIndicator.empty(), LabelIndicator.empty())

    def test_target_outside_public_rejected(self):
        with pytest.raises(ValueError):
            privacy.label_privacy_single(ind(1), ind(2, 3))

    def test_multihop_two_label_union_is_half(self):
        # one target hidden inside a two-label delivered union
        assert privacy.label_privacy_multihop(ind(7), [ind(7, 9)]) == 0.5

    def test_multihop_union_over_hops(self):
        hops = [ind(1, 4), ind(1, 4, 6), ind(*range(10))]
        assert privacy.label_privacy_multihop(ind(1), hops) == pytest.approx(0.9)

    def test_multihop_single_element_reduces_to_single(self):
        t, p = ind(2), ind(2, 8, 9)
        assert privacy.label_privacy_multihop(t, [p]) == privacy.label_privacy_single(t, p)

    def test_adding_dummy_never_decreases_privacy(self):
        t = ind(0)
        public = ind(0)
        last = privacy.label_privacy_single(t, public)
        for lab in range(1, 10):
            public = public | ind(lab)
            now = privacy.label_privacy_single(t, public)
            assert now >= last
            last = now


class TestSimilarity:
    def test_identical_pair_hits_degenerate_sentinel(self):
        img = np.full((28, 28), 80, dtype=np.uint8)
        assert privacy.similarity([img, img]) == privacy.SIMILARITY_DEGENERATE

    def test_unit_distance_gives_log_zero(self):
        a = np.zeros((28, 28), dtype=np.uint8)
        b = np.zeros((28, 28), dtype=np.uint8)
        b[3, 3] = 255  # full-intensity pixel: normalized distance exactly 1
        assert privacy.similarity([a, b]) == pytest.approx(0.0, abs=1e-12)

    def test_permutation_invariance(self, rng):
        imgs = ds.synth_digits(rng, per_label=2).images
        perm = rng.permutation(len(imgs))
        assert privacy.similarity(imgs) == pytest.approx(privacy.similarity(imgs[perm]))

    def test_matches_brute_force_max_log_distance(self, rng):
        imgs = ds.synth_digits(rng, per_label=1).images
        flat = imgs.reshape(len(imgs), -1).astype(float) / 255.0
        best = max(
            math.log(np.linalg.norm(flat[i] - flat[j]))
            for i in range(len(flat))
            for j in range(i + 1, len(flat))
        )
        assert privacy.similarity(imgs) == pytest.approx(best, rel=1e-9)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            privacy.similarity([np.zeros((28, 28), dtype=np.uint8)])

    def test_sparsification_shrinks_similarity_usually(self):
        pool = ds.synth_digits(np.random.default_rng(12), per_label=5)
        imgs = pool.images
        base = privacy.similarity(imgs)
        wins = 0
        seeds = 40
        for s in range(seeds):
            gen = np.random.default_rng(1000 + s)
            squeezed = np.stack([codec.sparsify(im, 0.15, gen) for im in imgs])
            if privacy.similarity(squeezed) < base:
                wins += 1
        assert wins / seeds >= 0.8


class TestSamplePrivacy:
    def test_reciprocal_values(self):
        assert privacy.sample_privacy(2.0) == 0.5
        assert privacy.sample_privacy(0.5) == 2.0

    def test_rejects_nonpositive_similarity(self):
        with pytest.raises(privacy.SimilarityDomainError):
            privacy.sample_privacy(0.0)
        with pytest.raises(privacy.SimilarityDomainError):
            privacy.sample_privacy(-1.0)
        with pytest.raises(privacy.SimilarityDomainError):
            privacy.sample_privacy(privacy.SIMILARITY_DEGENERATE)


def _recovered_distances(coords):
    return squareform(pdist(coords))


class TestClassicalMds:
    def test_equilateral_triangle_recovered_exactly(self):
        D = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        coords = privacy.classical_mds(D, dim=2)
        rec = _recovered_distances(coords)
        assert np.max(np.abs(rec - D)) < 1e-6

    def test_planar_round_trip(self):
        rng = np.random.default_rng(77)
        pts = rng.uniform(-5, 5, size=(12, 2))
        D = squareform(pdist(pts))
        coords = privacy.classical_mds(D, dim=2)
        assert coords.shape == (12, 2)
        assert np.max(np.abs(_recovered_distances(coords) - D)) < 1e-6

    def test_duplicated_point_stays_coincident(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(0, 1, size=(5, 2))
        pts[4] = pts[2]
        D = squareform(pdist(pts))
        coords = privacy.classical_mds(D, dim=2)
        assert np.linalg.norm(coords[4] - coords[2]) < 1e-9

    def test_embedding_centered_at_origin(self):
        rng = np.random.default_rng(8)
        D = squareform(pdist(rng.uniform(0, 3, size=(7, 2))))
        coords = privacy.classical_mds(D, dim=2)
        assert np.allclose(coords.mean(axis=0), 0.0, atol=1e-9)

    def test_rigid_transform_invariance_by_procrustes(self):
        rng = np.random.default_rng(21)
        pts = rng.uniform(-2, 2, size=(10, 2))
        theta = 0.7
        rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        moved = pts @ rot.T + np.array([3.0, -1.5])
        a = privacy.classical_mds(squareform(pdist(pts)), dim=2)
        b = privacy.classical_mds(squareform(pdist(moved)), dim=2)
        R, _ = orthogonal_procrustes(b, a)
        assert np.max(np.abs(b @ R - a)) < 1e-6

    def test_rejects_asymmetric_matrix(self):
        D = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError):
            privacy.classical_mds(D)

    def test_rejects_nonzero_diagonal(self):
        D = np.array([[0.5, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            privacy.classical_mds(D)

    def test_rejects_negative_entries(self):
        D = np.array([[0.0, -1.0], [-1.0, 0.0]])
        with pytest.raises(ValueError):
            privacy.classical_mds(D)

    def test_pairwise_distances_helper_normalizes_bytes(self):
        a = np.zeros((28, 28), dtype=np.uint8)
        b = np.zeros((28, 28), dtype=np.uint8)
        b[0, 0] = 255
        D = privacy.pairwise_distances(np.stack([a, b]))
        assert D[0, 1] == pytest.approx(1.0)
        assert D[0, 0] == 0.0
