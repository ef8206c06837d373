import math

import numpy as np
import pytest

from avclust.exceptions import DegenerateVectorError
from avclust.losses import center_scores, margin_loss, margin_loss_batch


class TestCenterScores:
    def test_identical_sets(self):
        rng = np.random.default_rng(0)
        c = rng.normal(size=(3, 4))
        np.testing.assert_allclose(center_scores(c, c), np.ones(3), atol=1e-12)

    def test_opposite_sets(self):
        rng = np.random.default_rng(1)
        c = rng.normal(size=(3, 4))
        np.testing.assert_allclose(center_scores(c, -c), -np.ones(3), atol=1e-12)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(4, 3))
        v = rng.normal(size=(4, 3))
        scores = center_scores(a, v)
        for i in range(4):
            dot = sum(a[i][d] * v[i][d] for d in range(3))
            na = math.sqrt(sum(x * x for x in a[i]))
            nv = math.sqrt(sum(x * x for x in v[i]))
            assert scores[i] == pytest.approx(dot / (na * nv), abs=1e-12)

    def test_degenerate_center(self):
        with pytest.raises(DegenerateVectorError):
            center_scores(np.zeros((2, 3)), np.ones((2, 3)))


class TestMarginLoss:
    def test_inactive_hinges(self):
        # pos scores 1, neg scores -1, margin 0.5: every hinge is inactive
        v = np.array([[1.0, 0.0], [0.0, 1.0]])
        loss = margin_loss(v, v, -v, 0.5)
        assert loss == 0.0

    def test_coincident_scores_give_k_margin(self):
        # negative centers equal positive centers: every hinge sits exactly at margin
        rng = np.random.default_rng(3)
        a = rng.normal(size=(2, 3))
        v = rng.normal(size=(2, 3))
        assert margin_loss(a, v, a, 0.5) == pytest.approx(1.0, abs=1e-12)
        assert margin_loss(a, v, a, 0.25) == pytest.approx(0.5, abs=1e-12)

    def test_matches_double_loop_oracle_same_index(self):
        rng = np.random.default_rng(4)
        a, v, n = (rng.normal(size=(4, 3)) for _ in range(3))
        loss = margin_loss(a, v, n, 0.37)
        expected = 0.0
        for i in range(4):
            pos = float(center_scores(a[i:i + 1], v[i:i + 1])[0])
            neg = float(center_scores(n[i:i + 1], v[i:i + 1])[0])
            expected += max(0.0, neg - pos + 0.37)
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_matches_double_loop_oracle_all_pairs(self):
        rng = np.random.default_rng(5)
        a, v, n = (rng.normal(size=(3, 4)) for _ in range(3))
        loss = margin_loss(a, v, n, 0.4, pairing="all_pairs")
        expected = 0.0
        for i in range(3):
            pos = float(center_scores(a[i:i + 1], v[i:i + 1])[0])
            for j in range(3):
                if j == i:
                    continue
                neg = float(center_scores(n[j:j + 1], v[i:i + 1])[0])
                expected += max(0.0, neg - pos + 0.4)
        assert loss == pytest.approx(expected, abs=1e-12)

    def test_non_negative_and_zero_condition(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a, v, n = (rng.normal(size=(3, 5)) for _ in range(3))
            margin = float(rng.uniform(0.05, 1.0))
            loss = margin_loss(a, v, n, margin)
            assert loss >= 0.0
            pos = center_scores(a, v)
            neg = center_scores(n, v)
            if loss == 0.0:
                assert np.all(pos - neg >= margin - 1e-12)
            else:
                assert np.any(pos - neg < margin)

    def test_invariant_under_center_rescaling(self):
        rng = np.random.default_rng(7)
        a, v, n = (rng.normal(size=(3, 4)) for _ in range(3))
        base = margin_loss(a, v, n, 0.5)
        a2 = a.copy()
        a2[1] *= 17.0
        v2 = v.copy()
        v2[0] *= 0.003
        assert margin_loss(a2, v2, n, 0.5) == pytest.approx(base, abs=1e-9)

    def test_batch_matches_per_sample(self):
        rng = np.random.default_rng(8)
        Ca, Cv, Cn = (rng.normal(size=(5, 3, 4)) for _ in range(3))
        for pairing in ("same_index", "all_pairs"):
            losses, _, _, _, _, _ = margin_loss_batch(Ca, Cv, Cn, 0.3, pairing)
            for b in range(5):
                assert losses[b] == pytest.approx(
                    margin_loss(Ca[b], Cv[b], Cn[b], 0.3, pairing), abs=1e-12)

    def test_center_gradients_match_finite_differences(self):
        rng = np.random.default_rng(9)
        for pairing in ("same_index", "all_pairs"):
            Ca, Cv, Cn = (rng.normal(size=(2, 3, 4)) for _ in range(3))
            losses, _, _, g_a, g_v, g_n = margin_loss_batch(Ca, Cv, Cn, 0.45, pairing)
            h = 1e-7
            for arr, grad in ((Ca, g_a), (Cv, g_v), (Cn, g_n)):
                flat, gflat = arr.reshape(-1), grad.reshape(-1)
                for idx in range(0, flat.size, 3):
                    orig = flat[idx]
                    flat[idx] = orig + h
                    f_plus = float(np.sum(margin_loss_batch(Ca, Cv, Cn, 0.45, pairing)[0]))
                    flat[idx] = orig - h
                    f_minus = float(np.sum(margin_loss_batch(Ca, Cv, Cn, 0.45, pairing)[0]))
                    flat[idx] = orig
                    numeric = (f_plus - f_minus) / (2 * h)
                    assert abs(gflat[idx] - numeric) <= 1e-6 * max(1.0, abs(numeric))
