import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_difference, crf_brute
from regccrf.crf import (
    TagScores,
    forward_backward,
    log_partition,
    logsumexp,
    marginals,
    nll,
    nll_gradient,
    sequence_log_score,
    viterbi,
)
from regccrf.errors import EmptySupportError


def random_scores(rng, t, n, p_forbid=0.0, scale=2.0, masks=False):
    em = rng.normal(0, scale, size=(t, n))
    tr = rng.normal(0, scale, size=(n, n))
    if p_forbid:
        em[rng.random(em.shape) < p_forbid] = -np.inf
        tr[rng.random(tr.shape) < p_forbid] = -np.inf
    start = end = None
    if masks:
        start = rng.random(n) < 0.7
        end = rng.random(n) < 0.7
    return em, tr, start, end


def check_against_brute(em, tr, start, end, tol=1e-9):
    s = TagScores(em, tr, start, end)
    ref = crf_brute(em, tr, start, end)
    if ref["log_z"] == -math.inf:
        with pytest.raises(EmptySupportError):
            log_partition(s)
        with pytest.raises(EmptySupportError):
            viterbi(s)
        return
    assert log_partition(s) == pytest.approx(ref["log_z"], rel=1e-12, abs=tol)
    m, log_z = forward_backward(s)
    assert log_z == pytest.approx(ref["log_z"], rel=1e-12, abs=tol)
    np.testing.assert_allclose(m.unary, ref["unary"], atol=tol)
    np.testing.assert_allclose(m.pairwise, ref["pairwise"], atol=tol)
    path, best = viterbi(s)
    assert best == pytest.approx(ref["best"], rel=1e-12, abs=tol)
    assert tuple(path) in ref["argmax"]


class TestAgainstEnumeration:
    @pytest.mark.parametrize("seed", range(60))
    def test_dense(self, seed):
        rng = np.random.default_rng(seed)
        t, n = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        check_against_brute(*random_scores(rng, t, n))

    @pytest.mark.parametrize("seed", range(60))
    def test_sparse_with_masks(self, seed):
        rng = np.random.default_rng(1000 + seed)
        t, n = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        check_against_brute(*random_scores(rng, t, n, p_forbid=0.35, masks=True))

    def test_large_scores_are_stable(self):
        rng = np.random.default_rng(3)
        em, tr, _, _ = random_scores(rng, 5, 3, scale=300.0)
        s = TagScores(em, tr)
        ref = crf_brute(em, tr)
        assert log_partition(s) == pytest.approx(ref["log_z"], rel=1e-12)
        assert np.all(np.isfinite(marginals(s).unary))

    def test_zero_scores_are_uniform(self):
        s = TagScores(np.zeros((4, 3)), np.zeros((3, 3)))
        assert log_partition(s) == pytest.approx(4 * math.log(3))
        np.testing.assert_allclose(marginals(s).unary, 1 / 3)

    @given(
        arrays(np.float64, (3, 2), elements=st.floats(-5, 5)),
        arrays(np.float64, (2, 2), elements=st.floats(-5, 5)),
    )
    @settings(max_examples=100, deadline=None)
    def test_marginals_are_distributions(self, em, tr):
        m = marginals(TagScores(em, tr))
        np.testing.assert_allclose(m.unary.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(m.pairwise.sum(axis=(1, 2)), 1.0, atol=1e-12)
        np.testing.assert_allclose(m.pairwise.sum(axis=2), m.unary[:-1], atol=1e-12)


class TestSequenceScore:
    def test_sum_of_parts(self):
        em = np.arange(6.0).reshape(3, 2)
        tr = np.array([[0.5, -1.0], [2.0, 0.0]])
        s = TagScores(em, tr)
        assert sequence_log_score(s, [0, 1, 0]) == pytest.approx(0 + 3 + 4 - 1.0 + 2.0)

    def test_forbidden_is_minus_infinity(self):
        tr = np.array([[0.0, -np.inf], [0.0, 0.0]])
        s = TagScores(np.zeros((2, 2)), tr)
        assert sequence_log_score(s, [0, 1]) == -math.inf
        with pytest.raises(ValueError):
            nll(s, [0, 1])

    def test_masks(self):
        s = TagScores(np.zeros((2, 2)), np.zeros((2, 2)), [True, False], [False, True])
        assert sequence_log_score(s, [1, 1]) == -math.inf
        assert sequence_log_score(s, [0, 0]) == -math.inf
        assert nll(s, [0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            sequence_log_score(TagScores(np.zeros((2, 2)), np.zeros((2, 2))), [0])


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            TagScores(np.zeros((2, 3)), np.zeros((2, 2)))

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            TagScores(np.array([[np.nan]]), np.zeros((1, 1)))

    def test_empty_support(self):
        s = TagScores(np.zeros((2, 2)), np.full((2, 2), -np.inf))
        with pytest.raises(EmptySupportError):
            log_partition(s)
        with pytest.raises(EmptySupportError):
            marginals(s)

    def test_no_tags(self):
        with pytest.raises(EmptySupportError):
            log_partition(TagScores(np.zeros((2, 0)), np.zeros((0, 0))))

    def test_logsumexp_all_forbidden(self):
        assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf


def _relative_close(a, b, rel=1e-5):
    scale = max(1.0, float(np.max(np.abs(b))))
    assert float(np.max(np.abs(a - b))) <= rel * scale


class TestGradient:
    @pytest.mark.parametrize("seed", range(25))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        t, n = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        em, tr, _, _ = random_scores(rng, t, n, scale=1.0)
        y = rng.integers(0, n, size=t)
        g_em, g_tr = nll_gradient(TagScores(em, tr), y)
        fd_em = central_difference(lambda e: nll(TagScores(e, tr), y), em)
        fd_tr = central_difference(lambda r: nll(TagScores(em, r), y), tr)
        _relative_close(g_em, fd_em)
        _relative_close(g_tr, fd_tr)

    def test_gradient_is_expected_minus_observed(self):
        s = TagScores(np.zeros((3, 2)), np.zeros((2, 2)))
        g_em, g_tr = nll_gradient(s, [0, 0, 1])
        np.testing.assert_allclose(g_em, [[-0.5, 0.5], [-0.5, 0.5], [0.5, -0.5]])
        np.testing.assert_allclose(g_tr.sum(), 0.0, atol=1e-12)
