import numpy as np
import pytest

from votelearn.elections import DirichletParams, UtilityProfile, make_rng, rank_order_from_utilities, sample_utilities
from votelearn.errors import DegenerateWelfareError, InvalidParameterError, ParseError
from votelearn.rules import rule_winners_batch
from votelearn.welfare import (ScoreVectorCache, WelfareFunction, estimate_optimal_score_vector,
                               expected_uniform_order_stats, oracle_winner, social_welfare, welfare_ratio,
                               welfare_scores)

U = UtilityProfile(np.array([[0.6, 0.3, 0.1], [0.1, 0.6, 0.3]]))
UTIL, RAWLS, EGAL = WelfareFunction("utilitarian"), WelfareFunction("rawlsian"), WelfareFunction("egalitarian", -1.0)


def test_examples():
    assert social_welfare(1, U, UTIL) == pytest.approx(0.9, abs=1e-12)
    assert np.allclose(welfare_scores(U, RAWLS), [0.1, 0.3, 0.1])
    assert np.allclose(welfare_scores(U, EGAL), [0.2, 0.6, 0.2])
    for w in (UTIL, RAWLS, EGAL):
        assert oracle_winner(U, w).winner == 1
    assert np.allclose(welfare_scores(U, UTIL), [0.7, 0.9, 0.4])


def test_egalitarian_formula_by_hand():
    # sum_i u_i(a) + lam * sum_i (u_i(a) - min_j u_j(a)), computed with loops
    u = make_rng(1).random((5, 4))
    lam = -0.7
    hand = [sum(u[:, a]) + lam * sum(u[i, a] - u[:, a].min() for i in range(5)) for a in range(4)]
    assert np.allclose(welfare_scores(u, WelfareFunction("egalitarian", lam)), hand)


def test_lambda_minus_one_is_n_times_rawlsian():
    u = make_rng(2).random((7, 5))
    assert np.allclose(welfare_scores(u, EGAL), 7 * welfare_scores(u, RAWLS))


def test_single_voter_oracle_is_top_choice():
    u = UtilityProfile(np.array([[0.2, 0.5, 0.3]]))
    for w in (UTIL, RAWLS, EGAL):
        assert oracle_winner(u, w).winner == 1


def test_identical_columns_tie():
    u = UtilityProfile(np.array([[0.4, 0.4, 0.2], [0.3, 0.3, 0.4]]))
    r = oracle_winner(u, UTIL)
    assert r.tied and r.winner == 0


def test_ratio():
    assert welfare_ratio(1, U.values, UTIL) == 1.0
    assert welfare_ratio(2, U.values, UTIL) == pytest.approx(0.4 / 0.9)


def test_ratio_degenerate():
    u = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateWelfareError):
        welfare_ratio(0, u, WelfareFunction("egalitarian", -5.0))


def test_borda_mean_ratio_resampling():
    def mean_ratio(seed):
        rng = make_rng(seed)
        out = []
        for m in range(2, 6):
            u = sample_utilities(np.ones(m), (2000, 10), rng)
            w, _ = rule_winners_batch("borda", rank_order_from_utilities(u))
            out.append(welfare_ratio(w, u, UTIL))
        return np.concatenate(out).mean()

    assert abs(mean_ratio(10) - mean_ratio(11)) < 0.05


def test_closed_form():
    assert np.allclose(expected_uniform_order_stats(3), [11 / 18, 5 / 18, 1 / 9])
    assert np.allclose(expected_uniform_order_stats(2), [0.75, 0.25])


@pytest.mark.parametrize("m", [2, 3])
def test_optimal_score_estimate(m):
    est = estimate_optimal_score_vector(DirichletParams.symmetric(1.0, m), m, 10**6, make_rng(3))
    assert np.all(np.abs(est - expected_uniform_order_stats(m)) <= 0.005)


@pytest.mark.parametrize("alpha0", [0.2, 1.0, 5.0])
def test_optimal_score_non_increasing(alpha0):
    est = estimate_optimal_score_vector(DirichletParams.symmetric(alpha0, 5), 5, 20000, make_rng(4))
    assert np.all(np.diff(est) <= 0)


def test_estimator_validation():
    with pytest.raises(InvalidParameterError):
        estimate_optimal_score_vector(DirichletParams.symmetric(1.0, 3), 4, 10, make_rng(0))
    with pytest.raises(InvalidParameterError):
        WelfareFunction("nash")


def test_score_cache_roundtrip(tmp_path):
    path = tmp_path / "cache.txt"
    c = ScoreVectorCache(str(path))
    v = c.get(1.0, 3, n_samples=5000)
    again = ScoreVectorCache(str(path)).get(1.0, 3, n_samples=5000)
    assert v.tobytes() == again.tobytes()
    path.write_text("garbage\n")
    with pytest.raises(ParseError):
        ScoreVectorCache(str(path))
