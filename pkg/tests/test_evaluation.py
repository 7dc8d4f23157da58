import json

import numpy as np
import pytest

from votelearn.dataio import Election, ElectionDataset
from votelearn.elections import ElectionSpec
from votelearn.encoding import EncodingConfig
from votelearn.errors import CapacityError, InvalidParameterError
from votelearn.evaluation import (PerfectStub, RandomLogits, from_model, from_oracle, from_rule, make_eval_set,
                                  mimic_table, ratio_histogram, real_data_eval, voter_bucket_accuracy,
                                  welfare_eval, wilson_interval)
from votelearn.training import Target
from votelearn.welfare import ScoreVectorCache, WelfareFunction

SPEC = ElectionSpec(2, 20, 2, 5)
ENC = EncodingConfig(m_max=5)


@pytest.mark.parametrize("rule", ["plurality", "borda", "copeland", "maximin", "kemeny"])
def test_perfect_stub_scores_one(rule):
    spec = ElectionSpec(2, 12, 3 if rule == "kemeny" else 2, 5)
    es = make_eval_set(spec, Target("mimic", rule), 400, seed=3)
    pred = PerfectStub(rule, ENC).predictor()(es)
    assert np.array_equal(pred, es.targets)


def test_stub_through_model_predictor():
    es = make_eval_set(SPEC, Target("mimic", "borda"), 300, seed=1)
    assert np.array_equal(from_model(PerfectStub("borda", ENC), ENC)(es), es.targets)


def test_random_logits_at_chance():
    spec = ElectionSpec(2, 20, 4, 4)
    count = 6000
    es = make_eval_set(spec, Target("mimic", "plurality"), count, seed=5)
    acc = float((from_model(RandomLogits(5, seed=2), ENC)(es) == es.targets).mean())
    sigma = np.sqrt(0.25 * 0.75 / count)
    assert abs(acc - 0.25) <= 3 * sigma


def test_eval_sets_are_reproducible_and_tie_free():
    a = make_eval_set(SPEC, Target("mimic", "copeland"), 500, seed=9)
    b = make_eval_set(SPEC, Target("mimic", "copeland"), 500, seed=9)
    assert a.digest() == b.digest() and not a.tied.any()
    c = make_eval_set(SPEC, Target("mimic", "copeland"), 500, seed=10)
    assert c.digest() != a.digest()


def test_oracle_ratio_is_point_mass():
    w = WelfareFunction("utilitarian")
    es = make_eval_set(SPEC, Target("welfare", welfare=w), 300, seed=2)
    rep = welfare_eval({"oracle": from_oracle(w)}, w, SPEC, eval_set=es, baselines=(), optimal=False)
    assert rep.accuracy("oracle") == 1.0 and rep.rows["oracle"]["mean_ratio"] == 1.0
    edges, masses = rep.histograms["oracle"]
    assert masses[49] == 1.0 and edges[-1] == 1.0


def test_histogram_bins():
    _, masses = ratio_histogram(np.array([0.0, 0.02, 0.021, 0.5, 1.0]))
    assert masses.sum() == pytest.approx(1.0)
    assert masses[0] == pytest.approx(0.4)  # 0 and the closed right edge 0.02
    assert masses[1] == pytest.approx(0.2)
    assert masses[24] == pytest.approx(0.2) and masses[49] == pytest.approx(0.2)
    with pytest.raises(InvalidParameterError):
        ratio_histogram(np.array([1.5]))


def test_welfare_baselines_deterministic():
    w = WelfareFunction("egalitarian", -1.0)
    cache = ScoreVectorCache()
    kw = dict(count=400, seed=4, score_cache=cache, score_samples=20_000)
    a = welfare_eval({}, w, SPEC, **kw)
    b = welfare_eval({}, w, SPEC, **kw)
    assert a.to_jsonl() == b.to_jsonl()
    assert set(a.rows) == {"plurality", "borda", "copeland", "maximin", "optimal"}
    for name, (_, masses) in a.histograms.items():
        assert masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert 0 < a.rows[name]["mean_ratio"] <= 1


def test_mimic_table_and_report_files(tmp_path):
    preds = {("stub", r): PerfectStub(r, ENC).predictor() for r in ("plurality", "borda")}
    preds[("rule", "borda")] = from_rule("borda")
    rep = mimic_table(preds, SPEC, count=200, seed=0)
    assert all(v["accuracy"] == 1.0 for v in rep.rows.values())
    rep.save(str(tmp_path / "r"))
    recs = [json.loads(l) for l in open(tmp_path / "r.jsonl")]
    assert recs[0]["kind"] == "meta" and len([r for r in recs if r["kind"] == "accuracy"]) == 3
    assert "stub/borda" in (tmp_path / "r.txt").read_text()


def test_bucket_capacity_is_reported():
    class Capped:
        def __call__(self, es):
            if max(r.shape[0] for r in es.rank_orders) > 20:
                raise CapacityError("too many voters")
            return es.targets

    rep = voter_bucket_accuracy(Capped(), Target("mimic", "borda"), [(2, 20), (21, 40)], SPEC, count=50)
    assert rep.buckets["2:20"]["accuracy"] == 1.0
    assert "unavailable" in rep.buckets["21:40"]
    assert "N/A" in rep.render()


def test_unanimous_copies_score_one():
    rng = np.random.default_rng(0)
    elections = []
    for _ in range(50):
        m = int(rng.integers(2, 6))
        ballot = rng.permutation(m)
        elections.append(Election(np.tile(ballot, (int(rng.integers(1, 15)), 1))))
    ds = ElectionDataset(elections, {})
    for rule in ("plurality", "borda", "copeland", "maximin"):
        rep = real_data_eval(PerfectStub(rule, ENC).predictor(), rule, ds, m_max=5)
        assert rep.accuracy(rule) == 1.0
        assert real_data_eval(lambda es: np.array([r[0, 0] for r in es.rank_orders]), rule, ds, 5).accuracy(rule) == 1.0


def test_real_data_capacity():
    ds = ElectionDataset([Election(np.tile(np.arange(6), (3, 1)))], {})
    with pytest.raises(CapacityError):
        real_data_eval(from_rule("borda"), "borda", ds, m_max=5)


def test_wilson():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(2 * 0.0960, abs=2e-3)
    assert wilson_interval(0, 10)[0] == 0.0
