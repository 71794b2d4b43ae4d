import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from concave_rank.experiments import (
    AD_POSITIONS_HEADER,
    COMBINERS,
    DEFAULT_COV,
    POINTS_HEADER,
    SUMMARY_HEADER,
    AdConfig,
    AdInstance,
    ConstraintInfeasible,
    NdcgPoint,
    SynthConfig,
    constrained_rerank,
    deciles,
    empirical_cdf,
    gen_ads,
    gen_lognormal,
    ndcg,
    run_synth_experiment,
    summarize,
    violations,
    write_csv,
    write_synth_csvs,
)
from concave_rank.rank_core import Instance, dcg_weights
from oracles import all_perms


def log_corr(insts):
    la = np.log(np.concatenate([i.a for i in insts]))
    lb = np.log(np.concatenate([i.b for i in insts]))
    return np.corrcoef(la, lb)[0, 1]


def test_generator_correlation():
    assert abs(log_corr(gen_lognormal(SynthConfig(cov=((0.2, 0.0), (0.0, 0.2)))))) <= 0.05
    assert log_corr(gen_lognormal(SynthConfig())) == pytest.approx(-0.8, abs=0.05)


def test_generator_zero_covariance():
    insts = gen_lognormal(SynthConfig(m=3, n=5, cov=((0.0, 0.0), (0.0, 0.0)), weight_depth=5))
    for inst in insts:
        assert np.all(inst.a == 1.0) and np.all(inst.b == 1.0)


def test_generator_shape_weights_and_determinism():
    cfg = SynthConfig(m=4, n=12, weight_depth=10, seed=3)
    insts = gen_lognormal(cfg)
    assert len(insts) == 4 and all(i.n == 12 for i in insts)
    np.testing.assert_array_equal(insts[0].w, dcg_weights(12, 10))
    again = gen_lognormal(cfg)
    assert all(np.array_equal(x.a, y.a) and np.array_equal(x.b, y.b) for x, y in zip(insts, again))


@pytest.mark.parametrize("cov", [((1.0, 2.0), (2.0, 1.0)), ((0.2, 0.1), (0.0, 0.2)), ((-1.0, 0.0), (0.0, 1.0))])
def test_bad_covariance_rejected(cov):
    with pytest.raises(ValueError):
        SynthConfig(cov=cov)


def test_depth_must_fit():
    with pytest.raises(ValueError):
        SynthConfig(n=5, weight_depth=6)


def test_ndcg_examples():
    inst = Instance.with_dcg([3.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    assert ndcg(inst, np.argsort(-inst.a)).ndcg_a == 1.0
    assert ndcg(Instance([4.0], [2.0], [1.0]), [0]) == NdcgPoint(1.0, 1.0)
    with pytest.raises(ValueError):
        ndcg(Instance([0.0, 0.0], [1.0, 1.0], [1.0, 0.5]), [0, 1])


def test_ndcg_against_permutation_normalizers():
    rng = np.random.default_rng(0)
    inst = Instance.with_dcg(rng.lognormal(size=6), rng.lognormal(size=6))
    perms = all_perms(6)
    best_a, best_b = (inst.a[perms] @ inst.w).max(), (inst.b[perms] @ inst.w).max()
    for pi in perms[rng.choice(len(perms), 20)]:
        pt = ndcg(inst, pi)
        assert pt.ndcg_a == pytest.approx(inst.w @ inst.a[pi] / best_a, rel=1e-12)
        assert pt.ndcg_b == pytest.approx(inst.w @ inst.b[pi] / best_b, rel=1e-12)
        assert pt.ndcg_a <= 1 + 1e-12 and pt.ndcg_b <= 1 + 1e-12


def test_summarize_examples():
    s = summarize([NdcgPoint(0.7, 0.3)] * 10)
    assert s["a"].std == 0.0 and np.all(s["a"].deciles == 0.7)
    s = summarize([NdcgPoint(0.0, 1.0)] * 50 + [NdcgPoint(1.0, 0.0)] * 50)
    assert (s["a"].mean, s["a"].std) == (0.5, 0.5)
    with pytest.raises(ValueError):
        summarize([])


def test_deciles_against_sort_oracle():
    v = np.random.default_rng(1).random(500)
    ref = np.sort(v)[[math.ceil(k * 500 / 10) - 1 for k in range(1, 10)]]
    np.testing.assert_array_equal(deciles(v), ref)


def test_empirical_cdf():
    cdf = empirical_cdf([0.1, 0.5, 0.5, 0.9])
    assert cdf[0] == 0.0 and cdf[10] == 0.25 and cdf[50] == 0.75 and cdf[-1] == 1.0
    assert np.all(np.diff(cdf) >= 0) and cdf.size == 101


def test_rerank_without_ads_is_plain_sort():
    inst = AdInstance([1.0, 3.0, 2.0], [0.0, 0.0, 0.0], [False, False, False])
    assert constrained_rerank(inst, [1.0, 3.0, 2.0]).tolist() == [1, 2, 0]


def test_rerank_top_ad_slides_to_second():
    inst = AdInstance([1.0, 2.0, 1.5], [5.0, 0.0, 0.0], [True, False, False])
    score = np.array([3.0, 2.0, 1.0])
    out = constrained_rerank(inst, score)
    assert out.tolist() == [1, 0, 2]
    # brute-force constrained argmax of the DCG of the score
    w = dcg_weights(3)
    feasible = [p for p in all_perms(3) if not violations(inst, p)]
    best = max(feasible, key=lambda p: w @ score[p])
    assert out.tolist() == best.tolist()


def test_rerank_caps_ads_in_top_ten():
    is_ad = np.array([True] * 6 + [False] * 8)
    inst = AdInstance(np.ones(14), np.where(is_ad, 1.0, 0.0), is_ad)
    score = np.concatenate([np.linspace(10, 5, 6), np.linspace(4, 1, 8)])
    out = constrained_rerank(inst, score)
    assert np.count_nonzero(is_ad[out[:10]]) == 4
    assert not is_ad[out[0]]
    # demoted ads keep their relative order right after position 10
    assert out[10:12].tolist() == [4, 5]


def test_rerank_infeasible():
    inst = AdInstance([1.0, 1.0], [1.0, 2.0], [True, True])
    with pytest.raises(ConstraintInfeasible):
        constrained_rerank(inst, [1.0, 2.0])


def test_organic_revenue_must_be_zero():
    with pytest.raises(ValueError):
        AdInstance([1.0, 1.0], [1.0, 2.0], [True, False])


@st.composite
def ad_instances(draw):
    n = draw(st.integers(1, 25))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    is_ad = rng.random(n) < draw(st.floats(0.0, 0.9))
    is_ad[rng.integers(n)] = False
    rev = np.where(is_ad, rng.lognormal(size=n), 0.0)
    return AdInstance(rng.lognormal(size=n), rev, is_ad), rng.standard_normal(n)


@given(ad_instances())
def test_rerank_satisfies_constraints_whenever_feasible(case):
    inst, score = case
    top = min(10, inst.n)
    feasible = np.count_nonzero(~inst.is_ad) >= top - 4
    if not feasible:
        with pytest.raises(ConstraintInfeasible):
            constrained_rerank(inst, score)
        return
    out = constrained_rerank(inst, score)
    assert sorted(out.tolist()) == list(range(inst.n))
    assert violations(inst, out) == []


def test_gen_ads_invariants():
    cfg = AdConfig(m=50, seed=4)
    ads = gen_ads(cfg)
    assert len(ads) == 50
    for x in ads:
        assert np.all(x.revenue[~x.is_ad] == 0) and np.all(x.revenue[x.is_ad] > 0)
        assert np.count_nonzero(~x.is_ad) >= cfg.n // 2


def test_single_instance_report():
    rep = run_synth_experiment(SynthConfig(m=1, seed=2))
    assert len(rep.summary_rows()) == 2 * len(COMBINERS)
    for name in COMBINERS:
        assert len(rep.points[name]) == 1
        assert rep.summary[name]["a"].std == 0.0


def test_unknown_combiner():
    with pytest.raises(ValueError):
        run_synth_experiment(SynthConfig(m=1), ["Harmonic"])


def test_csv_outputs(tmp_path):
    rep = run_synth_experiment(SynthConfig(m=6, n=12, seed=1))
    paths = write_synth_csvs(rep, tmp_path)
    with open(paths[0]) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == POINTS_HEADER and len(rows) == 1 + 6 * len(COMBINERS)
    with open(paths[1]) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SUMMARY_HEADER and len(rows) == 1 + 2 * len(COMBINERS)
    assert all(0 <= float(r[2]) <= 1 for r in rows[1:])
    again = tmp_path / "again"
    write_synth_csvs(run_synth_experiment(SynthConfig(m=6, n=12, seed=1)), again)
    for p in paths:
        assert p.read_bytes() == (again / p.name).read_bytes()
    assert not list(tmp_path.glob(".*.tmp"))


def test_write_csv_round_trips_floats(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "x.csv", ("v",), [(x,)])
    assert float((tmp_path / "x.csv").read_text().splitlines()[1]) == x


@pytest.mark.slow
def test_concave_combiners_concentrate(synth_reports):
    for rep in synth_reports:
        for comp in ("a", "b"):
            concave = max(rep.summary[c][comp].std for c in ("LogProduct", "QuadraticNormalized"))
            additive = min(rep.summary[c][comp].std for c in ("LinearSum", "NormalizedSum"))
            assert concave < additive


@pytest.mark.slow
def test_bottom_decile_lift(synth_reports):
    for rep in synth_reports:
        assert rep.min_component_deciles("LogProduct")[0] > rep.min_component_deciles("LinearSum")[0]


@pytest.mark.slow
def test_ad_report_shape(ad_report):
    rows = ad_report.position_rows()
    assert len(rows) == 20 and len(AD_POSITIONS_HEADER) == 3
    assert {r[2] for r in rows} == {"ExpPenalty", "LinearSum"}
    for out in (ad_report.exp, ad_report.linear):
        assert out.ad_positions(ad_report.ads)[0] == 0
        assert np.all(out.relevance_ndcg <= 1 + 1e-12)
