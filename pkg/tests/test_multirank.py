import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concave_rank.multirank import (
    MultiProblem,
    SolverParams,
    _Outer,
    inner_solve,
    make_problem,
    multi_topk,
    psi,
    solve_multirank,
)
from concave_rank.objective import ConcaveObjective
from concave_rank.rank_core import (
    Instance,
    SolverError,
    best_cumulative_score,
    perturb,
    solve_rank,
    topk_solve,
    topk_weights,
)
from oracles import brute_multi_opt, brute_multi_topk_opt, rank_score_table, subset_score_table

LOG = ConcaveObjective.log_product()


def best(x, w):
    return best_cumulative_score(x, w)[0]


def quad_for(insts):
    return ConcaveObjective.quadratic_normalized(sum(best(i.a, i.w) for i in insts),
                                                 sum(best(i.b, i.w) for i in insts))


def random_problem(rng, m, n, **params):
    insts = [Instance.with_dcg(rng.integers(1, 11, n).astype(float), rng.integers(1, 11, n).astype(float))
             for _ in range(m)]
    locs = [LOG if rng.random() < 0.5 else quad_for([i]) for i in insts]
    F = LOG if rng.random() < 0.5 else quad_for(insts)
    return make_problem(insts, locs, F, **params)


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(max_outer_iters=0)
    with pytest.raises(ValueError):
        SolverParams(method="adam")
    with pytest.raises(ValueError):
        SolverParams(sample_size=2)
    with pytest.raises(ValueError):
        MultiProblem((), (), LOG)


def test_inner_solve_small_prices_reproduce_single_solve():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = Instance.with_dcg(rng.lognormal(size=6), rng.lognormal(size=6))
        work = perturb(inst, 0)
        sol = inner_solve(work, LOG, 1e-9, 1e-9, seed=0)
        res = solve_rank(inst, LOG, seed=0, mode="randomized")
        assert sol.point == pytest.approx(res.relaxed, rel=1e-6)


def test_inner_solve_linear_local_is_one_sort():
    rng = np.random.default_rng(5)
    inst = perturb(Instance.with_dcg(rng.lognormal(size=8), rng.lognormal(size=8)), 0)
    p, q, u, v = 0.3, 0.7, 1.0, 2.0
    sol = inner_solve(inst, ConcaveObjective.linear_sum(u, v), p, q)
    lam = (q + v) / (p + u)
    assert not sol.fixed.on_ray
    assert sol.fixed.lo.sigma.tolist() == np.argsort(-(inst.a + lam * inst.b)).tolist()
    assert sol.dual == (u, v)


def test_inner_solve_membership():
    rng = np.random.default_rng(6)
    for _ in range(30):
        inst = perturb(Instance.with_dcg(rng.lognormal(size=5), rng.lognormal(size=5)), 1)
        p, q = rng.uniform(0.1, 2.0, 2)
        sol = inner_solve(inst, LOG, p, q)
        assert sol.dual == pytest.approx(LOG.grad(*sol.point), rel=1e-8)
        # the point is a subgradient of cs* at the shifted direction
        direction = np.array([p + sol.dual[0], q + sol.dual[1]])
        table = rank_score_table(inst.a, inst.b, inst.w) @ direction
        assert np.dot(direction, sol.point) == pytest.approx(table.max(), rel=1e-8)


def test_inner_solve_needs_positive_prices():
    with pytest.raises(ValueError):
        inner_solve(Instance.with_dcg([1.0, 2.0], [2.0, 1.0]), LOG, 0.0, 1.0)


def test_psi_matches_formula_recomputation():
    insts = [Instance([3.0, 1.0, 2.0], [1.0, 2.0, 4.0], [1.0, 0.5, 0.25]),
             Instance([2.0, 5.0], [3.0, 1.0], [1.0, 0.3])]
    prob = make_problem(insts, [LOG, LOG], LOG)
    p, q, duals = 0.4, 0.9, [(0.2, 0.3), (1.1, 0.6)]
    ref = -math.log(p * q) - 2
    for inst, (pi, qi) in zip(insts, duals):
        x = (p + pi) * inst.a + (q + qi) * inst.b
        ref += np.sort(x)[::-1] @ inst.w - math.log(pi * qi) - 2
    assert psi(prob, p, q, duals) == pytest.approx(ref, rel=1e-12)


def test_psi_single_instance_collapse():
    """With a linear F priced at its own slopes, F* vanishes and one instance is left."""
    inst = Instance([3.0, 1.0, 2.0], [1.0, 2.0, 4.0], [1.0, 0.5, 0.25])
    eps = 1e-3
    prob = make_problem([inst], [LOG], ConcaveObjective.linear_sum(eps, eps))
    pi, qi = 0.5, 0.8
    single = best(eps * inst.a + eps * inst.b + pi * inst.a + qi * inst.b, inst.w) + LOG.fenchel(-pi, -qi)
    assert psi(prob, eps, eps, [(pi, qi)]) == pytest.approx(single, rel=1e-12)


def test_psi_midpoint_convexity():
    rng = np.random.default_rng(8)
    prob = random_problem(rng, 3, 5)
    for _ in range(100):
        z1, z2 = rng.uniform(0.01, 3.0, (2, 8))
        mid = (z1 + z2) / 2

        def val(z):
            return psi(prob, z[0], z[1], z[2:].reshape(3, 2))

        lhs, rhs = val(mid), (val(z1) + val(z2)) / 2
        assert lhs <= rhs + 1e-9 * (1 + abs(rhs))


def test_outer_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 10:
        inst = Instance.with_dcg(rng.lognormal(size=4), rng.lognormal(size=4))
        F = quad_for([inst])
        outer = _Outer(make_problem([inst], [LOG], F))
        z = rng.uniform(0.05, 0.5, 2) / np.array([F.params["s_a"], F.params["s_b"]])
        _, g, _ = outer.evaluate(z)
        h = 1e-5 * z
        for k in range(2):
            e = np.zeros(2)
            e[k] = h[k]
            fd = (outer.evaluate(z + e)[0] - outer.evaluate(z - e)[0]) / (2 * h[k])
            assert fd == pytest.approx(g[k], rel=1e-4, abs=1e-6 * np.abs(g).max())
        checked += 1


def test_linear_global_objective_is_rejected():
    inst = Instance.with_dcg([1.0, 2.0, 3.0], [3.0, 1.0, 2.0])
    with pytest.raises(SolverError):
        solve_multirank(make_problem([inst], [LOG], ConcaveObjective.linear_sum(1.0, 1.0)))


def test_converged_gradient_is_small():
    prob = random_problem(np.random.default_rng(10), 5, 6)
    res = solve_multirank(prob)
    assert res.converged
    assert res.grad_norm <= prob.params.grad_tol * (1 + abs(res.history[-1]))


def test_single_instance_with_flat_global_matches_rank():
    rng = np.random.default_rng(12)
    for trial in range(20):
        inst = Instance.with_dcg(rng.integers(1, 20, 5).astype(float), rng.integers(1, 20, 5).astype(float))
        F = ConcaveObjective.quadratic_normalized(1e9, 1e9)
        res = solve_multirank(make_problem([inst], [LOG], F, seed=trial))
        single = solve_rank(inst, LOG, seed=trial)
        assert res.converged
        assert res.results[0].ranking.tolist() == single.ranking.tolist()


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_tuple_oracle_three_instances(seed):
    rng = np.random.default_rng(100 + seed)
    insts = [Instance.with_dcg(rng.integers(1, 11, 5).astype(float), rng.integers(1, 11, 5).astype(float))
             for _ in range(3)]
    prob = make_problem(insts, [LOG] * 3, LOG, seed=seed)
    res = solve_multirank(prob)
    assert res.converged
    opt = brute_multi_opt(insts, prob.locals, LOG)
    assert res.objective_value >= opt - 1e-9 * (1 + abs(opt))
    assert res.opt_bound >= opt - 1e-9 * (1 + abs(opt))


def test_aligned_instances_need_no_augmentation():
    rng = np.random.default_rng(13)
    insts = []
    for _ in range(3):
        a = rng.permutation(np.arange(1.0, 7.0))
        insts.append(Instance.with_dcg(a, a.copy()))
    res = solve_multirank(make_problem(insts, [LOG] * 3, quad_for(insts)))
    for inst, r in zip(insts, res.results):
        assert r.aug_index is None
        assert r.ranking.tolist() == np.argsort(-inst.a).tolist()


def test_objective_value_and_locality():
    prob = random_problem(np.random.default_rng(14), 3, 5)
    res = solve_multirank(prob)
    ga = sum(r.alpha for r in res.results)
    gb = sum(r.beta for r in res.results)
    value = prob.global_f.value(ga, gb) + sum(f.value(r.alpha, r.beta) for f, r in zip(prob.locals, res.results))
    assert res.objective_value == pytest.approx(value, rel=1e-12)
    for inst, r in zip(prob.instances, res.results):
        changed = np.flatnonzero(r.weights != inst.w)
        if r.aug_index is None:
            assert changed.size == 0
        else:
            assert changed.tolist() == [r.aug_index + 1] and r.weights[r.aug_index + 1] == inst.w[r.aug_index]


def test_subgradient_method_agrees_with_newton():
    prob = random_problem(np.random.default_rng(15), 2, 4)
    newton = solve_multirank(prob)
    sub = solve_multirank(MultiProblem(prob.instances, prob.locals, prob.global_f,
                                       SolverParams(method="subgradient", max_outer_iters=400, grad_tol=1e-4)))
    assert sub.history[-1] >= newton.history[-1] - 1e-9 * (1 + abs(newton.history[-1]))
    assert min(sub.history) == pytest.approx(newton.history[-1], rel=1e-3)


def test_subgradient_windowed_descent():
    prob = random_problem(np.random.default_rng(16), 3, 5)
    res = solve_multirank(MultiProblem(prob.instances, prob.locals, prob.global_f,
                                       SolverParams(method="subgradient", max_outer_iters=200, grad_tol=1e-12)))
    h = np.asarray(res.history)
    windows = h[: h.size // 10 * 10].reshape(-1, 10).mean(axis=1)
    assert np.all(np.diff(windows) <= 1e-9 * (1 + np.abs(windows[1:])))


def test_sampled_subgradient_runs_deterministically():
    prob = random_problem(np.random.default_rng(17), 4, 4)
    params = SolverParams(method="subgradient", sample_size=2, max_outer_iters=50, seed=3)
    r1 = solve_multirank(MultiProblem(prob.instances, prob.locals, prob.global_f, params))
    r2 = solve_multirank(MultiProblem(prob.instances, prob.locals, prob.global_f, params))
    assert r1.history == r2.history
    assert [r.ranking.tolist() for r in r1.results] == [r.ranking.tolist() for r in r2.results]


def test_non_converged_run_reports_gap():
    prob = random_problem(np.random.default_rng(18), 3, 5, max_outer_iters=1, grad_tol=1e-15)
    res = solve_multirank(prob)
    assert not res.converged
    assert res.gap >= 0 and math.isfinite(res.gap)


def test_multi_topk_single_instance_reduces_to_topk():
    rng = np.random.default_rng(19)
    for trial in range(10):
        a, b = rng.lognormal(size=7), rng.lognormal(size=7)
        inst = Instance.with_topk(a, b, 3)
        sets, _ = multi_topk(make_problem([inst], [LOG], ConcaveObjective.quadratic_normalized(1e9, 1e9)), 3)
        items, _ = topk_solve(a, b, 3, LOG)
        f = LOG
        assert f.value(a[sets[0]].sum(), b[sets[0]].sum()) == pytest.approx(
            f.value(a[items].sum(), b[items].sum()), rel=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_multi_topk_exhaustive(seed):
    rng = np.random.default_rng(200 + seed)
    k = 2
    insts = [Instance.with_topk(rng.integers(1, 11, 6).astype(float), rng.integers(1, 11, 6).astype(float), k)
             for _ in range(2)]
    F = quad_for(insts)
    prob = make_problem(insts, [LOG, LOG], F, seed=seed)
    sets, res = multi_topk(prob, k)
    assert res.converged
    for s, r in zip(sets, res.results):
        assert len(s) in (k, k + 1) and (len(s) == k + 1) == (r.aug_index == k - 1)
    sums = [(inst.a[s].sum(), inst.b[s].sum()) for inst, s in zip(insts, sets)]
    value = F.value(sum(x for x, _ in sums), sum(y for _, y in sums)) + sum(LOG.value(*xy) for xy in sums)
    tables = [subset_score_table(inst.a, inst.b, k) for inst in insts]
    opt = brute_multi_topk_opt(tables, [LOG, LOG], F)
    assert value >= opt - 1e-9 * (1 + abs(opt))


def test_multi_topk_aligned():
    insts = [Instance.with_topk([4.0, 1.0, 3.0, 2.0], [4.0, 1.0, 3.0, 2.0], 2),
             Instance.with_topk([1.0, 5.0, 2.0, 6.0], [1.0, 5.0, 2.0, 6.0], 2)]
    sets, _ = multi_topk(make_problem(insts, [LOG, LOG], quad_for(insts)), 2)
    assert [s.tolist() for s in sets] == [[0, 2], [1, 3]]


def test_multi_topk_needs_topk_weights():
    inst = Instance.with_dcg([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        multi_topk(make_problem([inst], [LOG], LOG), 1)


@settings(max_examples=20)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_converged_runs_beat_tuple_oracle(m, n, seed):
    prob = random_problem(np.random.default_rng(seed), m, n, seed=seed % 1000)
    res = solve_multirank(prob)
    if res.converged:
        opt = brute_multi_opt(prob.instances, prob.locals, prob.global_f)
        assert res.objective_value >= opt - 1e-9 * (1 + abs(opt))
