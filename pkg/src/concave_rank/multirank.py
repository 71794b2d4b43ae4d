"""Many ranking instances tied together by a concave objective on their sums.

The combined objective is F(sum of alpha_i, sum of beta_i) + sum f_i(alpha_i,
beta_i).  Its dual has shared prices (p, q) for F and local prices
(p_i, q_i) for each f_i.  For fixed (p, q) every instance is an independent
single-instance problem whose ratio test is shifted by (p, q); the outer loop
minimizes the resulting convex function Phi(p, q) over the positive quadrant.

Phi is differentiable when every f_i is strictly concave: its gradient is
the sum of the instances' relaxed score pairs minus the point where the
gradient of F equals (p, q).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .objective import ConcaveObjective, ObjectiveError
from .rank_core import (
    EPS_REL,
    FixedPoint,
    Instance,
    SolveResult,
    SolverError,
    _finish,
    _single_n,
    best_cumulative_score,
    perturb,
    scores,
    search_fixed_point,
    topk_weights,
)

METHODS = ("newton", "subgradient")


@dataclass(frozen=True)
class SolverParams:
    """Outer-loop settings.

    ``step_scale`` only drives the subgradient method; None means
    1/(1 + |initial gradient|).  ``sample_size`` turns the subgradient method
    into its stochastic variant, estimating the instance sum from a uniform
    subset of that many instances per step.
    """

    max_outer_iters: int = 500
    step_scale: float | None = None
    grad_tol: float = 1e-6
    dual_floor: float = 1e-12
    seed: int = 0
    method: str = "newton"
    sample_size: int | None = None
    eps_rel: float = EPS_REL

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("step_scale must be positive")
        if not self.grad_tol > 0 or not self.dual_floor > 0:
            raise ValueError("grad_tol and dual_floor must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.sample_size is not None:
            if self.sample_size < 1:
                raise ValueError("sample_size must be positive")
            if self.method != "subgradient":
                raise ValueError("sampled steps need method='subgradient'")


@dataclass(frozen=True)
class MultiProblem:
    instances: tuple[Instance, ...]
    locals: tuple[ConcaveObjective, ...]
    global_f: ConcaveObjective
    params: SolverParams = SolverParams()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "locals", tuple(self.locals))
        if not self.instances:
            raise ValueError("need at least one instance")
        if len(self.locals) != len(self.instances):
            raise ValueError(f"{len(self.instances)} instances but {len(self.locals)} local objectives")

    @property
    def m(self) -> int:
        return len(self.instances)


@dataclass
class InnerSolution:
    """Fixed point of one instance at shared prices (p, q)."""

    point: tuple[float, float]  # relaxed score pair
    dual: tuple[float, float]  # (p_i, q_i) = grad f_i(point)
    fixed: FixedPoint | None  # None for single-item instances


@dataclass
class MultiResult:
    results: list[SolveResult]
    global_alpha: float
    global_beta: float
    global_dual: tuple[float, float]
    objective_value: float
    opt_bound: float
    converged: bool = False
    iterations: int = 0
    grad_norm: float = math.inf
    gap: float = math.inf
    history: list[float] = field(default_factory=list, repr=False)


def inner_solve(inst: Instance, f_i: ConcaveObjective, p: float, q: float,
                seed=0) -> InnerSolution:
    """Shifted fixed point: the ratio test uses (q + q_i) / (p + p_i).

    ``inst`` should already be generic (see ``rank_core.perturb``).
    """
    if not (p > 0 and q > 0):
        raise ValueError("shared duals must be positive")
    if inst.n == 1:
        g = scores(inst, np.zeros(1, dtype=np.int64))
        return InnerSolution(g, f_i.grad(*g), None)

    def ratio(g):
        gp, gq = f_i.grad(*g)
        return (q + gq) / (p + gp)

    fp = search_fixed_point(inst, ratio, "randomized", seed)
    return InnerSolution(fp.point, f_i.grad(*fp.point), fp)


def psi(problem: MultiProblem, p: float, q: float, inner_duals, instances=None) -> float:
    """The joint dual at shared (p, q) and per-instance duals (p_i, q_i)."""
    insts = problem.instances if instances is None else instances
    total = problem.global_f.fenchel(-p, -q)
    for inst, f_i, (pi, qi) in zip(insts, problem.locals, inner_duals):
        x = (p + pi) * inst.a + (q + qi) * inst.b
        total += best_cumulative_score(x, inst.w)[0] + f_i.fenchel(-pi, -qi)
    return float(total)


class _Outer:
    """Evaluates Phi and its gradient; caches the perturbed instances."""

    def __init__(self, problem: MultiProblem):
        self.problem = problem
        prm = problem.params
        self.work = [perturb(inst, [prm.seed, i], prm.eps_rel)
                     for i, inst in enumerate(problem.instances)]
        self.evals = 0

    def inner(self, p: float, q: float, subset=None) -> list[InnerSolution | None]:
        idx = range(self.problem.m) if subset is None else subset
        out: list[InnerSolution | None] = [None] * self.problem.m
        for i in idx:
            out[i] = inner_solve(self.work[i], self.problem.locals[i], p, q,
                                 seed=[self.problem.params.seed, i])
        return out

    def global_point(self, p: float, q: float) -> np.ndarray:
        try:
            return np.asarray(self.problem.global_f.inverse_grad(p, q), dtype=float)
        except ObjectiveError as exc:
            raise SolverError(f"gradient of F is not invertible at (p, q) = ({p:.6g}, {q:.6g}): {exc}") from exc

    def evaluate(self, z: np.ndarray):
        """(Phi, gradient, inner solutions) at shared duals z."""
        self.evals += 1
        p, q = float(z[0]), float(z[1])
        sols = self.inner(p, q)
        phi = psi(self.problem, p, q, [s.dual for s in sols], self.work)
        total = np.sum([s.point for s in sols], axis=0)
        return phi, total - self.global_point(p, q), sols

    def sampled_gradient(self, z: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
        m = self.problem.m
        subset = np.sort(rng.choice(m, size=min(size, m), replace=False))
        sols = self.inner(float(z[0]), float(z[1]), subset)
        total = np.sum([sols[i].point for i in subset], axis=0) * (m / subset.size)
        return total - self.global_point(float(z[0]), float(z[1]))


def _start(problem: MultiProblem) -> np.ndarray:
    # prices of F at the best achievable totals
    top = np.zeros(2)
    for inst in problem.instances:
        top += (best_cumulative_score(inst.a, inst.w)[0], best_cumulative_score(inst.b, inst.w)[0])
    try:
        z = np.asarray(problem.global_f.grad(*np.maximum(top, 1e-12)), dtype=float)
    except ObjectiveError:
        z = np.ones(2)
    return np.maximum(z, problem.params.dual_floor)


def _projected_norm(g: np.ndarray, z: np.ndarray, floor: float) -> float:
    # gradient components pushing into an active bound do not count
    g = g.copy()
    g[(z <= floor) & (g > 0)] = 0.0
    return float(np.linalg.norm(g))


def _newton(outer: _Outer, z: np.ndarray, params: SolverParams):
    """Damped Newton in aggregate coordinates.

    The iterate is the aggregate y, with prices z = grad F(y).  The
    optimality residual R(y) = X(grad F(y)) - y (X: summed relaxed points)
    has Jacobian -(I + DX * (-hess F)), never singular, and its Newton step
    descends Phi(grad F(y)).  Searching over y stays well conditioned even
    when F is nearly linear and its inverse gradient is very steep.
    """
    floor = params.dual_floor
    F = outer.problem.global_f

    def at(y):
        try:
            zz = np.maximum(np.asarray(F.grad(*y), dtype=float), floor)
        except ObjectiveError:
            return None
        if not np.all(np.isfinite(zz)):
            return None
        phi_, g_, sols_ = outer.evaluate(zz)
        x = g_ + outer.global_point(*zz)  # summed relaxed points
        return zz, phi_, g_, sols_, x - y

    phi, g, sols = outer.evaluate(z)
    y = g + outer.global_point(*z)  # X(z0): a feasible aggregate
    state = at(y)
    if state is None:
        raise SolverError("aggregate start lies outside the domain of F")
    z, phi, g, sols, res = state
    history = [phi]
    converged = False
    it = 0
    for it in range(1, params.max_outer_iters + 1):
        if _projected_norm(g, z, floor) <= params.grad_tol * (1 + abs(phi)):
            converged = True
            break
        jac = np.empty((2, 2))
        ok = True
        for k in range(2):
            h = 1e-7 * max(abs(y[k]), 1.0)
            e = np.zeros(2)
            e[k] = h
            probe = at(y + e)
            if probe is None:
                probe = at(y - e)
                h = -h
            if probe is None:
                ok = False
                break
            jac[:, k] = (probe[4] - res) / h
        d = None
        if ok:
            try:
                d = -np.linalg.solve(jac, res)
            except np.linalg.LinAlgError:
                d = None
        if d is None or not np.all(np.isfinite(d)):
            d = res.copy()  # relaxation toward X(grad F(y))
        step = 1.0
        accepted = False
        # below this, changes in Phi are rounding; judge steps by the residual
        noise = 1e-13 * (1 + abs(phi))
        r_norm = float(np.linalg.norm(res))
        for _ in range(60):
            y_new = y + step * d
            if np.array_equal(y_new, y):
                break
            cand = at(y_new)
            if cand is not None:
                phi_new, r_new = cand[1], cand[4]
                if phi_new <= phi - noise or (phi_new <= phi + noise
                                              and float(np.linalg.norm(r_new)) < r_norm):
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
        y = y_new
        z, phi, g, sols, res = cand
        history.append(phi)
    else:
        converged = _projected_norm(g, z, floor) <= params.grad_tol * (1 + abs(phi))
    return z, phi, g, sols, converged, it, history


def _subgradient(outer: _Outer, z: np.ndarray, params: SolverParams):
    floor = params.dual_floor
    rng = np.random.default_rng(params.seed)
    phi, g, sols = outer.evaluate(z)
    scale = params.step_scale or 1.0 / (1.0 + float(np.linalg.norm(g)))
    radius = float(np.linalg.norm(z))
    best = (phi, z, g, sols)
    history = [phi]
    converged = False
    it = 0
    for it in range(1, params.max_outer_iters + 1):
        if _projected_norm(g, z, floor) <= params.grad_tol * (1 + abs(phi)):
            converged = True
            break
        step_g = g if params.sample_size is None else outer.sampled_gradient(z, rng, params.sample_size)
        # normalized direction, length in units of the starting prices, so
        # the huge gradients near the axes cannot throw the iterate away
        length = scale * radius / math.sqrt(it)
        z = np.maximum(z - length * step_g / max(float(np.linalg.norm(step_g)), 1e-300), floor)
        phi, g, sols = outer.evaluate(z)
        history.append(phi)
        if phi < best[0]:
            best = (phi, z, g, sols)
    else:
        converged = _projected_norm(g, z, floor) <= params.grad_tol * (1 + abs(phi))
    if not converged:
        phi, z, g, sols = best
    return z, phi, g, sols, converged, it, history


def solve_multirank(problem: MultiProblem) -> MultiResult:
    """Shared duals by outer descent, then one augmented ranking per instance."""
    params = problem.params
    outer = _Outer(problem)
    z0 = _start(problem)
    run = _newton if params.method == "newton" else _subgradient
    z, _, g, sols, converged, iters, history = run(outer, z0, params)
    p, q = float(z[0]), float(z[1])

    results = []
    for inst, f_i, sol in zip(problem.instances, problem.locals, sols):
        if sol.fixed is None:
            results.append(_single_n(inst, f_i))
        else:
            results.append(_finish(inst, f_i, sol.fixed, sol.dual))
    ga = float(sum(r.alpha for r in results))
    gb = float(sum(r.beta for r in results))
    value = problem.global_f.value(ga, gb) + sum(f_i.value(r.alpha, r.beta)
                                                 for f_i, r in zip(problem.locals, results))
    bound = psi(problem, p, q, [s.dual for s in sols])
    relaxed = np.sum([r.relaxed for r in results], axis=0)
    relaxed_value = problem.global_f.value(*relaxed) + sum(
        f_i.value(*r.relaxed) for f_i, r in zip(problem.locals, results))
    return MultiResult(results, ga, gb, (p, q), float(value), bound, converged, iters,
                       float(np.linalg.norm(g)), float(bound - relaxed_value), history)


def multi_topk(problem: MultiProblem, k: int) -> tuple[list[np.ndarray], MultiResult]:
    """Per-instance item sets of size k or k+1 under shared duals."""
    for inst in problem.instances:
        if not 1 <= k <= inst.n:
            raise ValueError(f"k={k} out of range [1, {inst.n}]")
        if not np.array_equal(inst.w, topk_weights(inst.n, k)):
            raise ValueError("multi_topk needs top-k weights (k ones, then zeros)")
    res = solve_multirank(problem)
    sets = []
    for r in res.results:
        size = k + 1 if r.aug_index == k - 1 else k
        sets.append(np.sort(r.ranking[:size]))
    return sets, res


def make_problem(instances: Sequence[Instance], locals_: Sequence[ConcaveObjective],
                 global_f: ConcaveObjective, **params) -> MultiProblem:
    return MultiProblem(tuple(instances), tuple(locals_), global_f, SolverParams(**params))
