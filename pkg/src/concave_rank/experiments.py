"""Synthetic experiments: NDCG spread under different combiners, and an
ad-ranking stand-in with position constraints.

Gaussian draws use numpy's PCG64 generator and its ziggurat normal sampler;
correlated log-scores come from a Cholesky factor of the covariance (an
eigendecomposition factor when the covariance is singular).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .objective import ConcaveObjective
from .rank_core import (
    Instance,
    best_cumulative_score,
    cumulative_score,
    dcg_weights,
    solve_rank,
)

DEFAULT_COV = ((0.2, -0.16), (-0.16, 0.2))
COMBINERS = ("LogProduct", "LinearSum", "NormalizedSum", "QuadraticNormalized")
GRID = np.round(np.arange(101) * 0.01, 2)

POINTS_HEADER = ("instance_id", "combiner", "ndcg_a", "ndcg_b")
SUMMARY_HEADER = ("combiner", "component", "mean", "std") + tuple(f"d{k}" for k in range(1, 10))
AD_POSITIONS_HEADER = ("position", "count", "combiner")


class ConstraintInfeasible(ValueError):
    pass


# -- synthetic data ------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    m: int = 500
    n: int = 50
    cov: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_COV
    weight_depth: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cov", tuple(tuple(float(x) for x in row) for row in self.cov))
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")
        if not 1 <= self.weight_depth <= self.n:
            raise ValueError(f"weight_depth must lie in [1, n={self.n}]")
        _cov_factor(self.cov)


def _cov_factor(cov) -> np.ndarray:
    c = np.asarray(cov, dtype=float)
    if c.shape != (2, 2) or not np.all(np.isfinite(c)):
        raise ValueError("cov must be a finite 2x2 matrix")
    if not np.allclose(c, c.T, rtol=0, atol=1e-12):
        raise ValueError("cov must be symmetric")
    try:
        return np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(c)
        if vals.min() < -1e-12 * max(1.0, abs(vals).max()):
            raise ValueError(f"cov is not positive semidefinite (eigenvalues {vals})") from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gen_lognormal(cfg: SynthConfig) -> list[Instance]:
    """m instances of n items with (log a, log b) ~ N(0, cov)."""
    rng = np.random.default_rng(cfg.seed)
    z = rng.standard_normal((cfg.m, cfg.n, 2))
    x = z @ _cov_factor(cfg.cov).T
    w = dcg_weights(cfg.n, cfg.weight_depth)
    return [Instance(np.exp(x[i, :, 0]), np.exp(x[i, :, 1]), w) for i in range(cfg.m)]


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class NdcgPoint:
    ndcg_a: float
    ndcg_b: float


def _ndcg(x, w, pi) -> float:
    best = best_cumulative_score(x, w)[0]
    if not best > 0:
        raise ValueError("zero normalizer: the best cumulative score is not positive")
    return cumulative_score(x, w, pi) / best


def ndcg(inst: Instance, pi) -> NdcgPoint:
    """Cumulative scores of ``pi`` relative to the best ranking for each objective."""
    return NdcgPoint(_ndcg(inst.a, inst.w, pi), _ndcg(inst.b, inst.w, pi))


def deciles(values) -> np.ndarray:
    """The 9 deciles as order statistics: the ceil(k*N/10)-th smallest value."""
    return np.quantile(np.asarray(values, dtype=float), np.arange(1, 10) / 10, method="inverted_cdf")


def empirical_cdf(values, grid=GRID) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float))
    return np.searchsorted(v, grid, side="right") / v.size


@dataclass
class ComponentSummary:
    mean: float
    std: float
    deciles: np.ndarray
    cdf: np.ndarray = field(repr=False)


def summarize(points: Sequence[NdcgPoint]) -> dict[str, ComponentSummary]:
    """Mean, population std, deciles and CDF (0.01 grid) per component."""
    if len(points) == 0:
        raise ValueError("cannot summarize an empty point set")
    out = {}
    for comp in ("a", "b"):
        v = np.array([getattr(p, f"ndcg_{comp}") for p in points], dtype=float)
        out[comp] = ComponentSummary(float(v.mean()), float(v.std()), deciles(v), empirical_cdf(v))
    return out


# -- synthetic experiment ------------------------------------------------------


def combiner_for(name: str, inst: Instance) -> ConcaveObjective:
    """One of the four combiners; normalized kinds use the instance's best scores."""
    if name == "LogProduct":
        return ConcaveObjective.log_product()
    if name == "LinearSum":
        return ConcaveObjective.linear_sum(1.0, 1.0)
    s_a = best_cumulative_score(inst.a, inst.w)[0]
    s_b = best_cumulative_score(inst.b, inst.w)[0]
    if name == "NormalizedSum":
        return ConcaveObjective.normalized_sum(s_a, s_b)
    if name == "QuadraticNormalized":
        return ConcaveObjective.quadratic_normalized(s_a, s_b)
    raise ValueError(f"unknown combiner {name!r}; choose from {COMBINERS}")


@dataclass
class SynthReport:
    config: SynthConfig
    combiners: tuple[str, ...]
    points: dict[str, list[NdcgPoint]]
    summary: dict[str, dict[str, ComponentSummary]]

    def point_rows(self) -> list[tuple]:
        rows = []
        for name in self.combiners:
            for i, p in enumerate(self.points[name]):
                rows.append((i + 1, name, p.ndcg_a, p.ndcg_b))
        return rows

    def summary_rows(self) -> list[tuple]:
        rows = []
        for name in self.combiners:
            for comp in ("a", "b"):
                s = self.summary[name][comp]
                rows.append((name, comp, s.mean, s.std, *s.deciles.tolist()))
        return rows

    def min_component_deciles(self, name: str) -> np.ndarray:
        return deciles([min(p.ndcg_a, p.ndcg_b) for p in self.points[name]])


def run_synth_experiment(cfg: SynthConfig = SynthConfig(),
                         combiners: Iterable[str] = COMBINERS) -> SynthReport:
    """Solve every instance under every combiner and collect NDCG points."""
    combiners = tuple(combiners)
    for name in combiners:
        if name not in COMBINERS:
            raise ValueError(f"unknown combiner {name!r}; choose from {COMBINERS}")
    instances = gen_lognormal(cfg)
    points: dict[str, list[NdcgPoint]] = {}
    for name in combiners:
        pts = []
        for i, inst in enumerate(instances):
            res = solve_rank(inst, combiner_for(name, inst), seed=cfg.seed + i)
            pts.append(ndcg(inst, res.ranking))
        points[name] = pts
    summary = {name: summarize(points[name]) for name in combiners}
    return SynthReport(cfg, combiners, points, summary)


# -- ad-ranking stand-in -------------------------------------------------------


@dataclass(frozen=True)
class AdInstance:
    relevance: np.ndarray
    revenue: np.ndarray
    is_ad: np.ndarray

    def __post_init__(self):
        rel = np.asarray(self.relevance, dtype=float)
        rev = np.asarray(self.revenue, dtype=float)
        ad = np.asarray(self.is_ad, dtype=bool)
        if not rel.shape == rev.shape == ad.shape or rel.ndim != 1:
            raise ValueError("relevance, revenue and is_ad must be equal-length vectors")
        if np.any(rev[~ad] != 0):
            raise ValueError("organic items must have zero revenue")
        for name, v in (("relevance", rel), ("revenue", rev), ("is_ad", ad)):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.relevance.size


MAX_ADS_TOP = 4
TOP = 10


def constrained_rerank(inst: AdInstance, combined_score) -> np.ndarray:
    """Sort by score, keep an organic item first and at most 4 ads in the top 10.

    Ads ahead of the best organic item slide down one place; ads beyond the
    fourth within the top 10 move, in order, to just below position 10.
    """
    score = np.asarray(combined_score, dtype=float)
    if score.shape != inst.relevance.shape:
        raise ValueError("score length does not match the instance")
    order = list(np.argsort(-score, kind="stable"))
    ad = inst.is_ad
    organic = [k for k, i in enumerate(order) if not ad[i]]
    if not organic:
        raise ConstraintInfeasible("no organic item can take position 1")
    if organic[0] > 0:
        order.insert(0, order.pop(organic[0]))
    top = min(TOP, inst.n)
    if int(np.count_nonzero(~ad)) < top - MAX_ADS_TOP:
        raise ConstraintInfeasible("too few organic items to keep 4 ads in the top 10")
    kept, demoted, rest = [], [], []
    ads_top = 0
    for i in order:
        if len(kept) < top:
            if ad[i]:
                if ads_top == MAX_ADS_TOP:
                    demoted.append(i)
                    continue
                ads_top += 1
            kept.append(i)
        else:
            rest.append(i)
    return np.array(kept + demoted + rest, dtype=np.int64)


def violations(inst: AdInstance, ranking) -> list[str]:
    ranking = np.asarray(ranking)
    out = []
    if inst.is_ad[ranking[0]]:
        out.append("ad at position 1")
    if np.count_nonzero(inst.is_ad[ranking[:TOP]]) > MAX_ADS_TOP:
        out.append("more than 4 ads in the top 10")
    return out


@dataclass(frozen=True)
class AdConfig:
    m: int = 300
    n: int = 20
    ad_fraction: float = 0.3
    depth: int = 10
    seed: int = 0
    # relevance and revenue are lognormal; ads are less relevant on average
    organic_rel_mu: float = 0.0
    ad_rel_mu: float = -1.0
    rel_sigma: float = 0.6
    rev_sigma: float = 1.0
    revenue_share: float = 0.8  # target, as a share of the revenue-only total
    c1_grid: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0)
    rev_tol: float = 0.005

    def __post_init__(self):
        if self.m < 1 or self.n < 2:
            raise ValueError("need m >= 1 and n >= 2")
        if not 0 < self.ad_fraction < 1:
            raise ValueError("ad_fraction must lie in (0, 1)")
        if not 0 < self.revenue_share < 1:
            raise ValueError("revenue_share must lie in (0, 1)")


def gen_ads(cfg: AdConfig) -> list[AdInstance]:
    """Ad/organic mixes with at least one organic item and at most half ads."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    for _ in range(cfg.m):
        n_ads = int(np.clip(rng.binomial(cfg.n, cfg.ad_fraction), 0, cfg.n // 2))
        is_ad = np.zeros(cfg.n, dtype=bool)
        is_ad[rng.choice(cfg.n, n_ads, replace=False)] = True
        mu = np.where(is_ad, cfg.ad_rel_mu, cfg.organic_rel_mu)
        rel = np.exp(mu + cfg.rel_sigma * rng.standard_normal(cfg.n))
        rev = np.where(is_ad, np.exp(cfg.rev_sigma * rng.standard_normal(cfg.n)), 0.0)
        out.append(AdInstance(rel, rev, is_ad))
    return out


@dataclass
class AdOutcome:
    combiner: str
    params: dict
    revenue: float
    relevance_ndcg: np.ndarray = field(repr=False)
    rankings: list[np.ndarray] = field(repr=False)

    @property
    def bottom_quartile(self) -> float:
        """25th percentile (order statistic) of relevance NDCG."""
        return float(np.quantile(self.relevance_ndcg, 0.25, method="inverted_cdf"))

    def ad_positions(self, ads: Sequence[AdInstance], depth: int = TOP) -> np.ndarray:
        counts = np.zeros(depth, dtype=np.int64)
        for inst, r in zip(ads, self.rankings):
            top = inst.is_ad[r[:depth]]
            counts[: top.size] += top
        return counts


class _AdRunner:
    def __init__(self, ads: Sequence[AdInstance], cfg: AdConfig):
        self.ads = ads
        self.cfg = cfg
        self.w = dcg_weights(cfg.n, min(cfg.depth, cfg.n))
        self.best_rel = np.array([best_cumulative_score(x.relevance, self.w)[0] for x in ads])
        self.instances = [Instance(x.revenue, x.relevance, self.w) for x in ads]

    def evaluate(self, name: str, params: dict, rankings) -> AdOutcome:
        rev = sum(cumulative_score(x.revenue, self.w, r) for x, r in zip(self.ads, rankings))
        rel = np.array([cumulative_score(x.relevance, self.w, r) for x, r in zip(self.ads, rankings)])
        return AdOutcome(name, dict(params), float(rev), rel / self.best_rel, list(rankings))

    def linear(self, c3: float) -> AdOutcome:
        ranks = [constrained_rerank(x, x.revenue + c3 / s * x.relevance)
                 for x, s in zip(self.ads, self.best_rel)]
        return self.evaluate("LinearSum", {"c3": c3}, ranks)

    def exp_penalty(self, c1: float, c2: float) -> AdOutcome:
        ranks = []
        for i, (x, inst, s) in enumerate(zip(self.ads, self.instances, self.best_rel)):
            res = solve_rank(inst, ConcaveObjective.exp_penalty(c1, c2, s), seed=self.cfg.seed + i)
            # the solver's order is the sort of revenue + lambda*relevance at its dual ratio
            ranks.append(constrained_rerank(x, x.revenue + res.lambda_star * x.relevance))
        return self.evaluate("ExpPenalty", {"c1": c1, "c2": c2}, ranks)

    def revenue_only(self) -> float:
        ranks = [constrained_rerank(x, x.revenue + 1e-12 * x.relevance) for x in self.ads]
        return self.evaluate("RevenueOnly", {}, ranks).revenue


def _tune(run, target: float, lo: float, hi: float, increasing: bool, tol: float,
          iters: int = 60):
    """Bisect a log-scale parameter until run(x).revenue is within tol of target."""
    best = None
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        out = run(mid)
        err = (out.revenue - target) / target
        if best is None or abs(err) < abs(best[1]):
            best = (out, err)
        if abs(err) <= tol:
            break
        if (err < 0) == increasing:
            lo = mid
        else:
            hi = mid
    return best[0]


def _tune_additive(runner: _AdRunner, target: float, tol: float) -> AdOutcome:
    # revenue falls as c3 rises
    return _tune(runner.linear, target, 1e-6, 1e6, increasing=False, tol=tol)


def _tune_exp(runner: _AdRunner, c1: float, target: float, tol: float) -> AdOutcome:
    # a larger c2 shrinks the relevance penalty, so revenue rises with exp(c2);
    # c2 is searched as log of a positive scale
    def run(scale):
        return runner.exp_penalty(c1, math.log(scale))

    return _tune(run, target, 1e-12, 1e12, increasing=True, tol=tol)


@dataclass
class AdReport:
    config: AdConfig
    target: float
    linear: AdOutcome
    exp: AdOutcome
    candidates: list[AdOutcome] = field(repr=False)
    ads: list[AdInstance] = field(repr=False)

    def position_rows(self) -> list[tuple]:
        rows = []
        for out in (self.exp, self.linear):
            for pos, count in enumerate(out.ad_positions(self.ads), start=1):
                rows.append((pos, int(count), out.combiner))
        return rows


def run_ad_experiment(cfg: AdConfig = AdConfig()) -> AdReport:
    """Tune both combiners to one revenue target; pick c1 for the bottom quartile."""
    ads = gen_ads(cfg)
    runner = _AdRunner(ads, cfg)
    target = cfg.revenue_share * runner.revenue_only()
    linear = _tune_additive(runner, target, cfg.rev_tol)
    candidates = [_tune_exp(runner, c1, target, cfg.rev_tol) for c1 in cfg.c1_grid]
    on_target = [c for c in candidates if abs(c.revenue - target) <= cfg.rev_tol * target] or candidates
    exp = max(on_target, key=lambda c: c.bottom_quartile)  # first wins ties
    return AdReport(cfg, target, linear, exp, candidates, ads)


# -- CSV output ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write atomically: a temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    os.replace(tmp, path)


def write_synth_csvs(report: SynthReport, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [outdir / "points.csv", outdir / "summary.csv"]
    write_csv(paths[0], POINTS_HEADER, report.point_rows())
    write_csv(paths[1], SUMMARY_HEADER, report.summary_rows())
    return paths


def write_ad_positions(report: AdReport, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "ad_positions.csv"
    write_csv(path, AD_POSITIONS_HEADER, report.position_rows())
    return path
