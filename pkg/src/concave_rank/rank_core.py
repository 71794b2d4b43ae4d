"""Single-instance ranking under a concave combination of two cumulative scores.

The solver searches the ratio ``lam = q/p`` of the dual prices.  For every
``lam`` the descending sort of ``a + lam*b`` is the ranking optimal for the
linear objective ``p*a + q*b``; sort orders only change at critical ratios
where two items tie.  Each order ``sigma`` owns an interval of ``lam`` and a
score pair ``g = (cs(a, sigma), cs(b, sigma))``.  Comparing the gradient
direction of ``f`` at ``g`` with that interval tells which way the dual
optimum lies.  The search ends either inside one interval (the order is
optimal) or on a single critical ratio shared by two orders that differ by
one adjacent swap, in which case promoting one weight by one position makes
either order at least as good as the optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .inversions import InversionProfile, crossing, list_permutation_inversions, sort_order
from .objective import ConcaveObjective, DomainError

EPS_REL = 1e-9
MAX_SECANT = 3  # secant probes between random crossings
MU_TOL = 1e-12
MU_MAX_ITER = 200


class SolverError(RuntimeError):
    pass


class GenericityError(SolverError):
    """Several pairs tie at one critical ratio; perturb the instance."""


# -- instances and scores ------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    """Scores ``a``, ``b`` and non-increasing position weights ``w``."""

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        w = np.array(self.w, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("need at least one item")
        if not (a.shape == b.shape == w.shape):
            raise ValueError(f"length mismatch: a={a.size}, b={b.size}, w={w.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(w))):
            raise ValueError("entries must be finite")
        if np.any(np.diff(w) > 0) or w[-1] < 0:
            raise ValueError("weights must be non-increasing and non-negative")
        for name, arr in (("a", a), ("b", b), ("w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.a.size

    @classmethod
    def with_dcg(cls, a, b, depth: int | None = None) -> "Instance":
        return cls(a, b, dcg_weights(len(a), depth))

    @classmethod
    def with_topk(cls, a, b, k: int) -> "Instance":
        return cls(a, b, topk_weights(len(a), k))

    def is_integral(self) -> bool:
        return bool(np.all(self.a == np.round(self.a)) and np.all(self.b == np.round(self.b)))


def dcg_weights(n: int, depth: int | None = None) -> np.ndarray:
    """1/log2(i+1) for positions i = 1..n, zero past ``depth``."""
    w = 1.0 / np.log2(np.arange(2, n + 2))
    if depth is not None:
        w[depth:] = 0.0
    return w


def topk_weights(n: int, k: int) -> np.ndarray:
    w = np.zeros(n)
    w[:k] = 1.0
    return w


def cumulative_score(x, w, pi) -> float:
    """sum_j w_j * x[pi[j]]."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    pi = np.asarray(pi)
    if not (x.shape == w.shape == pi.shape):
        raise ValueError("length mismatch")
    return float(w @ x[pi])


def best_cumulative_score(x, w) -> tuple[float, np.ndarray]:
    """Max over rankings: sort descending (stable by index)."""
    x = np.asarray(x, dtype=float)
    pi = np.argsort(-x, kind="stable")
    return cumulative_score(x, w, pi), pi


def scores(inst: Instance, pi, w=None) -> tuple[float, float]:
    w = inst.w if w is None else w
    return float(w @ inst.a[pi]), float(w @ inst.b[pi])


def augmented_weights(w: np.ndarray, t: int) -> np.ndarray:
    """Copy of ``w`` with ``w[t+1]`` raised to ``w[t]`` (0-based positions)."""
    wp = np.array(w, dtype=float)
    wp[t + 1] = wp[t]
    return wp


def perturb(inst: Instance, seed: int, eps_rel: float = EPS_REL) -> Instance:
    """Seeded tiny noise making scores, weights and crossings generic.

    Scores get non-negative noise up to ``eps_rel * (1 + max|entry|)``;
    weights get a strictly decreasing bump from ``eps_rel`` down to
    ``eps_rel/n``, so the result is strictly decreasing and positive.
    """
    if eps_rel == 0:
        return inst
    if eps_rel < 0:
        raise ValueError("eps_rel must be non-negative")
    rng = np.random.default_rng(seed)
    n = inst.n
    ua = rng.random(n)
    ub = rng.random(n)
    a = inst.a + eps_rel * (1 + np.max(np.abs(inst.a))) * ua
    b = inst.b + eps_rel * (1 + np.max(np.abs(inst.b))) * ub
    w = inst.w + eps_rel * np.arange(n, 0, -1) / n
    return Instance(a, b, w)


# -- regions of the dual ratio -------------------------------------------------


@dataclass(frozen=True)
class CriticalCursor:
    """The ratio interval on which ``sigma`` is the descending order of a + lam*b.

    ``lo_pos``/``hi_pos`` are the positions of the adjacent pairs in ``sigma``
    whose crossings bound the interval (None at 0 / +inf).
    """

    lambda_lo: float
    lambda_hi: float
    sigma: np.ndarray
    g: tuple[float, float]
    lo_pos: int | None = None
    hi_pos: int | None = None


def region_of(inst: Instance, sigma: np.ndarray) -> CriticalCursor:
    """Interval of ratios for which ``sigma`` sorts a + lam*b descending.

    Only adjacent pairs matter: the pair above/below constraints intersect to
    the full set of pairwise constraints by transitivity.
    """
    lo, lo_pos, hi, hi_pos, ga, gb = _scan_region(sigma, inst.a, inst.b, inst.w)
    lo_pos = None if lo_pos < 0 else int(lo_pos)
    hi_pos = None if hi_pos < 0 else int(hi_pos)
    g = (float(ga), float(gb))
    return CriticalCursor(lo, hi, sigma, g, lo_pos, hi_pos)


@njit(cache=True)
def _scan_region(sigma, a, b, w):
    # one pass over adjacent pairs: tightest crossing behind (db < 0, positive)
    # and ahead (db > 0), first position on ties; plus the score pair
    n = sigma.shape[0]
    lo, lo_pos = 0.0, -1
    hi, hi_pos = math.inf, -1
    best_lo = -math.inf
    ga = w[0] * a[sigma[0]]
    gb = w[0] * b[sigma[0]]
    for k in range(n - 1):
        u = sigma[k]
        v = sigma[k + 1]
        ga += w[k + 1] * a[v]
        gb += w[k + 1] * b[v]
        db = b[v] - b[u]
        if db < 0:
            c = (a[u] - a[v]) / db
            if c > best_lo:
                best_lo = c
                if c > 0:
                    lo, lo_pos = c, k
        elif db > 0:
            c = (a[u] - a[v]) / db
            if hi_pos < 0 or c < hi:
                hi, hi_pos = c, k
    return lo, lo_pos, hi, hi_pos, ga, gb


@njit(cache=True)
def _find_two(sigma, x, y):
    px = py = -1
    for p in range(sigma.shape[0]):
        if sigma[p] == x:
            px = p
        elif sigma[p] == y:
            py = p
    return px, py


def next_critical(inst: Instance, lam: float, side: str = "right") -> CriticalCursor:
    """The region containing ``lam``; at a critical value, the one to its right."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return region_of(inst, sort_order(inst.a, inst.b, lam, side))


def _classify(rho: float, cur: CriticalCursor) -> int:
    # closed interval: the rays bounding a region count as inside
    if rho > cur.lambda_hi:
        return 1
    if rho < cur.lambda_lo:
        return -1
    return 0


def phi(cursor: CriticalCursor, f: ConcaveObjective) -> int:
    """+1 / -1 when the gradient of f at the region's scores points to larger /
    smaller ratios than the region covers, 0 when it falls inside."""
    return _classify(f.grad_ratio(*cursor.g), cursor)


def _swapped(sigma: np.ndarray, t: int) -> np.ndarray:
    s = sigma.copy()
    s[t], s[t + 1] = s[t + 1], s[t]
    return s


def _adjacent(lo: CriticalCursor, hi: CriticalCursor) -> bool:
    t = lo.hi_pos
    if t is None or hi.lo_pos != t or lo.lambda_hi != hi.lambda_lo:
        return False
    return bool(np.array_equal(_swapped(lo.sigma, t), hi.sigma))


def adjacent_transposition(s1, s2) -> int | None:
    """Position t when s2 is s1 with entries t and t+1 swapped, else None."""
    s1 = np.asarray(s1)
    s2 = np.asarray(s2)
    diff = np.flatnonzero(s1 != s2)
    if diff.size == 2 and diff[1] == diff[0] + 1:
        t = int(diff[0])
        if s1[t] == s2[t + 1] and s1[t + 1] == s2[t]:
            return t
    return None


# -- fixed-point search --------------------------------------------------------


@dataclass
class FixedPoint:
    """Where the search stopped: one region, or one critical ray between two."""

    lo: CriticalCursor
    hi: CriticalCursor | None = None
    mu: float | None = None
    point: tuple[float, float] = (0.0, 0.0)
    probes: int = 0

    @property
    def on_ray(self) -> bool:
        return self.hi is not None

    @property
    def t(self) -> int | None:
        return self.lo.hi_pos if self.on_ray else None

    @property
    def ray(self) -> float | None:
        return self.lo.lambda_hi if self.on_ray else None


class _Search:
    def __init__(self, inst: Instance, ratio: Callable[[tuple[float, float]], float]):
        self.inst = inst
        self.ratio = ratio
        self.probes = 0

    def cursor(self, lam: float) -> CriticalCursor:
        self.probes += 1
        return next_critical(self.inst, lam)

    def right_of(self, lam: float, i: int, j: int) -> CriticalCursor:
        """Region starting at the crossing ``lam`` of items i and j."""
        self.probes += 1
        a, b = self.inst.a, self.inst.b
        sigma = sort_order(a, b, lam, "right")
        up, down = (i, j) if b[i] > b[j] else (j, i)
        p_up, p_down = _find_two(sigma, up, down)
        if p_up == p_down + 1:
            sigma = _swapped(sigma, int(p_down))
        return region_of(self.inst, sigma)

    def phi(self, cur: CriticalCursor) -> int:
        return _classify(self.ratio(cur.g), cur)

    def region(self, cur: CriticalCursor) -> FixedPoint:
        return FixedPoint(cur, point=cur.g, probes=self.probes)

    def tie(self, lo: CriticalCursor, hi: CriticalCursor) -> FixedPoint:
        mu, point = mix_on_ray(self.ratio, lo.g, hi.g, lo.lambda_hi)
        return FixedPoint(lo, hi, mu, point, self.probes)

    def endpoints(self):
        """Regions at 0 and +inf.  Returns a FixedPoint if one already fits."""
        lo = self.cursor(0.0)
        s = self.phi(lo)
        if s == 0:
            return self.region(lo)
        hi = self.cursor(math.inf)
        s_hi = self.phi(hi)
        if s_hi == 0:
            return self.region(hi)
        if s != 1 or s_hi != -1:
            raise SolverError("gradient ratio left the positive quadrant")
        return lo, hi

    def enumerate_finish(self, lo: CriticalCursor, hi: CriticalCursor,
                         count: int | None = None) -> FixedPoint:
        """List every critical ratio between lo and hi and bisect over them."""
        pos_hi = np.empty_like(hi.sigma)
        pos_hi[hi.sigma] = np.arange(hi.sigma.size)
        pairs = list_permutation_inversions(lo.sigma, pos_hi[lo.sigma], count)
        a, b = self.inst.a, self.inst.b
        cross = crossing(a, b, pairs[:, 0], pairs[:, 1])
        fp = self._sweep_finish(lo, hi, pairs, cross)
        if fp is not None:
            return fp
        vals = np.unique(cross)
        left, right = 0, vals.size
        while right - left > 1:
            mid = (left + right) // 2
            cur = self.cursor(0.5 * (vals[mid - 1] + vals[mid]))
            s = self.phi(cur)
            if s == 0:
                return self.region(cur)
            if s > 0:
                left, lo = mid, cur
            else:
                right, hi = mid, cur
        if not _adjacent(lo, hi):
            raise GenericityError(
                "orders on both sides of a critical ratio differ by more than one "
                "adjacent swap; perturb the instance"
            )
        return self.tie(lo, hi)

    def _sweep_finish(self, lo, hi, pairs, cross) -> FixedPoint | None:
        """Bisect over regions whose scores come from replaying the swaps.

        With every crossing in the window listed, walking them in ratio order
        is a sequence of adjacent swaps starting from lo's order, so each
        region's score pair is a running sum and no probe needs a sort.
        Returns None when the replay meets a non-adjacent swap (ties or
        rounding that misorders crossings); the caller then probes directly.
        """
        inst = self.inst
        order = np.argsort(cross, kind="stable")
        cross = cross[order]
        pi = np.ascontiguousarray(pairs[order, 0])
        pj = np.ascontiguousarray(pairs[order, 1])
        ga, gb, ok = _replay_scores(lo.sigma, pi, pj, inst.w, inst.a, inst.b)
        if not ok:
            return None
        # cross is sorted: distinct values start where it steps up
        first = np.flatnonzero(np.concatenate(([True], cross[1:] != cross[:-1])))
        vals = cross[first]
        # region r holds after the first `ends[r]` swaps
        ends = np.append(first, cross.size)
        bounds = np.concatenate(([lo.lambda_lo], vals, [hi.lambda_hi]))

        def classify(r: int) -> int:
            self.probes += 1
            k = ends[r]
            g = (float(ga[k]), float(gb[k]))
            rho = self.ratio(g)
            if rho > bounds[r + 1]:
                return 1
            if rho < bounds[r]:
                return -1
            return 0

        def cursor_at(r: int) -> CriticalCursor:
            return region_of(inst, _replay_order(lo.sigma, pi, pj, ends[r]))

        left, right = 0, vals.size
        while right - left > 1:
            mid = (left + right) // 2
            s = classify(mid)
            if s == 0:
                cur = cursor_at(mid)
                return self.region(cur) if self.phi(cur) == 0 else None
            if s > 0:
                left = mid
            else:
                right = mid
        c_lo = lo if left == 0 else cursor_at(left)
        c_hi = hi if right == vals.size else cursor_at(right)
        if self.phi(c_lo) != 1 or self.phi(c_hi) != -1 or not _adjacent(c_lo, c_hi):
            return None
        return self.tie(c_lo, c_hi)

    def run_integer(self, bound: int) -> FixedPoint:
        start = self.endpoints()
        if isinstance(start, FixedPoint):
            return start
        # every crossing is below 2B + 1, so the region at +inf covers it
        lo, hi = start
        lam_lo, lam_hi = 0.0, 2.0 * bound + 1.0
        gap = 1.0 / (8.0 * bound * bound)
        while lam_hi - lam_lo >= gap and not _adjacent(lo, hi):
            mid = 0.5 * (lam_lo + lam_hi)
            cur = self.cursor(mid)
            s = self.phi(cur)
            if s == 0:
                return self.region(cur)
            if s > 0:
                lam_lo, lo = mid, cur
            else:
                lam_hi, hi = mid, cur
        if _adjacent(lo, hi):
            return self.tie(lo, hi)
        # perturbation splits tied integer crossings into tight clusters
        return self.enumerate_finish(lo, hi)

    def interpolate(self, lo: CriticalCursor, hi: CriticalCursor) -> CriticalCursor | None:
        """Probe at the secant root of rho(g) - lambda across the bracket.

        Only the gradient ratio at the two bracket regions is needed, so this
        costs one sort and no inversion profile.  None when the bracket is
        unbounded or degenerate.
        """
        x_lo, x_hi = lo.lambda_hi, hi.lambda_lo
        if not (x_lo < x_hi and math.isfinite(x_hi)):
            return None
        h_lo = self.ratio(lo.g) - x_lo  # > 0 while lo points right
        h_hi = self.ratio(hi.g) - x_hi  # < 0 while hi points left
        lam = x_lo + h_lo * (x_hi - x_lo) / (h_lo - h_hi)
        if not x_lo < lam < x_hi:
            return None
        return self.cursor(lam)

    def run_randomized(self, rng: np.random.Generator, enum_threshold: int) -> FixedPoint:
        start = self.endpoints()
        if isinstance(start, FixedPoint):
            return start
        lo, hi = start
        a, b = self.inst.a, self.inst.b
        n = self.inst.n
        # secant probes converge fast once rho(g) is smooth on the scale of
        # the bracket (large n); a random crossing after at most MAX_SECANT of
        # them, or after one that fails to halve the bracket, keeps the
        # expected halving of the inversion count
        secant_run = 0
        while True:
            if _adjacent(lo, hi):
                return self.tie(lo, hi)
            cur = None
            if secant_run < MAX_SECANT:
                width = hi.lambda_lo - lo.lambda_hi
                cur = self.interpolate(lo, hi)
            if cur is not None:
                secant_run += 1
            else:
                secant_run = 0
                pos_hi = np.empty_like(hi.sigma)
                pos_hi[hi.sigma] = np.arange(n)
                # items in lo's order, keyed by their position in hi's order
                tree = InversionProfile.from_permutations(lo.sigma, pos_hi[lo.sigma])
                if tree.count <= enum_threshold:
                    return self.enumerate_finish(lo, hi, tree.count)
                i, j = tree.sample(rng)
                cur = self.right_of(float(crossing(a, b, i, j)), i, j)
            s = self.phi(cur)
            if s == 0:
                return self.region(cur)
            if s > 0:
                lo = cur
            else:
                hi = cur
            if secant_run and not hi.lambda_lo - lo.lambda_hi <= 0.5 * width:
                secant_run = MAX_SECANT


@njit(cache=True)
def _replay_scores(sigma, pi, pj, w, a, b):
    n = sigma.shape[0]
    k_total = pi.shape[0]
    order = sigma.copy()
    pos = np.empty(n, dtype=np.int64)
    for p in range(n):
        pos[order[p]] = p
    ga = np.empty(k_total + 1)
    gb = np.empty(k_total + 1)
    sa = 0.0
    sb = 0.0
    for p in range(n):
        sa += w[p] * a[order[p]]
        sb += w[p] * b[order[p]]
    ga[0] = sa
    gb[0] = sb
    for k in range(k_total):
        p = min(pos[pi[k]], pos[pj[k]])
        if max(pos[pi[k]], pos[pj[k]]) != p + 1:
            return ga, gb, False
        u = order[p]
        v = order[p + 1]
        dw = w[p] - w[p + 1]
        sa += dw * (a[v] - a[u])
        sb += dw * (b[v] - b[u])
        order[p] = v
        order[p + 1] = u
        pos[v] = p
        pos[u] = p + 1
        ga[k + 1] = sa
        gb[k + 1] = sb
    return ga, gb, True


@njit(cache=True)
def _replay_order(sigma, pi, pj, upto):
    n = sigma.shape[0]
    order = sigma.copy()
    pos = np.empty(n, dtype=np.int64)
    for p in range(n):
        pos[order[p]] = p
    for k in range(upto):
        p = min(pos[pi[k]], pos[pj[k]])
        u = order[p]
        v = order[p + 1]
        order[p] = v
        order[p + 1] = u
        pos[v] = p
        pos[u] = p + 1
    return order


def mix_on_ray(ratio, g_lo, g_hi, ray: float) -> tuple[float, tuple[float, float]]:
    """Bisect mu in [0, 1] until ratio(mu*g_lo + (1-mu)*g_hi) crosses ``ray``.

    ratio(g_lo) > ray > ratio(g_hi) on entry; the result is the mixing weight
    and the mixed score pair.
    """
    g_lo = np.asarray(g_lo, dtype=float)
    g_hi = np.asarray(g_hi, dtype=float)
    lo, hi = 0.0, 1.0  # ratio - ray is negative at 0, positive at 1
    for _ in range(MU_MAX_ITER):
        if hi - lo <= MU_TOL:
            break
        mid = 0.5 * (lo + hi)
        x = mid * g_lo + (1 - mid) * g_hi
        r = ratio((float(x[0]), float(x[1])))
        if r > ray:
            hi = mid
        elif r < ray:
            lo = mid
        else:
            lo = hi = mid
    mu = 0.5 * (lo + hi)
    x = mu * g_lo + (1 - mu) * g_hi
    return mu, (float(x[0]), float(x[1]))


def search_fixed_point(inst: Instance, ratio, mode: str = "randomized", seed: int = 0,
                       enum_factor: int = 4) -> FixedPoint:
    """Locate the dual fixed point of a ratio map on an already-generic instance."""
    s = _Search(inst, ratio)
    if mode == "integer":
        bound = max(1, int(math.ceil(max(np.max(np.abs(inst.a)), np.max(np.abs(inst.b))))))
        return s.run_integer(bound)
    if mode == "randomized":
        return s.run_randomized(np.random.default_rng(seed), enum_factor * inst.n)
    raise ValueError(f"unknown mode {mode!r}")


# -- results -------------------------------------------------------------------


@dataclass
class SolveResult:
    """Output of a single-instance solve.

    ``aug_index`` is the 0-based position t whose successor weight is raised:
    w'[t+1] = w[t].  It is None when no augmentation is needed.  ``alpha`` and
    ``beta`` are the chosen ranking's cumulative scores under w' on the
    unperturbed instance; ``opt_bound`` is the relaxation value at the
    fixed point, also on unperturbed scores.
    """

    ranking: np.ndarray
    aug_index: int | None
    alpha: float
    beta: float
    dual_p: float
    dual_q: float
    opt_bound: float
    objective: float
    mu_star: float | None = None
    weights: np.ndarray = field(default=None, repr=False)
    relaxed: tuple[float, float] = (0.0, 0.0)
    candidates: tuple[np.ndarray, ...] = field(default=(), repr=False)
    probes: int = 0

    @property
    def lambda_star(self) -> float:
        return self.dual_q / self.dual_p


def _finish(inst: Instance, f: ConcaveObjective, fp: FixedPoint, dual) -> SolveResult:
    """Translate a fixed point of the perturbed instance to the original one."""
    if not fp.on_ray:
        sigma = fp.lo.sigma
        alpha, beta = scores(inst, sigma)
        val = f.value(alpha, beta)
        return SolveResult(sigma, None, alpha, beta, dual[0], dual[1], val, val,
                           weights=np.array(inst.w), relaxed=(alpha, beta),
                           candidates=(sigma,), probes=fp.probes)
    t = fp.t
    s_lo, s_hi = fp.lo.sigma, fp.hi.sigma
    w_aug = augmented_weights(inst.w, t)
    opts = []
    for s in (s_lo, s_hi):
        al, be = scores(inst, s, w_aug)
        opts.append((f.value(al, be), al, be, s))
    best = max(range(2), key=lambda k: opts[k][0])  # first wins ties
    val, alpha, beta, sigma = opts[best]
    g_lo = np.array(scores(inst, s_lo))
    g_hi = np.array(scores(inst, s_hi))
    mixed = fp.mu * g_lo + (1 - fp.mu) * g_hi
    relaxed = (float(mixed[0]), float(mixed[1]))
    aug = t if inst.w[t] != inst.w[t + 1] else None
    return SolveResult(sigma, aug, alpha, beta, dual[0], dual[1], f.value(*relaxed), val,
                       mu_star=fp.mu, weights=w_aug if aug is not None else np.array(inst.w),
                       relaxed=relaxed, candidates=(s_lo, s_hi), probes=fp.probes)


def _single_n(inst: Instance, f: ConcaveObjective) -> SolveResult:
    sigma = np.zeros(1, dtype=np.int64)
    alpha, beta = scores(inst, sigma)
    val = f.value(alpha, beta)
    try:
        p, q = f.grad(alpha, beta)
    except DomainError:
        p = q = math.nan
    return SolveResult(sigma, None, alpha, beta, p, q, val, val, weights=np.array(inst.w),
                       relaxed=(alpha, beta), candidates=(sigma,))


def _solve(inst: Instance, f: ConcaveObjective, mode: str, seed: int, eps_rel: float,
           enum_factor: int = 4) -> SolveResult:
    if inst.n == 1:
        return _single_n(inst, f)
    work = perturb(inst, seed, eps_rel)
    fp = search_fixed_point(work, lambda g: f.grad_ratio(*g), mode, seed, enum_factor)
    dual = f.grad(*fp.point)
    return _finish(inst, f, fp, dual)


def solve_rank_integer(inst: Instance, f: ConcaveObjective, seed: int = 0,
                       eps_rel: float = EPS_REL) -> SolveResult:
    """Bisection over lam in [0, 2B+1] for integer scores bounded by B."""
    if not inst.is_integral():
        raise ValueError("integer solver needs integer-valued scores")
    return _solve(inst, f, "integer", seed, eps_rel)


def solve_rank_randomized(inst: Instance, f: ConcaveObjective, seed: int = 0,
                          eps_rel: float = EPS_REL, enum_factor: int = 4) -> SolveResult:
    """Random critical-ratio pivots, then enumeration once <= enum_factor*n remain."""
    return _solve(inst, f, "randomized", seed, eps_rel, enum_factor)


def solve_rank(inst: Instance, f: ConcaveObjective, seed: int = 0, mode: str = "auto",
               eps_rel: float = EPS_REL) -> SolveResult:
    if mode == "auto":
        mode = "integer" if inst.is_integral() else "randomized"
    if mode == "integer":
        return solve_rank_integer(inst, f, seed, eps_rel)
    if mode == "randomized":
        return solve_rank_randomized(inst, f, seed, eps_rel)
    raise ValueError(f"unknown mode {mode!r}")


def resolve_tie(inst: Instance, f: ConcaveObjective, ray_lambda: float, sigma_lo, sigma_hi):
    """Split the tie between two orders on one critical ray.

    Returns ``(chosen, aug_index, mu_star, (p, q), opt_bound)``; ``chosen`` is
    whichever order scores higher under the augmented weights.
    """
    sigma_lo = np.asarray(sigma_lo)
    sigma_hi = np.asarray(sigma_hi)
    t = adjacent_transposition(sigma_lo, sigma_hi)
    if t is None:
        raise ValueError("orders do not differ by one adjacent transposition")
    g_lo = scores(inst, sigma_lo)
    g_hi = scores(inst, sigma_hi)
    ratio = lambda g: f.grad_ratio(*g)  # noqa: E731
    if g_lo == g_hi:
        mu, point = 0.5, g_lo
    else:
        mu, point = mix_on_ray(ratio, g_lo, g_hi, ray_lambda)
    w_aug = augmented_weights(inst.w, t)
    vals = [f.value(*scores(inst, s, w_aug)) for s in (sigma_lo, sigma_hi)]
    chosen = sigma_lo if vals[0] >= vals[1] else sigma_hi
    return chosen, t, mu, f.grad(*point), f.value(*point)


def topk_solve(a, b, k: int, f: ConcaveObjective, seed: int = 0,
               eps_rel: float = EPS_REL) -> tuple[np.ndarray, SolveResult]:
    """At most k+1 items whose summed scores beat every k-subset under f."""
    n = len(a)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    inst = Instance.with_topk(a, b, k)
    res = solve_rank_randomized(inst, f, seed, eps_rel)
    size = k + 1 if res.aug_index == k - 1 else k
    return np.sort(res.ranking[:size]), res
