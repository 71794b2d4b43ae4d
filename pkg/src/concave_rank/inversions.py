"""Inversion counting, uniform inversion sampling and critical-ratio windows.

An inversion of ``d`` with respect to ``c`` is a pair (i, j), i < j, that the
two sequences order in opposite directions, i.e. ``(c_i - c_j)(d_i - d_j) < 0``.
Counting uses merge sort.  Sampling builds an annotated merge tree (per-node
cross counts) once, then walks it top-down to the r-th inversion without ever
listing the inversion set.  The solver's hot path uses InversionProfile, which
draws from the same uniform distribution off per-element Fenwick counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True)
def _merge_count(d):
    n = d.shape[0]
    src = d.copy()
    dst = np.empty_like(src)
    total = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[i] <= src[j]:
                    dst[k] = src[i]
                    i += 1
                else:
                    dst[k] = src[j]
                    total += mid - i
                    j += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return total


def _level_offsets(n: int) -> np.ndarray:
    """Start of each level's node block in the flat per-node arrays."""
    sizes = [n]
    while sizes[-1] > 1:
        sizes.append((sizes[-1] + 1) // 2)
    return np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)


@njit(cache=True)
def _build_tree(d, off):
    """Per-node cross-inversion counts between a node's two children, plus
    subtree inversion totals.  Node k of level L lives at ``off[L] + k``."""
    n = d.shape[0]
    nlev = off.shape[0] - 2
    cross = np.zeros(off[-1], dtype=np.int64)
    total = np.zeros(off[-1], dtype=np.int64)
    src = d.copy()
    dst = np.empty_like(src)
    for lev in range(1, nlev + 1):
        width = 1 << (lev - 1)
        node = 0
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            cnt = 0
            while i < mid and j < hi:
                if src[i] <= src[j]:
                    dst[k] = src[i]
                    i += 1
                else:
                    dst[k] = src[j]
                    cnt += mid - i
                    j += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            c = off[lev - 1] + 2 * node
            t = cnt + total[c]
            if 2 * node + 1 < off[lev] - off[lev - 1]:
                t += total[c + 1]
            cross[off[lev] + node] = cnt
            total[off[lev] + node] = t
            node += 1
        src, dst = dst, src
    return cross, total


@njit(cache=True)
def _list_pairs(d, limit):
    """All inversion pairs (as c-order positions), emitted during the merge."""
    n = d.shape[0]
    src = np.arange(n)
    dst = np.empty_like(src)
    out = np.empty((limit, 2), dtype=np.int64)
    m = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if d[src[i]] <= d[src[j]]:
                    dst[k] = src[i]
                    i += 1
                else:
                    for t in range(i, mid):
                        if m < limit:
                            out[m, 0] = src[t]
                            out[m, 1] = src[j]
                        m += 1
                    dst[k] = src[j]
                    j += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return out[: min(m, limit)], m


def _c_order(c: np.ndarray, d: np.ndarray) -> np.ndarray:
    # sort by c, c-ties by d so tied pairs are never counted
    return np.lexsort((d, c))


def _check(c, d):
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.shape != d.shape or c.ndim != 1:
        raise ValueError(f"length mismatch: {c.shape} vs {d.shape}")
    return c, d


def count_inversions(c, d) -> int:
    """Number of pairs ordered differently by ``c`` and ``d``, in O(n log n)."""
    c, d = _check(c, d)
    if c.size < 2:
        return 0
    order = _c_order(c, d)
    return int(_merge_count(d[order]))


@dataclass(frozen=True)
class MergeTree:
    """Annotated merge tree for one (c, d) query; immutable once built.

    Only per-node counts are stored.  The d-sorted order of a block is
    recomputed when a sample lands in it.
    """

    order: np.ndarray  # c-order position -> original index
    d_sorted: np.ndarray  # d in c-order
    cross: np.ndarray  # flat per-node arrays, level L at offsets[L]:offsets[L+1]
    totals: np.ndarray
    offsets: np.ndarray

    @classmethod
    def build(cls, c, d) -> "MergeTree":
        c, d = _check(c, d)
        order = _c_order(c, d)
        return cls.from_order(order, d[order])

    @classmethod
    def from_order(cls, order: np.ndarray, d_sorted: np.ndarray) -> "MergeTree":
        """Build when the c-order is already known (``d_sorted = d[order]``)."""
        ds = np.ascontiguousarray(d_sorted, dtype=float)
        off = _level_offsets(ds.size)
        cross, totals = _build_tree(ds, off)
        return cls(np.asarray(order), ds, cross, totals, off)

    @property
    def count(self) -> int:
        return int(self.totals[-1]) if self.d_sorted.size > 1 else 0

    def locate(self, r: int) -> tuple[int, int]:
        """The r-th inversion (0-based) in tree order, as original indices (i < j)."""
        if not 0 <= r < self.count:
            raise IndexError(f"rank {r} outside [0, {self.count})")
        n = self.d_sorted.size
        off = self.offsets
        lev = off.size - 2
        k = 0
        while True:
            width = 1 << (lev - 1)
            child_nodes = off[lev] - off[lev - 1]
            c = off[lev - 1] + 2 * k
            left_total = int(self.totals[c])
            right_total = int(self.totals[c + 1]) if 2 * k + 1 < child_nodes else 0
            if r < left_total:
                lev, k = lev - 1, 2 * k
            elif r < left_total + right_total:
                r -= left_total
                lev, k = lev - 1, 2 * k + 1
            else:
                r -= left_total + right_total
                break
        # cross inversions of node (lev, k): left child block vs right child block
        lo = 2 * k * width
        mid = min(lo + width, n)
        hi = min(lo + 2 * width, n)
        left_pos = lo + np.argsort(self.d_sorted[lo:mid], kind="stable")
        right_pos = mid + np.argsort(self.d_sorted[mid:hi], kind="stable")
        left_vals = self.d_sorted[left_pos]
        right_vals = self.d_sorted[right_pos]
        greater = left_pos.size - np.searchsorted(left_vals, right_vals, side="right")
        cum = np.cumsum(greater)
        jj = int(np.searchsorted(cum, r, side="right"))
        r -= int(cum[jj - 1]) if jj > 0 else 0
        p_left = int(left_pos[left_pos.size - greater[jj] + r])
        p_right = int(right_pos[jj])
        i, j = int(self.order[p_left]), int(self.order[p_right])
        return (i, j) if i < j else (j, i)

    def sample(self, rng: np.random.Generator) -> tuple[int, int]:
        if self.count == 0:
            raise ValueError("no inversions to sample from")
        return self.locate(int(rng.integers(self.count)))


@njit(cache=True)
def _earlier_greater(rank, m):
    # Fenwick tree over ranks: out[j] = #{i < j : rank[i] > rank[j]}
    n = rank.shape[0]
    tree = np.zeros(m + 1, dtype=np.int32)
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        r = rank[j] + 1
        seen = 0
        k = r
        while k > 0:
            seen += tree[k]
            k -= k & -k
        out[j] = j - seen
        k = r
        while k <= m:
            tree[k] += 1
            k += k & -k
    return out


@dataclass(frozen=True)
class InversionProfile:
    """Per-element inversion counts for one (c, d) query.

    Same contract as MergeTree (count / locate / sample) at a fraction of the
    build cost: element j of the c-order carries the number of earlier
    elements with larger d, so a uniform rank picks j by prefix sums and its
    partner by one scan of the prefix.
    """

    order: np.ndarray  # c-order position -> original index
    rank: np.ndarray  # dense rank of d in c-order
    cum: np.ndarray  # running inversion totals

    @classmethod
    def build(cls, c, d) -> "InversionProfile":
        c, d = _check(c, d)
        order = _c_order(c, d)
        _, rank = np.unique(d[order], return_inverse=True)
        return cls._make(order, rank.astype(np.int64))

    @classmethod
    def from_permutations(cls, order: np.ndarray, rank: np.ndarray) -> "InversionProfile":
        """``rank`` is a permutation of 0..n-1 already listed in c-order."""
        return cls._make(np.asarray(order), np.ascontiguousarray(rank, dtype=np.int64))

    @classmethod
    def _make(cls, order, rank):
        m = int(rank.max()) + 1 if rank.size else 0
        return cls(order, rank, np.cumsum(_earlier_greater(rank, m)))

    @property
    def count(self) -> int:
        return int(self.cum[-1]) if self.cum.size else 0

    def locate(self, r: int) -> tuple[int, int]:
        """The r-th inversion (0-based), ordered by later element then earlier."""
        if not 0 <= r < self.count:
            raise IndexError(f"rank {r} outside [0, {self.count})")
        j = int(np.searchsorted(self.cum, r, side="right"))
        r -= int(self.cum[j - 1]) if j > 0 else 0
        p = int(np.flatnonzero(self.rank[:j] > self.rank[j])[r])
        i, j = int(self.order[p]), int(self.order[j])
        return (i, j) if i < j else (j, i)

    def sample(self, rng: np.random.Generator) -> tuple[int, int]:
        if self.count == 0:
            raise ValueError("no inversions to sample from")
        return self.locate(int(rng.integers(self.count)))


def sample_inversion(c, d, rng: np.random.Generator) -> tuple[int, int]:
    """A uniformly random inversion (i, j), i < j."""
    return MergeTree.build(c, d).sample(rng)


def list_inversions(c, d, limit: int | None = None) -> np.ndarray:
    """All inversions as an (K, 2) array of original indices with i < j."""
    c, d = _check(c, d)
    if c.size < 2:
        return np.empty((0, 2), dtype=np.int64)
    order = _c_order(c, d)
    ds = np.ascontiguousarray(d[order])
    if limit is None:
        limit = int(_merge_count(ds))
    pos, total = _list_pairs(ds, max(int(limit), 1))
    if total > limit:
        raise ValueError(f"{total} inversions exceed the listing limit {limit}")
    return _index_pairs(order[pos])


def _index_pairs(pairs: np.ndarray) -> np.ndarray:
    # each row as (smaller index, larger index)
    return np.stack((pairs.min(axis=1), pairs.max(axis=1)), axis=1)


def list_permutation_inversions(order: np.ndarray, d_sorted: np.ndarray,
                                count: int | None = None) -> np.ndarray:
    """list_inversions when the c-order is already known (``d_sorted = d[order]``).

    ``count``, when the caller already has it, skips the counting pass.
    """
    ds = np.ascontiguousarray(d_sorted, dtype=float)
    if ds.size < 2:
        return np.empty((0, 2), dtype=np.int64)
    if count is None:
        count = int(_merge_count(ds))
    pos, _ = _list_pairs(ds, max(int(count), 1))
    return _index_pairs(np.asarray(order)[pos])


# -- critical ratios -----------------------------------------------------------


def crossing(a, b, i, j):
    """lambda at which items i and j tie in a + lambda*b (inf when parallel)."""
    db = b[j] - b[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        return (a[i] - a[j]) / db


def sort_order(a: np.ndarray, b: np.ndarray, lam: float, side: str = "right") -> np.ndarray:
    """Descending order of a + lam*b.

    Exact ties are resolved toward the order valid just right (``side='right'``)
    or just left of ``lam``; remaining ties by lower index.  ``lam=inf`` is the
    order beyond every crossing: by b, then a.
    """
    if np.isinf(lam):
        # by b, then a, descending
        neg_b = -b
        order = np.argsort(neg_b)
        _resolve_ties(order, neg_b, a)
        return order
    neg = b * -lam if lam != 0 else np.zeros_like(a)
    neg -= a  # -(a + lam*b)
    # unstable SIMD sort; tied runs are re-ordered deterministically below
    order = np.argsort(neg)
    _resolve_ties(order, neg, b if side == "right" else -b)
    return order


@njit(cache=True)
def _resolve_ties(order, s, key):
    # reorder each run of equal s by descending key, then by index
    # (insertion sort: runs are short on generic instances)
    n = order.shape[0]
    start = 0
    while start < n - 1:
        end = start + 1
        while end < n and s[order[end]] == s[order[start]]:
            end += 1
        for p in range(start + 1, end):
            x = order[p]
            q = p - 1
            while q >= start and (key[order[q]] < key[x]
                                  or (key[order[q]] == key[x] and order[q] > x)):
                order[q + 1] = order[q]
                q -= 1
            order[q + 1] = x
        start = end


def _positions(order: np.ndarray) -> np.ndarray:
    pos = np.empty_like(order)
    pos[order] = np.arange(order.size)
    return pos


def window_query(a, b, lam_lo: float, lam_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """(c, d) whose inversions are exactly the crossings in [lam_lo, lam_hi]."""
    c = _positions(sort_order(a, b, lam_lo, side="left"))
    d = _positions(sort_order(a, b, lam_hi, side="right"))
    return c, d


def count_critical(a, b, lam_lo: float, lam_hi: float) -> int:
    c, d = window_query(np.asarray(a, float), np.asarray(b, float), lam_lo, lam_hi)
    return count_inversions(c, d)


def sample_critical(a, b, lam_lo: float, lam_hi: float, rng: np.random.Generator):
    """A uniform critical ratio in [lam_lo, lam_hi] plus the window's critical count.

    Returns ``(None, 0)`` when the window holds no crossing.  Pairs are
    sampled, not values, so duplicate ratios are weighted by multiplicity.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if not lam_lo < lam_hi:
        raise ValueError("need lam_lo < lam_hi")
    tree = InversionProfile.build(*window_query(a, b, lam_lo, lam_hi))
    if tree.count == 0:
        return None, 0
    i, j = tree.sample(rng)
    return float(crossing(a, b, i, j)), tree.count


def list_critical(a, b, lam_lo: float, lam_hi: float, limit: int | None = None) -> np.ndarray:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    pairs = list_inversions(*window_query(a, b, lam_lo, lam_hi), limit=limit)
    return np.sort(crossing(a, b, pairs[:, 0], pairs[:, 1]))
