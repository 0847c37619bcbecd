"""Exact lattice-geometry constructions with self-verifying outputs.

Each constructive routine returns an object carrying a ``verify`` method
that asserts exactly the guarantee the construction promises (projection
size, coordinate distinctness, segment separation, path length and
multiplicity caps, exterior-boundary star-connectivity). Tests call these
on randomized instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import (
    BundleInvariantError,
    GeometryError,
    MatchingInvariantError,
    PreconditionError,
    ProjectionBoundError,
    ResourceLimitError,
)
from .lattice import BoxSpec

SEPARATION_TOLERANCE = 1e-9
MAX_ANIMAL_WORK = 14  # cap on dimension * animal size


# ---------------------------------------------------------------------------
# point sets


@dataclass(frozen=True)
class PointSet:
    """Finite set of integer points with cached per-axis extents."""

    dimension: int
    points: tuple

    @classmethod
    def of(cls, pts) -> "PointSet":
        pts = tuple(sorted(tuple(int(c) for c in p) for p in pts))
        if not pts:
            raise PreconditionError("point set must be nonempty")
        d = len(pts[0])
        if any(len(p) != d for p in pts):
            raise GeometryError("inconsistent point dimensions")
        return cls(d, pts)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.int64)

    def diam_axis(self, axis: int) -> int:
        col = self.array[:, axis]
        return int(col.max() - col.min())

    @cached_property
    def diam(self) -> int:
        # max over axes of the per-axis extent
        return max(self.diam_axis(k) for k in range(self.dimension))


def projection_size(points: np.ndarray, axis: int) -> int:
    """Number of distinct images when coordinate ``axis`` is collapsed."""
    proj = np.delete(points, axis, axis=1)
    return len(np.unique(proj, axis=0))


def projection_best(S: PointSet):
    """Axis whose hyperplane projection keeps at least |S|^(2/3)/2 points.

    Follows the fiber-splitting case analysis (big first projection, many
    large fibers, or one huge double fiber), then falls back to the best
    axis over all of them. For d = 2 an adversarial set (a large square
    grid) admits no such axis; that raises :class:`ProjectionBoundError`.
    """
    pts = S.array
    n = len(S)
    bound = n ** (2.0 / 3.0) / 2.0 - SEPARATION_TOLERANCE

    candidate = None
    if projection_size(pts, 0) >= bound:
        candidate = 0
    else:
        # group by the axis-0 projection and look at fiber sizes
        proj0 = np.delete(pts, 0, axis=1)
        _, inverse, counts = np.unique(
            proj0, axis=0, return_inverse=True, return_counts=True
        )
        big = counts >= n ** (1.0 / 3.0)
        if big.any() and S.dimension >= 3:
            members = big[inverse]
            # distinct images of the large-fiber points under the second
            # collapse decide between "many fibers" and "one huge fiber"
            n_two = len(np.unique(np.delete(proj0[members], 0, axis=1), axis=0))
            candidate = 1 if n_two >= n ** (1.0 / 3.0) else 2
    if candidate is not None and projection_size(pts, candidate) >= bound:
        axis = candidate
    else:
        sizes = [projection_size(pts, k) for k in range(S.dimension)]
        axis = int(np.argmax(sizes))
        if sizes[axis] < bound:
            raise ProjectionBoundError(
                f"no axis reaches |S|^(2/3)/2 = {bound + SEPARATION_TOLERANCE:.3f} "
                f"(best {sizes[axis]}); possible only for d=2"
            )
    projected = pts.copy()
    projected[:, axis] = 0
    return axis, frozenset(map(tuple, projected))


# ---------------------------------------------------------------------------
# doubly-distinct coordinate subsets


def _pair_greedy(points, i, j):
    """Scan in sorted order, keeping points with fresh i- and j-coordinates."""
    used_i, used_j, out = set(), set(), []
    for p in sorted(points):
        if p[i] not in used_i and p[j] not in used_j:
            used_i.add(p[i])
            used_j.add(p[j])
            out.append(p)
    return out


def _pair_matching(points, i, j):
    """Maximum subset with pairwise distinct i- and j-coordinates.

    Equivalent to a maximum bipartite matching between the i-values and
    j-values, with one representative point per matched value pair.
    """
    pairs = {}
    for p in sorted(points):
        pairs.setdefault((p[i], p[j]), p)
    keys = sorted(pairs)
    ivals = sorted({a for a, _ in keys})
    jvals = sorted({b for _, b in keys})
    imap = {v: k for k, v in enumerate(ivals)}
    jmap = {v: k for k, v in enumerate(jvals)}
    rows = [imap[a] for a, _ in keys]
    cols = [jmap[b] for _, b in keys]
    graph = csr_matrix(
        (np.ones(len(keys), dtype=np.int8), (rows, cols)),
        shape=(len(ivals), len(jvals)),
    )
    match = maximum_bipartite_matching(graph, perm_type="column")
    out = []
    for r, c in enumerate(match):
        if c >= 0:
            out.append(pairs[(ivals[r], jvals[c])])
    return out


def subset_size_target(d: int, size: int, diam: int) -> float:
    """Guaranteed subset size (size / (2^(d-1) diam))^(1/(d-1)); inf at diam 0
    is treated by callers as the degenerate single-point case."""
    if diam == 0:
        return 1.0
    return (size / (2 ** (d - 1) * diam)) ** (1.0 / (d - 1))


def distinct_coordinate_subset(S: PointSet):
    """Axes i != j and a subset whose i- and j-coordinates are all distinct.

    The subset has at least (|S| / (2^(d-1) Diam S))^(1/(d-1)) points. Built
    by greedy line removal on the last two active axes with a pigeonhole
    descent to one dimension fewer; a maximum-matching upgrade covers the
    greedy's worst case, and an exhaustive pair sweep is the final fallback.
    """
    d = S.dimension
    pts = list(S.points)
    if len(pts) == 1 or S.diam == 0:
        return 0, 1, PointSet.of(pts[:1])

    target = subset_size_target(d, len(pts), S.diam)
    i, j, chosen = _descend(pts, list(range(d)))
    if len(chosen) < target:
        best = (i, j, chosen)
        for a, b in itertools.combinations(range(d), 2):
            cand = _pair_matching(pts, a, b)
            if len(cand) > len(best[2]):
                best = (a, b, cand)
        i, j, chosen = best
    if len(chosen) < target:
        raise PreconditionError(
            f"no doubly-distinct subset of size {target:.2f} found "
            f"(best {len(chosen)})"
        )
    return i, j, PointSet.of(chosen)


def _descend(pts, axes):
    """Greedy pick on the last two active axes, else recurse on a heavy slice."""
    i, j = axes[-2], axes[-1]
    sub = PointSet.of(pts)
    active_diam = max(sub.diam_axis(a) for a in axes)
    if active_diam == 0:
        return i, j, [pts[0]]
    target = subset_size_target(len(axes), len(pts), active_diam)
    chosen = _pair_greedy(pts, i, j)
    if len(chosen) < target:
        upgraded = _pair_matching(pts, i, j)
        if len(upgraded) > len(chosen):
            chosen = upgraded
    if len(axes) == 2 or len(chosen) >= target:
        return i, j, chosen
    # heaviest single-coordinate slice through one of the two scan axes
    best_axis, best_val, best_count = i, None, -1
    for axis in (i, j):
        vals, counts = np.unique(
            np.asarray([p[axis] for p in pts]), return_counts=True
        )
        k = int(np.argmax(counts))
        if counts[k] > best_count:
            best_axis, best_val, best_count = axis, int(vals[k]), int(counts[k])
    slice_pts = [p for p in pts if p[best_axis] == best_val]
    remaining = [a for a in axes if a != best_axis]
    return _descend(slice_pts, remaining)


def verify_distinct_subset(S: PointSet, i: int, j: int, subset: PointSet) -> None:
    pts = subset.points
    if len({p[i] for p in pts}) != len(pts) or len({p[j] for p in pts}) != len(pts):
        raise PreconditionError("subset coordinates are not pairwise distinct")
    if not set(pts) <= set(S.points):
        raise PreconditionError("subset is not contained in the input set")
    target = subset_size_target(S.dimension, len(S), S.diam)
    if len(pts) + SEPARATION_TOLERANCE < target:
        raise PreconditionError(
            f"subset size {len(pts)} below target {target:.3f}"
        )


# ---------------------------------------------------------------------------
# separated segment matchings


def segment_distance(p1, q1, p2, q2) -> float:
    """Euclidean distance between segments [p1,q1] and [p2,q2].

    Clamped closest-point parameterization; robust for parallel and
    degenerate (zero-length) segments.
    """
    p1 = np.asarray(p1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    tiny = 1e-12

    if a <= tiny and e <= tiny:
        return float(np.linalg.norm(r))
    if a <= tiny:
        t = min(1.0, max(0.0, f / e))
        return float(np.linalg.norm(p1 - (p2 + t * d2)))
    c = float(d1 @ r)
    if e <= tiny:
        s = min(1.0, max(0.0, -c / a))
        return float(np.linalg.norm(p1 + s * d1 - p2))

    b = float(d1 @ d2)
    denom = a * e - b * b
    s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > tiny else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(1.0, max(0.0, -c / a))
    elif t > 1.0:
        t = 1.0
        s = min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


@dataclass
class SeparatedMatching:
    """Bijection between two hyperplane point sets with separated segments."""

    s1: tuple
    s2: tuple
    sigma: tuple  # index into s2 for each index of s1
    guarantee: float  # promised pairwise segment separation
    cost: float  # total assignment cost actually achieved

    @cached_property
    def certified_min_separation(self) -> float:
        best = math.inf
        for a, b in itertools.combinations(range(len(self.s1)), 2):
            best = min(
                best,
                segment_distance(
                    self.s1[a], self.s2[self.sigma[a]],
                    self.s1[b], self.s2[self.sigma[b]],
                ),
            )
        return best

    def verify(self, tol: float = SEPARATION_TOLERANCE) -> None:
        if sorted(self.sigma) != list(range(len(self.s1))):
            raise MatchingInvariantError("sigma is not a bijection")
        if len(self.s1) > 1 and self.certified_min_separation < self.guarantee - tol:
            raise MatchingInvariantError(
                f"separation {self.certified_min_separation:.6g} below "
                f"guarantee {self.guarantee:.6g}"
            )


def _matching_cost_matrix(a1: np.ndarray, a2: np.ndarray, gap: float) -> np.ndarray:
    """Sum over transverse axes of hypot(gap, coordinate difference).

    This is the two-axis-plane projected length after the configuration is
    stretched along the separating axis so the hyperplane gap equals the
    transverse spread bound.
    """
    diffs = a1[:, None, 1:] - a2[None, :, 1:]
    return np.hypot(float(gap), diffs.astype(float)).sum(axis=2)


def separated_matching(S1: PointSet, S2: PointSet, K: int) -> SeparatedMatching:
    """Min-cost bijection whose segments stay at distance >= l / (sqrt2 K).

    S1 and S2 must sit on two hyperplanes orthogonal to axis 0 at axis
    offsets l apart (1 <= l <= K), have equal sizes, and pairwise sup-norm
    spread at most K. The assignment is solved exactly.
    """
    d = S1.dimension
    if d < 3:
        raise PreconditionError("separated matching requires dimension >= 3")
    if S2.dimension != d:
        raise GeometryError("dimension mismatch")
    if len(S1) != len(S2):
        raise PreconditionError("point sets must have equal size")
    a1, a2 = S1.array, S2.array
    if len(np.unique(a1[:, 0])) != 1 or len(np.unique(a2[:, 0])) != 1:
        raise PreconditionError("each set must lie on a single axis-0 hyperplane")
    ell = int(a2[0, 0] - a1[0, 0])
    if not 1 <= ell <= K:
        raise PreconditionError(f"hyperplane gap {ell} outside [1, K={K}]")
    spread = _pairwise_sup_spread(a1, a2)
    if spread > K:
        raise PreconditionError(f"pairwise sup-norm spread {spread} exceeds K={K}")

    cost = _matching_cost_matrix(a1, a2, K)
    rows, cols = linear_sum_assignment(cost)
    sigma = [0] * len(S1)
    for r, c in zip(rows, cols):
        sigma[r] = int(c)
    guarantee = ell / (math.sqrt(2.0) * K)
    sigma = _separation_repair(S1.points, S2.points, sigma, cost, guarantee)
    return SeparatedMatching(
        s1=S1.points,
        s2=S2.points,
        sigma=tuple(sigma),
        guarantee=guarantee,
        cost=float(sum(cost[i, sigma[i]] for i in range(len(sigma)))),
    )


def _separation_repair(p1, p2, sigma, cost, guarantee):
    """Tie-break within the optimal assignment face to restore separation.

    The assignment cost is blind to swaps between pairs whose plane
    projections share an endpoint (equal transverse coordinate on one
    side), and such tied optima can dip slightly below the separation
    guarantee. Swapping the partners of an offending pair is then
    cost-neutral and pushes the segments apart; iterate until no offending
    pair remains. The result is still an exact minimum-cost assignment.
    """
    m = len(sigma)
    if m <= 1:
        return sigma
    tol = SEPARATION_TOLERANCE

    def separation(a, b, sa, sb):
        return segment_distance(p1[a], p2[sa], p1[b], p2[sb])

    for _ in range(m * m + 10):
        swapped = False
        for a in range(m):
            for b in range(a + 1, m):
                cur = separation(a, b, sigma[a], sigma[b])
                if cur >= guarantee - tol:
                    continue
                dcost = (
                    cost[a, sigma[b]] + cost[b, sigma[a]]
                    - cost[a, sigma[a]] - cost[b, sigma[b]]
                )
                alt = separation(a, b, sigma[b], sigma[a])
                if abs(dcost) <= 1e-9 and alt > cur + tol:
                    sigma[a], sigma[b] = sigma[b], sigma[a]
                    swapped = True
        if not swapped:
            break
    return sigma


def _pairwise_sup_spread(a1: np.ndarray, a2: np.ndarray) -> int:
    hi = np.maximum(a1.max(axis=0) - a2.min(axis=0), a2.max(axis=0) - a1.min(axis=0))
    return int(hi.max())


def two_swap_local_assignment(cost: np.ndarray) -> list[int]:
    """Assignment locally optimal under transpositions (cross-check path)."""
    m = cost.shape[0]
    sigma = list(range(m))
    improved = True
    while improved:
        improved = False
        for a in range(m):
            for b in range(a + 1, m):
                cur = cost[a, sigma[a]] + cost[b, sigma[b]]
                swp = cost[a, sigma[b]] + cost[b, sigma[a]]
                if swp < cur - 1e-12:
                    sigma[a], sigma[b] = sigma[b], sigma[a]
                    improved = True
    return sigma


# ---------------------------------------------------------------------------
# lattice paths


def staircase_path(a, b) -> list[tuple[int, ...]]:
    """Z^d path from a to b hugging the straight segment [a, b].

    Every vertex stays within sup-norm distance 1 of the segment and the
    length equals the l1 distance between the endpoints exactly.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    delta = b - a
    m = int(np.abs(delta).max())
    if m == 0:
        return [tuple(int(c) for c in a)]
    way = [a]
    for jj in range(1, m + 1):
        w = np.floor(a + (jj / m) * delta + 0.5).astype(np.int64)
        if not np.array_equal(w, way[-1]):
            way.append(w)
    path = [way[0]]
    for w in way[1:]:
        cur = path[-1].copy()
        for axis in range(len(cur)):
            while cur[axis] != w[axis]:
                cur = cur.copy()
                cur[axis] += 1 if w[axis] > cur[axis] else -1
                path.append(cur)
    return [tuple(int(c) for c in v) for v in path]


def straight_path(a, b) -> list[tuple[int, ...]]:
    """Axis-parallel straight segment as a vertex path (a, b colinear)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    delta = b - a
    if np.count_nonzero(delta) > 1:
        raise GeometryError("endpoints are not on one axis line")
    return staircase_path(a, b)


def concat_paths(*paths) -> list[tuple[int, ...]]:
    out = list(paths[0])
    for p in paths[1:]:
        if p[0] != out[-1]:
            raise GeometryError("paths do not share junction vertices")
        out.extend(p[1:])
    return out


@dataclass
class PathBundle:
    """Family of lattice paths with declared caps, self-verifiable."""

    paths: list
    source_set: frozenset
    target_set: frozenset
    length_bound: float
    multiplicity_bound: float

    @cached_property
    def multiplicity(self) -> dict:
        counts = {}
        for p in self.paths:
            for v in set(p):
                counts[v] = counts.get(v, 0) + 1
        return counts

    @property
    def max_length(self) -> int:
        return max(len(p) - 1 for p in self.paths)

    @property
    def max_multiplicity(self) -> int:
        return max(self.multiplicity.values())

    def verify(self) -> None:
        if not self.paths:
            raise BundleInvariantError("empty bundle")
        for p in self.paths:
            if p[0] not in self.source_set or p[-1] not in self.target_set:
                raise BundleInvariantError("path endpoints outside declared sets")
            for u, v in zip(p, p[1:]):
                if sum(abs(a - b) for a, b in zip(u, v)) != 1:
                    raise BundleInvariantError("not a nearest-neighbour path")
        if self.max_length > self.length_bound:
            raise BundleInvariantError(
                f"length {self.max_length} exceeds bound {self.length_bound}"
            )
        if self.max_multiplicity > self.multiplicity_bound:
            raise BundleInvariantError(
                f"multiplicity {self.max_multiplicity} exceeds bound "
                f"{self.multiplicity_bound}"
            )


def default_multiplicity_constant(d: int) -> int:
    return (2 * d) ** (2 * d)


@dataclass(frozen=True)
class ParallelGeometry:
    """Sets on hyperplanes x_axis = 0 and x_axis = ell, spread at most K."""

    axis: int
    ell: int
    spread: int


@dataclass(frozen=True)
class PerpendicularGeometry:
    """Sets on x_axis_i = 0 and x_axis_j = 0 inside [-K, K]^d."""

    axis_i: int
    axis_j: int
    spread: int


def _permute(points: np.ndarray, perm) -> np.ndarray:
    return points[:, perm]


def disjoint_path_bundle(S1: PointSet, S2: PointSet, geometry) -> PathBundle:
    """Almost-disjoint short path families between hyperplane point sets.

    Parallel case: min(|S1|, |S2|) paths of length <= 2dK, each vertex shared
    by at most chi_d (K/ell)^(d-1) paths, chi_d = (2d)^(2d). Perpendicular
    case: ceil(min/2) paths of length <= 2dK with the composition cap
    chi_d 2^(d-1) + 4^d. Requires d >= 3.
    """
    d = S1.dimension
    if d < 3:
        raise PreconditionError("path bundles require dimension >= 3")
    if S2.dimension != d:
        raise GeometryError("dimension mismatch")
    if isinstance(geometry, ParallelGeometry):
        return _parallel_bundle(S1, S2, geometry)
    if isinstance(geometry, PerpendicularGeometry):
        return _perpendicular_bundle(S1, S2, geometry)
    raise PreconditionError(f"unknown geometry {geometry!r}")


def _axis_to_front(d: int, *axes):
    rest = [k for k in range(d) if k not in axes]
    perm = list(axes) + rest
    inv = [0] * d
    for pos, ax in enumerate(perm):
        inv[ax] = pos
    return perm, inv


def _parallel_bundle(S1: PointSet, S2: PointSet, g: ParallelGeometry) -> PathBundle:
    d = S1.dimension
    perm, inv = _axis_to_front(d, g.axis)
    a1 = _permute(S1.array, perm)
    a2 = _permute(S2.array, perm)
    if (a1[:, 0] != 0).any() or (a2[:, 0] != g.ell).any():
        raise PreconditionError("sets must lie on the two declared hyperplanes")
    m0 = min(len(a1), len(a2))
    p1 = PointSet.of(a1[np.lexsort(a1.T[::-1])][:m0])
    p2 = PointSet.of(a2[np.lexsort(a2.T[::-1])][:m0])
    matching = separated_matching(p1, p2, g.spread)
    matching.verify()
    paths = []
    for idx, x in enumerate(matching.s1):
        y = matching.s2[matching.sigma[idx]]
        raw = staircase_path(x, y)
        paths.append([tuple(np.asarray(v)[inv]) for v in raw])
    chi = default_multiplicity_constant(d)
    return PathBundle(
        paths=paths,
        source_set=frozenset(S1.points),
        target_set=frozenset(S2.points),
        length_bound=2 * d * g.spread,
        multiplicity_bound=chi * (g.spread / g.ell) ** (d - 1),
    )


def _perpendicular_bundle(
    S1: PointSet, S2: PointSet, g: PerpendicularGeometry
) -> PathBundle:
    d = S1.dimension
    K = g.spread
    if g.axis_i == g.axis_j:
        raise PreconditionError("perpendicular geometry needs two distinct axes")
    perm, inv = _axis_to_front(d, g.axis_i, g.axis_j)
    a1 = _permute(S1.array, perm)  # axis i -> 0, axis j -> 1
    a2 = _permute(S2.array, perm)
    if (a1[:, 0] != 0).any() or (a2[:, 1] != 0).any():
        raise PreconditionError("sets must lie on the two declared hyperplanes")
    if max(np.abs(a1).max(), np.abs(a2).max()) > K:
        raise PreconditionError("sets must be contained in [-K, K]^d")

    # reflections making the relevant halves majorities
    flip_j = 1 if 2 * int((a1[:, 1] >= 0).sum()) >= len(a1) else -1
    flip_i = 1 if 2 * int((a2[:, 0] >= 0).sum()) >= len(a2) else -1
    r1 = a1.copy()
    r2 = a2.copy()
    r1[:, 1] *= flip_j
    r2[:, 1] *= flip_j
    r1[:, 0] *= flip_i
    r2[:, 0] *= flip_i

    m0 = min(len(r1), len(r2))
    m_half = (m0 + 1) // 2
    h1 = r1[r1[:, 1] >= 0]
    h2 = r2[r2[:, 0] >= 0]
    if len(h1) < m_half or len(h2) < m_half:
        raise PreconditionError("reflection halves too small (inconsistent input)")
    h1 = h1[np.lexsort(h1.T[::-1])][:m_half]
    h2 = h2[np.lexsort(h2.T[::-1])][:m_half]

    # diagonal lift of the second set onto the hyperplane x_i = K
    lifted = h2.copy()
    t = K - h2[:, 0]
    lifted[:, 0] += t
    lifted[:, 1] += t
    diag_paths = [staircase_path(z, y) for z, y in zip(h2, lifted)]

    matching = separated_matching(
        PointSet.of(h1), PointSet.of(lifted), 2 * K
    )
    matching.verify()
    chi = default_multiplicity_constant(d)
    paths = []
    for idx in range(m_half):
        x = matching.s1[idx]
        y = matching.s2[matching.sigma[idx]]
        lift_pos = [tuple(q) for q in lifted].index(y)
        joined = concat_paths(staircase_path(x, y), diag_paths[lift_pos][::-1])
        arr = np.asarray(joined, dtype=np.int64)
        arr[:, 0] *= flip_i
        arr[:, 1] *= flip_j
        paths.append([tuple(v[inv]) for v in arr])
    return PathBundle(
        paths=paths,
        source_set=frozenset(S1.points),
        target_set=frozenset(S2.points),
        length_bound=2 * d * K,
        multiplicity_bound=chi * 2 ** (d - 1) + 4**d,
    )


def axis_avoiding_paths(x_list, y_list) -> PathBundle:
    """Pairwise disjoint detour paths between mirror points on x_1 = -2n, +2n.

    Input: n pairs with x^i = (-2n, rest), y^i = (2n, same rest). Output: n
    vertex-disjoint paths, each of length at most 8n, avoiding the axis-3
    line through the origin, with all interior vertices strictly inside the
    slab -2n < x_1 < 2n.
    """
    xs = [tuple(int(c) for c in v) for v in x_list]
    ys = [tuple(int(c) for c in v) for v in y_list]
    n = len(xs)
    if n == 0 or len(ys) != n:
        raise PreconditionError("need equally many source and target points")
    d = len(xs[0])
    if d < 3:
        raise PreconditionError("axis-avoiding paths require dimension >= 3")
    if len(set(xs)) != n:
        raise PreconditionError("source points must be distinct")
    for x, y in zip(xs, ys):
        if x[0] != -2 * n or y[0] != 2 * n or x[1:] != y[1:]:
            raise PreconditionError(
                "pairs must mirror across x_1 = 0 at offsets -2n, +2n"
            )

    order = sorted(range(n), key=lambda t: (xs[t][1],) + xs[t][2:])
    paths = [None] * n
    for rank, t in enumerate(order, start=1):
        x = np.asarray(xs[t], dtype=np.int64)
        y = np.asarray(ys[t], dtype=np.int64)
        if x[1] < 0:
            paths[t] = straight_path(x, y)
            continue
        inset = max(2 * (n - rank), 1)
        e1 = np.zeros(d, dtype=np.int64)
        e1[0] = 1
        e2 = np.zeros(d, dtype=np.int64)
        e2[1] = 1
        a = x + inset * e1
        b = y - inset * e1
        paths[t] = concat_paths(
            straight_path(x, a),
            straight_path(a, a + e2),
            straight_path(a + e2, b + e2),
            straight_path(b + e2, b),
            straight_path(b, y),
        )

    bundle = PathBundle(
        paths=paths,
        source_set=frozenset(xs),
        target_set=frozenset(ys),
        length_bound=8 * n,
        multiplicity_bound=1,
    )
    axis3 = tuple(0 if k != 2 else None for k in range(d))
    for p in bundle.paths:
        for v in p:
            if all(v[k] == 0 for k in range(d) if k != 2):
                raise BundleInvariantError("path touches the avoided axis line")
        for v in p[1:-1]:
            if not -2 * n < v[0] < 2 * n:
                raise BundleInvariantError("interior vertex leaves the open slab")
    return bundle


# ---------------------------------------------------------------------------
# exterior boundaries and animals


@dataclass
class ExteriorBoundary:
    """Outer vertex boundary of a connected set, with its enclosed interior."""

    boundary: frozenset
    interior: frozenset
    star_connected: bool


def _star_offsets(d: int):
    return [
        off
        for off in itertools.product((-1, 0, 1), repeat=d)
        if any(off)
    ]


def _axis_offsets(d: int):
    out = []
    for k in range(d):
        for s in (-1, 1):
            off = [0] * d
            off[k] = s
            out.append(tuple(off))
    return out


def exterior_boundary(gamma, box: BoxSpec) -> ExteriorBoundary:
    """Vertices off Gamma, adjacent to it, and connected to infinity off it.

    ``box`` is the ambient arena: Gamma must lie strictly inside (no face
    contact) so "connected to infinity" is faithful. Also reports whether
    the boundary is star-connected and returns the enclosed interior.
    """
    cells = {tuple(int(c) for c in v) for v in gamma}
    if not cells:
        raise PreconditionError("gamma must be nonempty")
    d = box.dimension
    for v in cells:
        if not box.contains(v):
            raise GeometryError(f"vertex {v} outside the ambient box")
        gi = box.grid_index(v)
        if any(g == 0 or g == box.side - 1 for g in gi):
            raise GeometryError("gamma touches the ambient box face")
    axis_off = _axis_offsets(d)
    if not _is_connected(cells, axis_off):
        raise PreconditionError("gamma must be Z^d-connected")

    lo = [min(v[k] for v in cells) - 1 for k in range(d)]
    hi = [max(v[k] for v in cells) + 1 for k in range(d)]

    def in_arena(v):
        return all(lo[k] <= v[k] <= hi[k] for k in range(d))

    # flood the complement from the arena shell: reachable = off to infinity
    outside = set()
    stack = []
    for v in itertools.product(*(range(lo[k], hi[k] + 1) for k in range(d))):
        if any(v[k] in (lo[k], hi[k]) for k in range(d)) and v not in cells:
            outside.add(v)
            stack.append(v)
    while stack:
        v = stack.pop()
        for off in axis_off:
            w = tuple(v[k] + off[k] for k in range(d))
            if in_arena(w) and w not in cells and w not in outside:
                outside.add(w)
                stack.append(w)

    boundary = set()
    for v in outside:
        for off in axis_off:
            w = tuple(v[k] + off[k] for k in range(d))
            if w in cells:
                boundary.add(v)
                break
    interior = {
        v
        for v in itertools.product(*(range(lo[k], hi[k] + 1) for k in range(d)))
        if v not in cells and v not in outside
    }
    return ExteriorBoundary(
        boundary=frozenset(boundary),
        interior=frozenset(interior),
        star_connected=_is_connected(boundary, _star_offsets(d)),
    )


def _is_connected(cells, offsets) -> bool:
    if not cells:
        return True
    it = iter(cells)
    start = next(it)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for off in offsets:
            w = tuple(v[k] + off[k] for k in range(len(off)))
            if w in cells and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(cells)


def isoperimetry_holds(gamma_size: int, boundary_size: int, d: int, kappa: float = 1.0) -> bool:
    """|Gamma| <= kappa |dGamma|^(d/(d-1)). kappa = 1 is safe: the largest
    axis projection of Gamma injects into the exterior boundary, and by
    Loomis-Whitney it is at least |Gamma|^((d-1)/d)."""
    return gamma_size <= kappa * boundary_size ** (d / (d - 1)) + SEPARATION_TOLERANCE


def count_lattice_animals(d: int, k: int, containing=None) -> int:
    """Exact number of star-connected k-sets containing the given site.

    Enumeration work is capped at d*k <= 14. The count never exceeds 7^(dk),
    which is asserted.
    """
    if d * k > MAX_ANIMAL_WORK:
        raise ResourceLimitError(
            f"d*k = {d * k} exceeds enumeration cap {MAX_ANIMAL_WORK}"
        )
    if k < 1:
        raise PreconditionError("animal size must be >= 1")
    root = tuple(containing) if containing is not None else (0,) * d
    if k == 1:
        return 1
    offsets = _star_offsets(d)

    def neighbours(v):
        return [tuple(v[i] + o[i] for i in range(d)) for o in offsets]

    used = {root}
    initial = sorted(neighbours(root))
    used.update(initial)

    def rec(size, untried):
        cnt = 0
        untried = list(untried)
        while untried:
            c = untried.pop(0)
            if size + 1 == k:
                cnt += 1
                continue
            newly = [w for w in neighbours(c) if w not in used]
            used.update(newly)
            cnt += rec(size + 1, untried + newly)
            used.difference_update(newly)
        return cnt

    count = rec(1, initial)
    assert count <= 7 ** (d * k)
    return count
