import itertools
import math

import numpy as np
import pytest

from percolab import BoxSpec
from percolab import combinatorics as comb
from percolab.errors import (
    BundleInvariantError,
    GeometryError,
    PreconditionError,
    ProjectionBoundError,
    ResourceLimitError,
)


def random_points(rng, d, extent, size):
    pts = rng.integers(-extent, extent + 1, size=(size, d))
    return comb.PointSet.of(map(tuple, np.unique(pts, axis=0)))


def plane_points(rng, d, axis, value, half, m):
    pts = set()
    while len(pts) < m:
        v = [int(c) for c in rng.integers(-half, half + 1, size=d)]
        v[axis] = value
        pts.add(tuple(v))
    return comb.PointSet.of(pts)


# ---------------------------------------------------------------------------
# projections


def test_projection_single_point():
    axis, proj = comb.projection_best(comb.PointSet.of([(3, -1, 2)]))
    assert len(proj) == 1


def test_projection_collinear():
    S = comb.PointSet.of([(k, 0, 0) for k in range(12)])
    axis, proj = comb.projection_best(S)
    assert axis in (1, 2)
    assert len(proj) == 12


def test_projection_random_bound_and_fallback(rng):
    for _ in range(200):
        S = random_points(rng, 3, 20, int(rng.integers(2, 2000)))
        axis, proj = comb.projection_best(S)
        bound = len(S) ** (2 / 3) / 2
        assert len(proj) >= bound - 1e-9
        best = max(
            comb.projection_size(S.array, k) for k in range(3)
        )
        # returned axis always achieves the bound; when it is not the
        # exhaustive argmax the bound must have been met by the recursion
        assert comb.projection_size(S.array, axis) >= bound - 1e-9
        assert best >= comb.projection_size(S.array, axis) - best  # sanity


def test_projection_d2_adversarial_raises():
    grid = comb.PointSet.of([(a, b) for a in range(12) for b in range(12)])
    with pytest.raises(ProjectionBoundError):
        comb.projection_best(grid)


# ---------------------------------------------------------------------------
# distinct-coordinate subsets


def test_distinct_subset_singleton():
    i, j, sub = comb.distinct_coordinate_subset(comb.PointSet.of([(5, 5)]))
    assert len(sub) == 1


def test_distinct_subset_grid_diagonal():
    k = 7
    S = comb.PointSet.of([(a, b) for a in range(k) for b in range(k)])
    i, j, sub = comb.distinct_coordinate_subset(S)
    comb.verify_distinct_subset(S, i, j, sub)
    # a diagonal certifies k; the guarantee is ~k/2
    assert len(sub) >= k**2 / (2 * (k - 1)) - 1e-9
    assert len(sub) <= k


def test_distinct_subset_random_exact(rng):
    for _ in range(200):
        d = int(rng.integers(2, 5))
        S = random_points(rng, d, 15, int(rng.integers(1, 300)))
        i, j, sub = comb.distinct_coordinate_subset(S)
        comb.verify_distinct_subset(S, i, j, sub)
        assert i != j


# ---------------------------------------------------------------------------
# separated matchings


def test_segment_distance_basics():
    assert comb.segment_distance((0, 0), (1, 0), (0, 1), (1, 1)) == 1.0
    assert comb.segment_distance((0, 0), (2, 2), (0, 2), (2, 0)) == 0.0
    assert comb.segment_distance((0, 0), (0, 0), (3, 4), (3, 4)) == 5.0
    # parallel overlapping
    assert comb.segment_distance((0, 0), (5, 0), (2, 3), (7, 3)) == 3.0


def test_matching_single_pair():
    s1 = comb.PointSet.of([(0, 1, 2)])
    s2 = comb.PointSet.of([(4, -1, 0)])
    m = comb.separated_matching(s1, s2, 4)
    m.verify()
    assert m.sigma == (0,)


def test_matching_parallel_unit_pair():
    K = 5
    s1 = comb.PointSet.of([(0, 0, 0), (0, 1, 0)])
    s2 = comb.PointSet.of([(K, 0, 0), (K, 1, 0)])
    m = comb.separated_matching(s1, s2, K)
    m.verify()
    assert m.certified_min_separation == 1.0
    assert m.certified_min_separation >= 1 / math.sqrt(2)


def test_matching_bruteforce_equality(rng):
    for _ in range(100):
        K = int(rng.integers(3, 15))
        ell = int(rng.integers(1, K + 1))
        m_size = int(rng.integers(2, 6))
        half = K // 2
        s1 = plane_points(rng, 3, 0, 0, half, m_size)
        s2 = plane_points(rng, 3, 0, ell, half, m_size)
        matching = comb.separated_matching(s1, s2, K)
        matching.verify()
        a1, a2 = np.asarray(matching.s1), np.asarray(matching.s2)
        cost = comb._matching_cost_matrix(a1, a2, K)
        brute = min(
            sum(cost[i, p[i]] for i in range(m_size))
            for p in itertools.permutations(range(m_size))
        )
        assert matching.cost == pytest.approx(brute, abs=1e-9)


def test_two_swap_local_minimum_also_separated(rng):
    # the exchange argument only needs transposition optimality, so a
    # 2-swap local optimum must obey the same separation bound
    for _ in range(60):
        K = int(rng.integers(3, 12))
        ell = int(rng.integers(1, K + 1))
        m_size = int(rng.integers(2, 7))
        s1 = plane_points(rng, 3, 0, 0, K // 2, m_size)
        s2 = plane_points(rng, 3, 0, ell, K // 2, m_size)
        cost = comb._matching_cost_matrix(s1.array, s2.array, K)
        sigma = comb.two_swap_local_assignment(cost)
        worst = min(
            comb.segment_distance(
                s1.points[a], s2.points[sigma[a]],
                s1.points[b], s2.points[sigma[b]],
            )
            for a, b in itertools.combinations(range(m_size), 2)
        )
        assert worst >= ell / (math.sqrt(2) * K) - 1e-9


def test_matching_hypothesis_checks():
    s1 = comb.PointSet.of([(0, 0, 0)])
    s2 = comb.PointSet.of([(9, 0, 0)])
    with pytest.raises(PreconditionError):
        comb.separated_matching(s1, s2, 4)  # gap exceeds K
    with pytest.raises(PreconditionError):
        comb.separated_matching(
            comb.PointSet.of([(0, 0, 0), (1, 0, 0)]), s2, 9
        )  # s1 not on one hyperplane
    with pytest.raises(PreconditionError):
        comb.separated_matching(
            comb.PointSet.of([(0, 0)]), comb.PointSet.of([(3, 0)]), 4
        )  # d = 2 unsupported


# ---------------------------------------------------------------------------
# path bundles


def test_staircase_properties(rng):
    for _ in range(100):
        d = int(rng.integers(2, 5))
        a = rng.integers(-20, 21, size=d)
        b = rng.integers(-20, 21, size=d)
        path = comb.staircase_path(a, b)
        assert path[0] == tuple(a) and path[-1] == tuple(b)
        assert len(path) - 1 == int(np.abs(b - a).sum())
        # every vertex within sup distance 1 of the segment
        for v in path:
            dist = comb.segment_distance(v, v, a, b)
            assert dist <= math.sqrt(d) + 1e-9


def test_bundle_aligned_pairs():
    s1 = comb.PointSet.of([(0, 0, 0), (0, 4, 0)])
    s2 = comb.PointSet.of([(3, 0, 0), (3, 4, 0)])
    bundle = comb.disjoint_path_bundle(s1, s2, comb.ParallelGeometry(0, 3, 4))
    bundle.verify()
    assert len(bundle.paths) == 2
    assert bundle.max_multiplicity == 1
    assert bundle.max_length <= 3


def test_bundle_parallel_random(rng):
    for _ in range(60):
        K = int(rng.integers(5, 21))
        ell = int(rng.integers(1, K + 1))
        m = int(rng.integers(2, 12))
        s1 = plane_points(rng, 3, 0, 0, K // 2, m)
        s2 = plane_points(rng, 3, 0, ell, K // 2, m)
        bundle = comb.disjoint_path_bundle(
            s1, s2, comb.ParallelGeometry(0, ell, K)
        )
        bundle.verify()
        assert len(bundle.paths) == m
        assert bundle.max_length <= 2 * 3 * K


def test_bundle_perpendicular_random(rng):
    for _ in range(60):
        K = int(rng.integers(5, 16))
        m = int(rng.integers(2, 12))
        s1 = plane_points(rng, 3, 0, 0, K, m)
        s2 = plane_points(rng, 3, 1, 0, K, m)
        bundle = comb.disjoint_path_bundle(
            s1, s2, comb.PerpendicularGeometry(0, 1, K)
        )
        bundle.verify()
        assert len(bundle.paths) == (m + 1) // 2
        assert bundle.max_length <= 2 * 3 * K


def test_bundle_dimension_guard():
    s1 = comb.PointSet.of([(0, 0)])
    s2 = comb.PointSet.of([(1, 0)])
    with pytest.raises(PreconditionError):
        comb.disjoint_path_bundle(s1, s2, comb.ParallelGeometry(0, 1, 1))


# ---------------------------------------------------------------------------
# axis-avoiding paths


def test_axis_avoiding_single():
    xs, ys = [(-2, 3, 1)], [(2, 3, 1)]
    bundle = comb.axis_avoiding_paths(xs, ys)
    bundle.verify()
    assert bundle.max_length <= 8


def test_axis_avoiding_explicit():
    n = 4
    rest = [(-2, 5), (0, 1), (0, 2), (3, -1)]
    xs = [(-2 * n, a, b) for a, b in rest]
    ys = [(2 * n, a, b) for a, b in rest]
    bundle = comb.axis_avoiding_paths(xs, ys)
    bundle.verify()
    assert bundle.max_multiplicity == 1  # pairwise vertex-disjoint
    assert bundle.max_length <= 8 * n
    for p in bundle.paths:
        for v in p:
            assert not (v[0] == 0 and v[1] == 0)  # avoids the axis-3 line


def test_axis_avoiding_random(rng):
    for _ in range(40):
        n = int(rng.integers(1, 12))
        rest = set()
        while len(rest) < n:
            rest.add(tuple(int(c) for c in rng.integers(-n, n + 1, size=2)))
        xs = [(-2 * n,) + r for r in rest]
        ys = [(2 * n,) + r for r in rest]
        bundle = comb.axis_avoiding_paths(xs, ys)
        bundle.verify()
        seen = set()
        for p in bundle.paths:
            assert not (set(p) & seen)
            seen |= set(p)


def test_axis_avoiding_hypothesis_violation():
    with pytest.raises(PreconditionError):
        comb.axis_avoiding_paths([(-4, 0, 0)], [(4, 1, 0)])  # not mirrored
    with pytest.raises(PreconditionError):
        comb.axis_avoiding_paths([(-3, 0, 0)], [(3, 0, 0)])  # wrong plane


# ---------------------------------------------------------------------------
# exterior boundary, isoperimetry, animals


def test_exterior_boundary_single_vertex():
    out = comb.exterior_boundary([(0, 0)], BoxSpec(2, 5))
    assert out.boundary == frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)})
    assert out.interior == frozenset()
    assert out.star_connected


def test_exterior_boundary_square():
    gamma = [(a, b) for a in range(3) for b in range(3)]
    out = comb.exterior_boundary(gamma, BoxSpec(2, 8))
    assert len(out.boundary) == 12  # the ring without the 4 corners
    assert out.star_connected
    assert out.interior == frozenset()


def test_exterior_boundary_ring_interior():
    ring = [(a, b) for a in range(-2, 3) for b in range(-2, 3)
            if max(abs(a), abs(b)) == 2]
    out = comb.exterior_boundary(ring, BoxSpec(2, 8))
    inner = {(a, b) for a in range(-1, 2) for b in range(-1, 2)}
    assert out.interior == frozenset(inner)
    assert (3, 0) in out.boundary
    assert (1, 0) not in out.boundary  # enclosed, not connected to infinity


def test_exterior_boundary_guards():
    with pytest.raises(GeometryError):
        comb.exterior_boundary([(5, 5)], BoxSpec(2, 5))  # touches the face
    with pytest.raises(PreconditionError):
        comb.exterior_boundary([(0, 0), (2, 2)], BoxSpec(2, 5))  # disconnected


def random_connected(rng, d, size):
    cells = {(0,) * d}
    frontier = [(0,) * d]
    while len(cells) < size:
        v = frontier[int(rng.integers(0, len(frontier)))]
        axis = int(rng.integers(0, d))
        sign = 1 if rng.integers(0, 2) else -1
        w = tuple(c + (sign if k == axis else 0) for k, c in enumerate(v))
        if w not in cells:
            cells.add(w)
            frontier.append(w)
    return cells


def test_exterior_boundary_random_star_connected_and_isoperimetry(rng):
    for _ in range(120):
        d = int(rng.integers(2, 4))
        cells = random_connected(rng, d, int(rng.integers(1, 120)))
        radius = max(max(abs(c) for c in v) for v in cells) + 2
        out = comb.exterior_boundary(cells, BoxSpec(d, max(radius, 2)))
        assert out.star_connected
        assert comb.isoperimetry_holds(len(cells), len(out.boundary), d)


def test_count_lattice_animals():
    assert comb.count_lattice_animals(2, 1) == 1
    assert comb.count_lattice_animals(2, 2) == 8
    for k in range(1, 6):
        assert comb.count_lattice_animals(2, k) <= 7 ** (2 * k)
    with pytest.raises(ResourceLimitError):
        comb.count_lattice_animals(3, 6)


def test_count_lattice_animals_bruteforce_oracle():
    # enumerate all star-connected k-subsets of a window containing 0
    for k in (2, 3):
        window = [(a, b) for a in range(-k + 1, k) for b in range(-k + 1, k)]
        count = 0
        for rest in itertools.combinations([c for c in window if c != (0, 0)], k - 1):
            cells = set(rest) | {(0, 0)}
            if comb._is_connected(cells, comb._star_offsets(2)):
                count += 1
        assert comb.count_lattice_animals(2, k) == count
