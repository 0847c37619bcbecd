import io
import math

import numpy as np
import pytest

from conftest import all_closed, all_open
from percolab import (
    BoxSpec,
    MacroLattice,
    ScaledL1Norm,
    bad_clusters,
    classify_boxes,
    dependency_range,
    route_through_good,
    sample_configuration,
    slab_experiment,
)
from percolab.errors import GeometryError, PreconditionError, RoutingError
from percolab.renorm import _site_components


def test_macro_lattice_partition():
    lat = MacroLattice(N=5, dimension=2)
    # every vertex maps to exactly one site whose block contains it
    for x in range(-22, 23):
        for y in range(-22, 23):
            site = lat.site_of((x, y))
            lo, hi = lat.block_low(site), lat.block_high(site)
            assert lo[0] <= x < hi[0] and lo[1] <= y < hi[1]
    # block of site 0 is [-N, N)^2
    assert lat.block_low((0, 0)) == (-5, -5)
    assert lat.block_high((0, 0)) == (5, 5)
    assert lat.enlarged_low((1, 0)) == (-5, -15)


def test_dependency_range():
    assert dependency_range(1.0, 2) == 20
    assert dependency_range(1.35, 3) == 40


def test_classify_all_open_good():
    s = all_open(BoxSpec(2, 30))
    cls = classify_boxes(s, N=5, epsilon=0.5, mu_hat=1.0)
    assert len(cls.records) == 9
    assert all(r.verdict == "good" for r in cls.records.values())
    # full lattice: distances are exactly the l1 norm
    assert cls.bad_fraction() == 0.0


def test_classify_all_closed_bad_condition1():
    s = all_closed(BoxSpec(2, 30))
    cls = classify_boxes(s, N=5, epsilon=0.5, mu_hat=1.0)
    assert all(r.verdict == "bad" for r in cls.records.values())
    assert {r.failed_condition for r in cls.records.values()} == {1}


def test_classify_requires_eps_N():
    with pytest.raises(PreconditionError):
        classify_boxes(all_open(BoxSpec(2, 20)), N=3, epsilon=0.1, mu_hat=1.0)


def test_classify_csv_schema():
    cls = classify_boxes(all_open(BoxSpec(2, 20)), N=3, epsilon=0.5, mu_hat=1.0)
    buf = io.StringIO()
    cls.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# percolab-csv classify v1"
    assert lines[1].split(",")[:3] == ["i1", "i2", "verdict"]


def test_bad_fraction_trend_decreases_in_block_size():
    # long local detours dominate small blocks, so the bad fraction starts
    # at one and falls once the slack eps*N beats the worst pocket depth;
    # the norm estimate is a generous upper bound so the long-pair part of
    # the distance condition is not the binding constraint
    mu1 = 1.8
    fracs = {}
    for N, L, seeds in ((10, 35, 8), (20, 65, 8), (40, 125, 12)):
        per_seed = []
        for seed in range(seeds):
            s = sample_configuration(BoxSpec(2, L), 0.7, 1000 + seed)
            cls = classify_boxes(
                s, N=N, epsilon=0.5, mu_hat=mu1, condition3_sources=96
            )
            per_seed.append(cls.bad_fraction())
        fracs[N] = np.asarray(per_seed)
    means = {N: v.mean() for N, v in fracs.items()}
    assert means[10] >= means[20] - 0.2
    assert means[20] >= means[40] - 0.2
    se = math.sqrt(
        fracs[10].var(ddof=1) / len(fracs[10])
        + fracs[40].var(ddof=1) / len(fracs[40])
        + 1e-12
    )
    assert means[10] - means[40] > 3 * se


def test_bad_clusters_extremes_and_oracle(rng):
    cls = classify_boxes(all_open(BoxSpec(2, 30)), N=5, epsilon=0.5, mu_hat=1.0)
    rep = bad_clusters(cls)
    assert rep.z_components == [] and rep.star_components == []

    # oracle comparison on synthetic site sets under both adjacencies
    for _ in range(50):
        sites = {tuple(v) for v in rng.integers(-4, 5, size=(rng.integers(1, 25), 2))}
        from percolab.combinatorics import _axis_offsets, _star_offsets

        z_comp = _site_components(sites, _axis_offsets(2))
        star_comp = _site_components(sites, _star_offsets(2))
        assert sum(len(c) for c in z_comp) == len(sites)
        assert len(star_comp) <= len(z_comp)
        # flood-fill oracle (independent, dict-based)
        def oracle(cells, diag):
            cells = set(cells)
            comps = []
            while cells:
                v = cells.pop()
                comp = {v}
                stack = [v]
                while stack:
                    u = stack.pop()
                    for dx in (-1, 0, 1):
                        for dy in (-1, 0, 1):
                            if (dx, dy) == (0, 0):
                                continue
                            if not diag and abs(dx) + abs(dy) != 1:
                                continue
                            w = (u[0] + dx, u[1] + dy)
                            if w in cells:
                                cells.discard(w)
                                comp.add(w)
                                stack.append(w)
                comps.append(frozenset(comp))
            return sorted(comps, key=lambda c: (-len(c), sorted(c)))

        assert oracle(sites, False) == z_comp
        assert oracle(sites, True) == star_comp


def test_route_single_box_trivial():
    s = all_open(BoxSpec(2, 30))
    cls = classify_boxes(s, N=5, epsilon=0.5, mu_hat=1.0)
    x = s.box.vertex_coord(int(cls.cluster((0, 0))[0]))
    routed = route_through_good(s, cls, [(0, 0)], x, x)
    assert routed.vertices == [x]
    assert routed.length == 0


def test_route_two_adjacent_open_boxes():
    s = all_open(BoxSpec(2, 30))
    cls = classify_boxes(s, N=5, epsilon=0.5, mu_hat=1.0)
    box = s.box
    x, y = (-5, 0), (6, 3)
    routed = route_through_good(s, cls, [(0, 0), (1, 0)], x, y)
    assert routed.vertices[0] == x and routed.vertices[-1] == y
    assert routed.length <= 4 * 2 * 5  # 2 d mu N |path| with mu = 1
    assert routed.within_bound


def test_route_error_cases():
    s = all_open(BoxSpec(2, 30))
    cls = classify_boxes(s, N=5, epsilon=0.5, mu_hat=1.0)
    with pytest.raises(RoutingError):
        route_through_good(s, cls, [(0, 0), (2, 0)], (0, 0), (0, 0))  # not adjacent
    with pytest.raises(RoutingError):
        route_through_good(s, cls, [], (0, 0), (0, 0))
    bad = all_closed(BoxSpec(2, 30))
    cls_bad = classify_boxes(bad, N=5, epsilon=0.5, mu_hat=1.0)
    with pytest.raises(RoutingError):
        route_through_good(bad, cls_bad, [(0, 0)], (0, 0), (0, 0))


def test_route_monte_carlo_good_paths():
    # random star-paths of good sites are routable within the bound; the
    # norm estimate is deliberately generous so good blocks are plentiful
    # at this scale (strict all-pairs goodness is rare at p = 0.7, N = 20)
    mu1 = 10.0
    s = sample_configuration(BoxSpec(2, 140), 0.7, 42)
    cls = classify_boxes(s, N=20, epsilon=0.5, mu_hat=mu1, condition3_sources=48)
    good = set(cls.good_sites)
    assert len(good) >= 10
    rng = np.random.default_rng(0)
    routed_count = 0
    attempts = 0
    while routed_count < 100 and attempts < 400:
        attempts += 1
        # random star-walk over good sites
        path = [list(sorted(good))[int(rng.integers(0, len(good)))]]
        for _ in range(int(rng.integers(0, 9))):
            nbrs = [
                (path[-1][0] + dx, path[-1][1] + dy)
                for dx in (-1, 0, 1)
                for dy in (-1, 0, 1)
                if (dx, dy) != (0, 0)
                and (path[-1][0] + dx, path[-1][1] + dy) in good
            ]
            if not nbrs:
                break
            path.append(nbrs[int(rng.integers(0, len(nbrs)))])
        cl_first = cls.cluster(path[0])
        cl_last = cls.cluster(path[-1])
        x = s.box.vertex_coord(int(cl_first[int(rng.integers(0, len(cl_first)))]))
        y = s.box.vertex_coord(int(cl_last[int(rng.integers(0, len(cl_last)))]))
        routed = route_through_good(s, cls, path, x, y)
        assert routed.within_bound
        assert routed.vertices[0] == x and routed.vertices[-1] == y
        routed_count += 1
    assert routed_count == 100


def test_good_verdict_monotone_in_p_with_uniqueness_exception():
    # coupled samples: opening edges can only help conditions 2 and 3; a
    # good -> bad flip at higher p must come from a uniqueness failure
    violations = []
    for seed in range(6):
        lo = sample_configuration(BoxSpec(2, 65), 0.62, 500 + seed)
        hi = sample_configuration(BoxSpec(2, 65), 0.72, 500 + seed)
        cls_lo = classify_boxes(lo, N=20, epsilon=0.5, mu_hat=8.0,
                                condition3_sources=48)
        cls_hi = classify_boxes(hi, N=20, epsilon=0.5, mu_hat=8.0,
                                condition3_sources=48)
        for site, rec in cls_lo.records.items():
            if rec.verdict == "good" and cls_hi.verdict(site) == "bad":
                violations.append(cls_hi.records[site].failed_condition)
    assert all(c == 1 for c in violations)


def test_slab_experiment_extremes():
    mu1 = 1.0
    rho = 2
    N = 1
    n = 10
    box = BoxSpec(3, 12, (5, 0, 0))
    s_open = all_open(box)
    rec = slab_experiment(s_open, 0.1, 0.3, N, n, mu1, rho=rho)
    eps_n = int(0.1 * n)
    assert rec.outcomes[0].distance == n - 2 * eps_n
    assert rec.main_event is False

    s_closed = all_closed(box)
    rec2 = slab_experiment(s_closed, 0.1, 0.3, N, n, mu1, rho=rho)
    assert rec2.outcomes[0].distance == math.inf
    assert rec2.main_event is True


def test_slab_requires_geometry():
    with pytest.raises(PreconditionError):
        slab_experiment(all_open(BoxSpec(2, 10)), 0.1, 0.3, 1, 5, 1.0, rho=1)
    with pytest.raises(GeometryError):
        # thickness (2*5+1)*2 = 22 exceeds the box radius 12
        slab_experiment(all_open(BoxSpec(3, 12)), 0.1, 0.3, 2, 5, 1.0, rho=5)


def test_slab_disjoint_offsets():
    # box wide enough in the thickness axis for three disjoint slabs
    rho, N = 1, 1
    box = BoxSpec(3, 20, (2, 0, 0))
    rec = slab_experiment(all_open(box), 0.2, 0.1, N, 4, 1.0, rho=rho)
    offsets = [o.offset for o in rec.outcomes]
    assert (0,) in offsets
    spacing = (2 * rho + 1) * 2 * N
    assert all(off[0] % spacing == 0 for off in offsets)
    assert len(offsets) == len(set(offsets))
    assert len(offsets) >= 3


def test_slab_csv():
    rec = slab_experiment(
        all_open(BoxSpec(3, 12, (5, 0, 0))), 0.1, 0.3, 1, 10, 1.0, rho=2
    )
    buf = io.StringIO()
    rec.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# percolab-csv slab v1"
    assert lines[1] == "n,slab_index,offset,distance,event"


def test_scaled_l1_norm():
    mu = ScaledL1Norm(1.5)
    assert mu(np.array([1.0, 0.0])) == 1.5
    assert mu(np.array([[1.0, 2.0], [0.0, 0.0]])).tolist() == [4.5, 0.0]
    with pytest.raises(PreconditionError):
        ScaledL1Norm(0.0)
