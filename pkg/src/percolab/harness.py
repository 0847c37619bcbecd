"""Command line interface, configuration files, CSV output and manifests.

Configuration files are flat ``key = value`` text; unknown keys are
rejected. Command line flags override file values. Every experiment writes
result CSVs (schema-versioned, byte-reproducible for a fixed config and
seed, independent of worker count) plus a JSON manifest with a content hash
of the configuration and of every output file.

Exit codes: 0 ok, 1 usage, 2 configuration, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import combinatorics as comb
from .cutpoints import CutPointRecord, detect_cutpoints, grow_ball
from .errors import ConfigError, PercolabError, UsageError
from .estimators import (
    CODE_OUTCOMES,
    EventFamily,
    RateEstimate,
    Tally,
    _run_one_n,
    estimate_J,
    estimate_mu,
    estimate_rate_surface,
    upper_tail_vs_cutpoint_experiment,
)
from .lattice import BoxSpec, PercolationSample, sample_configuration
from .metric import distance_map_csv
from .parallel import default_workers, run_parallel
from .renorm import classify_boxes, route_through_good, slab_experiment

CSV_PREFIX = "# percolab-csv"


# ---------------------------------------------------------------------------
# typed configuration


_REQUIRED = object()


@dataclass(frozen=True)
class Field:
    parse: object
    default: object = _REQUIRED
    help: str = ""


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_ints(text: str):
    return tuple(int(tok) for tok in str(text).split(",") if tok.strip())


def _parse_floats(text: str):
    return tuple(float(tok) for tok in str(text).split(",") if tok.strip())


def parse_config_text(text: str, schema: dict, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = schema[key].parse(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}")
    return out


def resolve_config(schema: dict, file_values: dict, overrides: dict) -> dict:
    merged = {}
    for key, fld in schema.items():
        if key in overrides:
            merged[key] = overrides[key]
        elif key in file_values:
            merged[key] = file_values[key]
        elif fld.default is not _REQUIRED:
            merged[key] = fld.default
        else:
            raise ConfigError(f"missing required key {key!r}")
    return merged


def canonical_config(command: str, cfg: dict) -> str:
    lines = [f"command = {command}"]
    for key in sorted(cfg):
        lines.append(f"{key} = {_fmt(cfg[key])}")
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# CSV and manifests


def write_csv(path, schema_name: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{CSV_PREFIX} {schema_name} v1\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt_cell(c) for c in row])


def _fmt_cell(c):
    if isinstance(c, float):
        if math.isinf(c):
            return "inf"
        if math.isnan(c):
            return "nan"
        return repr(c)
    return c


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command: str, cfg: dict, outputs, started: float) -> str:
    config_text = canonical_config(command, cfg)
    record = {
        "experiment_id": hashlib.sha256(config_text.encode()).hexdigest()[:12],
        "command": command,
        "config": config_text,
        "input_hash": hashlib.sha256(config_text.encode()).hexdigest(),
        "started_at": started,
        "finished_at": time.time(),
        "outputs": [
            {"path": os.path.basename(p), "sha256": _sha256(p)} for p in outputs
        ],
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# shared schema pieces


def _sample_schema():
    return {
        "d": Field(int, help="lattice dimension"),
        "L": Field(int, help="box radius"),
        "p": Field(float, help="edge probability"),
        "seed": Field(int, help="sample seed"),
    }


def _load_or_sample(cfg) -> PercolationSample:
    if cfg.get("sample"):
        return PercolationSample.load(cfg["sample"])
    box = BoxSpec(cfg["d"], cfg["L"])
    return sample_configuration(box, cfg["p"], cfg["seed"])


SCHEMAS: dict[str, dict[str, Field]] = {
    "sample": {
        **_sample_schema(),
        "out": Field(str, help="output sample file"),
    },
    "ball": {
        "sample": Field(str, help="sample file"),
        "source": Field(_parse_ints, help="source vertex, e.g. 0,0"),
        "t_max": Field(int, default=0, help="layer cap (0 = none)"),
        "csv": Field(str, default="dist.csv", help="output CSV name"),
    },
    "cutpoint-scan": {
        **_sample_schema(),
        "sample": Field(str, default="", help="optional sample file"),
        "t_min": Field(int, default=1),
        "csv": Field(str, default="cutpoints.csv"),
    },
    "classify": {
        **_sample_schema(),
        "sample": Field(str, default="", help="optional sample file"),
        "N": Field(int, help="macroscopic half-side"),
        "epsilon": Field(float, default=0.5),
        "mu1": Field(float, help="norm estimate for a unit step"),
        "csv": Field(str, default="classify.csv"),
    },
    "route": {
        **_sample_schema(),
        "sample": Field(str, default="", help="optional sample file"),
        "N": Field(int),
        "epsilon": Field(float, default=0.5),
        "mu1": Field(float),
        "sites": Field(str, help="macro path, e.g. 0,0;1,0;1,1"),
        "csv": Field(str, default="route.csv"),
    },
    "slab": {
        **_sample_schema(),
        "n": Field(int, help="endpoint separation"),
        "N": Field(int, help="block half-side"),
        "epsilon": Field(float, default=0.1),
        "xi": Field(float, default=0.3),
        "mu1": Field(float, default=1.0),
        "rho": Field(int, default=0, help="0 = derive from mu1"),
        "csv": Field(str, default="slab.csv"),
    },
    "lemma-check": {
        "lemma": Field(str, help="which construction to verify"),
        "instances": Field(int, default=100),
        "seed": Field(int, default=1),
        "csv": Field(str, default="lemma.csv"),
    },
    "estimate-mu": {
        "d": Field(int),
        "p": Field(float),
        "seed": Field(int),
        "x": Field(_parse_floats, default=(1.0, 0.0), help="direction"),
        "n_grid": Field(_parse_ints, default=(20, 40)),
        "replicates": Field(int, default=100),
        "box_factor": Field(float, default=1.6),
        "workers": Field(int, default=0, help="0 = auto"),
        "csv": Field(str, default="mu.csv"),
    },
    "estimate-rate": {
        "d": Field(int),
        "p": Field(float),
        "seed": Field(int),
        "event": Field(str, default="cutpoint", help="cutpoint|free|upper_tail"),
        "s": Field(_parse_floats, default=(0.25,)),
        "x": Field(_parse_floats, default=()),
        "xi": Field(float, default=0.0),
        "mu1": Field(float, default=1.0),
        "n_grid": Field(_parse_ints, default=(8,)),
        "replicates": Field(int, default=1000),
        "box_factor": Field(float, default=2.0),
        "workers": Field(int, default=0),
        "emit_replicates": Field(_parse_bool, default=False),
        "fail_at": Field(int, default=-1, help="fault injection (testing)"),
        "csv": Field(str, default="rates.csv"),
    },
    "estimate-j": {
        "d": Field(int),
        "p": Field(float),
        "seed": Field(int),
        "n": Field(int, default=8),
        "x": Field(_parse_floats, default=()),
        "xi_grid": Field(_parse_floats, default=(0.0, 0.25, 0.5)),
        "mu1": Field(float, default=1.0),
        "s_grid": Field(_parse_floats, default=(0.0, 0.25, 0.5, 0.75, 1.0)),
        "y_max": Field(float, default=1.0),
        "y_step": Field(float, default=0.5),
        "replicates": Field(int, default=2000),
        "box_factor": Field(float, default=2.0),
        "workers": Field(int, default=0),
        "csv": Field(str, default="j.csv"),
    },
    "upper-tail": {
        "d": Field(int),
        "p": Field(float),
        "seed": Field(int),
        "xi": Field(float, default=0.3),
        "s": Field(float, default=0.1),
        "mu1": Field(float, default=1.0),
        "n_grid": Field(_parse_ints, default=(12,)),
        "replicates": Field(int, default=1000),
        "box_factor": Field(float, default=1.3),
        "workers": Field(int, default=0),
        "csv": Field(str, default="paired.csv"),
    },
    "replay": {
        "manifest": Field(str, help="manifest to reproduce and compare"),
    },
}


# ---------------------------------------------------------------------------
# command handlers (each returns the list of written output paths)


def _cmd_sample(cfg, out_dir):
    box = BoxSpec(cfg["d"], cfg["L"])
    sample = sample_configuration(box, cfg["p"], cfg["seed"])
    path = cfg["out"]
    if not os.path.isabs(path):
        path = os.path.join(out_dir, path)
    sample.save(path)
    return [path]


def _cmd_ball(cfg, out_dir):
    sample = PercolationSample.load(cfg["sample"])
    t_max = cfg["t_max"] or None
    ball = grow_ball(sample, tuple(cfg["source"]), t_max=t_max)
    path = os.path.join(out_dir, cfg["csv"])
    with open(path, "w", newline="") as fh:
        distance_map_csv(ball, fh)
    return [path]


def _cmd_cutpoint_scan(cfg, out_dir):
    sample = _load_or_sample(cfg)
    d = sample.box.dimension
    ball = grow_ball(sample, (0,) * d, stop_at_boundary=True)
    records = detect_cutpoints(ball, cfg["t_min"])
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(
        path, "cutpoints",
        ["t"] + [f"x{k + 1}" for k in range(d)],
        [[r.time, *r.location] for r in records],
    )
    return [path]


def _cmd_classify(cfg, out_dir):
    sample = _load_or_sample(cfg)
    cls = classify_boxes(sample, cfg["N"], cfg["epsilon"], cfg["mu1"])
    path = os.path.join(out_dir, cfg["csv"])
    with open(path, "w", newline="") as fh:
        cls.to_csv(fh)
    return [path]


def _cmd_route(cfg, out_dir):
    sample = _load_or_sample(cfg)
    cls = classify_boxes(sample, cfg["N"], cfg["epsilon"], cfg["mu1"])
    sites = [tuple(int(c) for c in tok.split(",")) for tok in cfg["sites"].split(";")]
    box = sample.box
    x = box.vertex_coord(int(cls.cluster(sites[0])[0]))
    y = box.vertex_coord(int(cls.cluster(sites[-1])[0]))
    routed = route_through_good(sample, cls, sites, x, y)
    path = os.path.join(out_dir, cfg["csv"])
    d = box.dimension
    write_csv(
        path, "route",
        ["step"] + [f"x{k + 1}" for k in range(d)],
        [[i, *v] for i, v in enumerate(routed.vertices)],
    )
    return [path]


def _cmd_slab(cfg, out_dir):
    sample = _load_or_sample(cfg)
    record = slab_experiment(
        sample, cfg["epsilon"], cfg["xi"], cfg["N"], cfg["n"], cfg["mu1"],
        rho=cfg["rho"] or None,
    )
    path = os.path.join(out_dir, cfg["csv"])
    with open(path, "w", newline="") as fh:
        record.to_csv(fh)
    return [path]


LEMMA_ALIASES = {
    "projection": "projection",
    "proj": "projection",
    "distinct-subset": "distinct-subset",
    "subset": "distinct-subset",
    "separated-matching": "separated-matching",
    "dislines": "separated-matching",
    "disjoint-paths": "disjoint-paths",
    "disjpaths": "disjoint-paths",
    "axis-avoiding": "axis-avoiding",
    "case1": "axis-avoiding",
    "exterior-boundary": "exterior-boundary",
    "boundary": "exterior-boundary",
    "animals": "animals",
}


def _cmd_lemma_check(cfg, out_dir):
    name = LEMMA_ALIASES.get(cfg["lemma"])
    if name is None:
        raise ConfigError(
            f"unknown lemma {cfg['lemma']!r}; choose from "
            f"{sorted(set(LEMMA_ALIASES.values()))}"
        )
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for inst in range(cfg["instances"]):
        bound, achieved, ok = _LEMMA_RUNNERS[name](rng)
        rows.append([inst, name, bound, achieved, int(ok)])
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(path, "lemma", ["instance", "lemma", "bound", "achieved", "pass"], rows)
    return [path]


def _random_point_set(rng, d, extent, size):
    pts = rng.integers(-extent, extent + 1, size=(size, d))
    return comb.PointSet.of(map(tuple, np.unique(pts, axis=0)))


def _lemma_projection(rng):
    d = int(rng.integers(3, 5))
    S = _random_point_set(rng, d, 15, int(rng.integers(2, 1500)))
    axis, proj = comb.projection_best(S)
    bound = len(S) ** (2 / 3) / 2
    return bound, len(proj), len(proj) >= bound - 1e-9


def _lemma_subset(rng):
    d = int(rng.integers(2, 5))
    S = _random_point_set(rng, d, 12, int(rng.integers(1, 400)))
    i, j, sub = comb.distinct_coordinate_subset(S)
    comb.verify_distinct_subset(S, i, j, sub)
    return comb.subset_size_target(d, len(S), S.diam), len(sub), True


def _lemma_matching(rng):
    d = 3
    K = int(rng.integers(4, 21))
    ell = int(rng.integers(1, K + 1))
    m = int(rng.integers(1, 12))
    half = K // 2
    s1 = _unique_plane_points(rng, d, 0, half, m)
    s2 = _unique_plane_points(rng, d, ell, half, m)
    matching = comb.separated_matching(s1, s2, K)
    matching.verify()
    sep = matching.certified_min_separation if m > 1 else math.inf
    return matching.guarantee, sep, True


def _unique_plane_points(rng, d, plane, half, m):
    pts = set()
    while len(pts) < m:
        rest = tuple(int(c) for c in rng.integers(-half, half + 1, size=d - 1))
        pts.add((plane,) + rest)
    return comb.PointSet.of(pts)


def _lemma_disjoint_paths(rng):
    d = 3
    K = int(rng.integers(6, 21))
    ell = int(rng.integers(1, K + 1))
    m = int(rng.integers(2, 12))
    half = K // 2
    s1 = _unique_plane_points(rng, d, 0, half, m)
    s2 = _unique_plane_points(rng, d, ell, half, m)
    bundle = comb.disjoint_path_bundle(
        s1, s2, comb.ParallelGeometry(axis=0, ell=ell, spread=K)
    )
    bundle.verify()
    return bundle.multiplicity_bound, bundle.max_multiplicity, True


def _lemma_axis_avoiding(rng):
    d = 3
    n = int(rng.integers(1, 12))
    rest = set()
    while len(rest) < n:
        rest.add(tuple(int(c) for c in rng.integers(-n, n + 1, size=d - 1)))
    xs = [(-2 * n,) + r for r in rest]
    ys = [(2 * n,) + r for r in rest]
    bundle = comb.axis_avoiding_paths(xs, ys)
    bundle.verify()
    return 8 * n, bundle.max_length, True


def _lemma_boundary(rng):
    d = int(rng.integers(2, 4))
    size = int(rng.integers(1, 120))
    cells = _random_connected_set(rng, d, size)
    radius = max(max(abs(c) for c in v) for v in cells) + 3
    box = BoxSpec(d, radius)
    bnd = comb.exterior_boundary(cells, box)
    ok = bnd.star_connected and comb.isoperimetry_holds(
        len(cells), len(bnd.boundary), d
    )
    return len(cells), len(bnd.boundary), ok


def _random_connected_set(rng, d, size):
    cells = {(0,) * d}
    frontier = [(0,) * d]
    while len(cells) < size and frontier:
        v = frontier[int(rng.integers(0, len(frontier)))]
        axis = int(rng.integers(0, d))
        sign = 1 if rng.integers(0, 2) else -1
        w = tuple(c + (sign if k == axis else 0) for k, c in enumerate(v))
        if w not in cells:
            cells.add(w)
            frontier.append(w)
    return cells


def _lemma_animals(rng):
    d = 2
    k = int(rng.integers(1, 6))
    count = comb.count_lattice_animals(d, k)
    return 7 ** (d * k), count, count <= 7 ** (d * k)


_LEMMA_RUNNERS = {
    "projection": _lemma_projection,
    "distinct-subset": _lemma_subset,
    "separated-matching": _lemma_matching,
    "disjoint-paths": _lemma_disjoint_paths,
    "axis-avoiding": _lemma_axis_avoiding,
    "exterior-boundary": _lemma_boundary,
    "animals": _lemma_animals,
}


def _cmd_estimate_mu(cfg, out_dir):
    est = estimate_mu(
        cfg["p"], cfg["d"], cfg["x"], cfg["n_grid"], cfg["replicates"],
        cfg["seed"], box_factor=cfg["box_factor"],
        workers=cfg["workers"] or None,
    )
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(
        path, "mu",
        ["n", "replicates", "connected", "disconnected", "contaminated",
         "mean", "ci_lo", "ci_hi"],
        [
            [pt.n, pt.replicates, pt.connected, pt.disconnected,
             pt.contaminated, pt.mean, pt.ci[0], pt.ci[1]]
            for pt in est.points
        ],
    )
    return [path]


def _rate_rows(estimates):
    rows = []
    for est in estimates:
        lo_p, hi_p = est.ci
        lo_r, hi_r = est.rate_bounds
        rows.append([
            est.label, "" if est.s is None else est.s,
            ";".join(repr(float(c)) for c in est.x), est.n,
            est.tally.replicates, est.tally.hits, est.tally.misses,
            est.tally.disconnected, est.tally.contaminated,
            est.p_hat, lo_p, hi_p,
            "" if est.rate is None else est.rate, lo_r, hi_r,
        ])
    return rows


_RATE_HEADER = [
    "event", "s", "x", "n", "replicates", "hits", "misses", "disconnected",
    "contaminated", "p_hat", "p_lo", "p_hi", "rate", "rate_lo", "rate_hi",
]


def _cmd_estimate_rate(cfg, out_dir):
    family = EventFamily(
        kind=cfg["event"], d=cfg["d"], p=cfg["p"], s_grid=cfg["s"],
        x=cfg["x"], xi=cfg["xi"], mu1=cfg["mu1"], box_factor=cfg["box_factor"],
    )
    workers = cfg["workers"] or None
    labels = family.labels()
    estimates = []
    replicate_rows = []
    partial_note = None
    for n in cfg["n_grid"]:
        fn = partial(_run_one_n, family=family, seed=cfg["seed"], n=int(n))
        if cfg["fail_at"] >= 0:
            fn = partial(_failing_worker, inner=fn, fail_at=cfg["fail_at"])
        run = run_parallel(fn, cfg["replicates"], workers)
        tallies = [Tally() for _ in labels]
        for idx, codes in enumerate(run.results):
            for i, code in enumerate(codes):
                tallies[i].add(CODE_OUTCOMES[code])
                if cfg["emit_replicates"]:
                    s_val = "" if family.kind == "upper_tail" else family.s_grid[i]
                    replicate_rows.append([
                        labels[i], s_val,
                        ";".join(repr(float(c)) for c in family.x),
                        int(n), idx, CODE_OUTCOMES[code].value,
                    ])
        for i, label in enumerate(labels):
            s_val = None if family.kind == "upper_tail" else family.s_grid[i]
            estimates.append(RateEstimate(
                label=label, s=s_val, x=family.x, n=int(n), tally=tallies[i]
            ))
        if run.partial:
            partial_note = (
                f"# partial: replicate {run.first_failure} failed: {run.error}"
            )
            break

    outputs = []
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(path, "rates", _RATE_HEADER, _rate_rows(estimates))
    if partial_note:
        with open(path, "a") as fh:
            fh.write(partial_note + "\n")
    outputs.append(path)
    if cfg["emit_replicates"]:
        rpath = os.path.join(out_dir, "replicates.csv")
        write_csv(
            rpath, "event-tally",
            ["event", "s", "x", "n", "replicate", "outcome"],
            replicate_rows,
        )
        if partial_note:
            with open(rpath, "a") as fh:
                fh.write(partial_note + "\n")
        outputs.append(rpath)
    if partial_note:
        raise PercolabError(partial_note[2:], outputs)
    return outputs


def _failing_worker(index: int, *, inner, fail_at: int):
    if index == fail_at:
        raise RuntimeError("injected fault")
    return inner(index)


def _cmd_estimate_j(cfg, out_dir):
    d = cfg["d"]
    x = cfg["x"] or ((1.0,) + (0.0,) * (d - 1))
    steps = int(round(cfg["y_max"] / cfg["y_step"]))
    axis_vals = [k * cfg["y_step"] for k in range(-steps, steps + 1)]
    y_grid = [()]
    for _ in range(d):
        y_grid = [y + (v,) for y in y_grid for v in axis_vals]
    surface = estimate_rate_surface(
        d, cfg["p"], cfg["s_grid"], y_grid, cfg["n"], cfg["replicates"],
        cfg["seed"], box_factor=cfg["box_factor"],
        workers=cfg["workers"] or None,
    )
    rows = []
    for xi in cfg["xi_grid"]:
        j = estimate_J(x, xi, cfg["mu1"], surface)
        rows.append([
            xi, j.value, j.argmin[0],
            ";".join(repr(float(c)) for c in j.argmin[1]),
            j.slack, j.R, int(j.covered),
        ])
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(
        path, "jrate",
        ["xi", "J", "argmin_s", "argmin_y", "slack", "R", "covered"],
        rows,
    )
    return [path]


def _cmd_upper_tail(cfg, out_dir):
    tallies = upper_tail_vs_cutpoint_experiment(
        cfg["p"], cfg["d"], cfg["xi"], cfg["n_grid"], cfg["replicates"],
        cfg["seed"], s=cfg["s"], mu1=cfg["mu1"], box_factor=cfg["box_factor"],
        workers=cfg["workers"] or None,
    )
    rows = []
    for tally in tallies:
        for (upper, cut), count in sorted(tally.counts.items()):
            rows.append([tally.n, upper, cut, count])
    path = os.path.join(out_dir, cfg["csv"])
    write_csv(path, "paired", ["n", "upper_tail", "late_cutpoint", "count"], rows)
    return [path]


def _cmd_replay(cfg, out_dir):
    with open(cfg["manifest"]) as fh:
        record = json.load(fh)
    command = record["command"]
    schema = SCHEMAS[command]
    file_values = parse_config_text(
        "\n".join(
            line for line in record["config"].splitlines()
            if not line.startswith("command =")
        ),
        schema,
        source="<manifest>",
    )
    merged = resolve_config(schema, file_values, {})
    with tempfile.TemporaryDirectory() as tmp:
        outputs = _HANDLERS[command](merged, tmp)
        mismatches = []
        for out in record["outputs"]:
            fresh = os.path.join(tmp, out["path"])
            if not os.path.exists(fresh) or _sha256(fresh) != out["sha256"]:
                mismatches.append(out["path"])
    if mismatches:
        raise PercolabError(f"replay mismatch for outputs: {mismatches}")
    print(f"replay ok: {len(record['outputs'])} outputs byte-identical")
    return []


_HANDLERS = {
    "sample": _cmd_sample,
    "ball": _cmd_ball,
    "cutpoint-scan": _cmd_cutpoint_scan,
    "classify": _cmd_classify,
    "route": _cmd_route,
    "slab": _cmd_slab,
    "lemma-check": _cmd_lemma_check,
    "estimate-mu": _cmd_estimate_mu,
    "estimate-rate": _cmd_estimate_rate,
    "estimate-j": _cmd_estimate_j,
    "upper-tail": _cmd_upper_tail,
    "replay": _cmd_replay,
}


# ---------------------------------------------------------------------------
# CLI plumbing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="percolab", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for command, schema in SCHEMAS.items():
        sp = sub.add_parser(command, add_help=True)
        sp.add_argument("--config", default=None, help="config file")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key",
        )
        for key, fld in schema.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=f"opt_{key}", default=None, help=fld.help)
    return parser


def cli_dispatch(argv) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing subcommand")
        schema = SCHEMAS[args.command]
        file_values = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}")
            file_values = parse_config_text(text, schema, source=args.config)
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            key = key.strip()
            if key not in schema:
                raise ConfigError(f"unknown key {key!r}")
            overrides[key] = schema[key].parse(value.strip())
        for key, fld in schema.items():
            raw = getattr(args, f"opt_{key}", None)
            if raw is not None:
                try:
                    overrides[key] = fld.parse(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"bad value for {key!r}: {exc}")
        cfg = resolve_config(schema, file_values, overrides)
        os.makedirs(args.out_dir, exist_ok=True)
        started = time.time()
        outputs = _HANDLERS[args.command](cfg, args.out_dir)
        if outputs:
            write_manifest(args.out_dir, args.command, cfg, outputs, started)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PercolabError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
