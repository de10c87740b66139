"""Command-line front end: JSON configs in, CSV/OBJ/JSON artifacts out.

Usage::

    domelab <subcommand> --config <file.json> [--out <dir>] [--seed <u64>] [--threads <n>]
    domelab repro <sec51|sec52|cone|alpha2-llc> [--config <file.json>] [--out <dir>]

Every run writes ``manifest.json`` next to its artifacts.  A manifest can be
passed back as ``--config`` to repeat the run.  Exit codes: 0 success,
2 configuration error, 3 guard violation (resolution, budget, geometry).
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import reports
from ._validation import ConfigError, DomelabError

log = logging.getLogger("domelab")

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3
U64_MAX = 2 ** 64 - 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_POINT = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SNOWFLAKE_SCHEMA = {
    "type": "object",
    "properties": {
        "n_sides": {"type": "integer", "minimum": 4},
        "p": {"type": "number", "exclusiveMinimum": 0.25, "exclusiveMaximum": 0.5},
        "schedule": {
            "oneOf": [
                {"type": "string"},
                {"type": "object", "properties": {"kind": {"type": "string"},
                                                  "steps": {"type": "array", "items": {"type": "integer"}}},
                 "required": ["kind"]},
            ]
        },
        "depth": {"type": "integer", "minimum": 0},
        "normalization": {"enum": ["diameter_half", "unit_side", "unit_perimeter"]},
    },
    "required": ["p"],
    "additionalProperties": False,
}

CURVE_SCHEMA = {
    "type": "object",
    "properties": {
        "snowflake": SNOWFLAKE_SCHEMA,
        "csv": {"type": "string"},
        "polygon": {
            "type": "object",
            "properties": {"n": {"type": "integer", "minimum": 3}, "radius": _POS},
            "required": ["n"],
            "additionalProperties": False,
        },
        "vertices": {"type": "array", "items": _POINT, "minItems": 2},
        "closed": {"type": "boolean"},
    },
    "minProperties": 1,
    "additionalProperties": False,
}

_COMMON = {"seed": {"type": "integer", "minimum": 0}, "curve": CURVE_SCHEMA}
_DOME = {"alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2}, "h": _POS,
         "h_min": _POS, "grade": _POS}


def _schema(props, required=("curve",)):
    return {"type": "object", "properties": {**_COMMON, **props}, "required": list(required),
            "additionalProperties": False}


SCHEMAS = {
    "snowflake": {"type": "object", "properties": {"seed": _COMMON["seed"], "spec": SNOWFLAKE_SCHEMA,
                                                   "max_vertices": {"type": "integer", "minimum": 4}},
                  "required": ["spec"], "additionalProperties": False},
    "gauge": _schema({"gauge": {"enum": ["two_point", "chord_arc", "wca"]},
                      "budget": {"type": "integer", "minimum": 1}, "m0": _POS,
                      "per_level": {"type": "integer", "minimum": 1}, "levels": {"type": "integer", "minimum": 1}},
                     ("curve", "gauge")),
    "partition": _schema({"delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                          "reverse": {"type": "boolean"}}, ("curve", "delta")),
    "dim": _schema({"kind": {"enum": ["box", "assouad"]},
                    "scale_range": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
                    "levels": {"type": "integer", "minimum": 4},
                    "delta_exponents": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                        "minItems": 2, "maxItems": 2}},
                   ("curve", "kind")),
    "levels": _schema({"eps0": _POS, "levels": {"type": "integer", "minimum": 1}, "h": _POS, "bound": _POS},
                      ("curve", "eps0")),
    "dome": _schema(_DOME, ("curve", "alpha", "h")),
    "regularity": _schema({**_DOME, "per_stratum": {"type": "integer", "minimum": 1}, "eps0": _POS,
                           "radii": {"type": "array", "items": _POS, "minItems": 1}}, ("curve", "alpha", "h")),
    "llc": _schema({**_DOME, "lambda_cap": {"type": "number", "minimum": 1},
                    "n_centers": {"type": "integer", "minimum": 1}}, ("curve", "alpha", "h")),
    "piece": _schema({**_DOME, "t1": _POS, "t2": {"type": "number", "minimum": 0}, "x1": _POINT, "y1": _POINT,
                      "chord": _POS, "start": _POINT, "c0": {"type": "number", "minimum": 1},
                      "strict": {"type": "boolean"}},
                     ("curve", "alpha", "h", "t1", "t2")),
    "repro": {"type": "object", "properties": {"seed": _COMMON["seed"], "h": _POS,
                                               "depth": {"type": "integer", "minimum": 1}},
              "additionalProperties": False},
}

REPRO_BUNDLES = ("sec51", "sec52", "cone", "alpha2-llc")

SEC51_SPEC = {"n_sides": 4, "p": 0.4, "schedule": {"kind": "powers_of_ten"}, "depth": 12,
              "normalization": "diameter_half"}
SEC52_SPEC = {"n_sides": 4, "p": 0.45, "schedule": {"kind": "squares"}, "depth": 12,
              "normalization": "diameter_half"}


def validate_config(subcommand, config):
    """Raise ConfigError naming the offending field."""
    try:
        jsonschema.validate(config, SCHEMAS[subcommand])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(where, exc.message) from None
    return config


def load_curve(cfg):
    """Resolve a ``curve`` config block (snowflake, csv, polygon or vertices) to a PolyCurve."""
    from .curves import PolyCurve, read_curve_csv, regular_polygon
    from .snowflake import SnowflakeSpec, generate

    if "snowflake" in cfg:
        return generate(SnowflakeSpec.from_dict(cfg["snowflake"]))
    if "csv" in cfg:
        return read_curve_csv(cfg["csv"], closed=cfg.get("closed"))
    if "polygon" in cfg:
        return regular_polygon(cfg["polygon"]["n"], cfg["polygon"].get("radius", 1.0))
    return PolyCurve(np.asarray(cfg["vertices"], dtype=float), closed=cfg.get("closed", True))


def _spec_or_curve(cfg):
    from .snowflake import SnowflakeSpec

    if "snowflake" in cfg:
        return SnowflakeSpec.from_dict(cfg["snowflake"])
    return load_curve(cfg)


def _dome(cfg):
    from .dome import build_dome

    return build_dome(load_curve(cfg["curve"]), cfg["alpha"], cfg["h"], cfg.get("h_min"), cfg.get("grade", 1.0))


# --- subcommands: each returns a dict of summary values and writes into ``out`` -----------------


def cmd_snowflake(cfg, out, seed):
    from .curves import write_curve_csv
    from .snowflake import DEFAULT_MAX_VERTICES, SnowflakeSpec, generate

    spec = SnowflakeSpec.from_dict(cfg["spec"])
    curve = generate(spec, cfg.get("max_vertices", DEFAULT_MAX_VERTICES))
    write_curve_csv(curve, out / "curve.csv")
    return {"vertices": curve.n_vertices, "length": curve.length, "diameter": curve.diameter,
            "artifacts": ["curve.csv"]}


def cmd_gauge(cfg, out, seed):
    from .gauges import MAX_PAIRS, chord_arc_constant, two_point_constant
    from .partition import weak_chord_arc_scan

    kind = cfg["gauge"]
    if kind == "wca":
        rep = weak_chord_arc_scan(_spec_or_curve(cfg["curve"]), m0=cfg.get("m0", 10.0),
                                  per_level=cfg.get("per_level", 4), levels=cfg.get("levels", 4), seed=seed)
        (out / "gauge.csv").write_text(rep.to_csv(), newline="\n")
        return {"max_index": rep.max_index, "passed": rep.passed, "artifacts": ["gauge.csv"]}
    curve = load_curve(cfg["curve"])
    fn = two_point_constant if kind == "two_point" else chord_arc_constant
    res = fn(curve, cfg.get("budget", MAX_PAIRS))
    d = res.as_dict()
    header = sorted(d)
    reports.write_csv(out / "gauge.csv", header, [[d[k] for k in header]])
    return {"constant": res.constant, "artifacts": ["gauge.csv"]}


def cmd_partition(cfg, out, seed):
    from .partition import build_delta_partition

    curve = load_curve(cfg["curve"])
    part = build_delta_partition(curve.whole(), cfg["delta"], reverse=cfg.get("reverse", False))
    d = part.diameters
    rows = [[i, a, b, x] for i, (a, b, x) in enumerate(zip(part.breaks[:-1], part.breaks[1:], d))]
    reports.write_csv(out / "partition.csv", ["piece_id", "start", "end", "diam"], rows)
    s = part.summary()
    return {"pieces": s.size, "m_index": s.m_index, "band_ok": s.band_ok(), "artifacts": ["partition.csv"]}


def cmd_dim(cfg, out, seed):
    from .dimension import assouad_profile, box_dimension, default_delta_grid

    if cfg["kind"] == "box":
        curve = load_curve(cfg["curve"])
        fit = box_dimension(curve, tuple(cfg.get("scale_range", (2.0 ** -10, 2.0 ** -3))), cfg.get("levels", 8))
        reports.write_csv(out / "dim.csv", ["scale", "count"], list(zip(fit.scales, fit.counts)))
        return {"exponent": fit.exponent, "residual": fit.residual, "artifacts": ["dim.csv"]}
    target = _spec_or_curve(cfg["curve"])
    grid = default_delta_grid(*cfg["delta_exponents"]) if "delta_exponents" in cfg else None
    fit = assouad_profile(target, delta_grid=grid)
    _write_profile(out / "dim.csv", fit)
    return {"exponent": fit.exponent, "witness": fit.witness, "artifacts": ["dim.csv"]}


def _write_profile(path, fit):
    header = ["subarc_id", "diam", "delta", "count", "exponent", "flag"]
    reports.write_csv(path, header, [[r[k] for k in header] for r in fit.per_subarc])


def cmd_levels(cfg, out, seed):
    from .curves import write_curve_csv
    from .levelsets import build_distance_field, extract_level_curve, lqc_scan

    curve = load_curve(cfg["curve"])
    levels = cfg.get("levels", 6)
    eps0 = cfg["eps0"]
    h = cfg.get("h", min(curve.diameter / 256, eps0 * 2.0 ** -(levels - 1) / 4))
    field = build_distance_field(curve, h)
    rep = lqc_scan(curve, eps0, levels=levels, bound=cfg.get("bound", 10.0), field=field)
    (out / "lqc.csv").write_text(rep.to_csv(), newline="\n")
    arts = ["lqc.csv"]
    for k, row in enumerate(rep.rows):
        for j, comp in enumerate(extract_level_curve(field, row["epsilon"]).components):
            name = f"level_{k}_{j}.csv"
            write_curve_csv(comp, out / name)
            arts.append(name)
    return {"max_constant": rep.max_constant, "eps0_passing": rep.eps0_passing, "violations": len(rep.violations),
            "artifacts": arts}


def cmd_dome(cfg, out, seed):
    mesh = _dome(cfg)
    mesh.to_obj(out / "dome.obj")
    return {"area": mesh.total_area, "vertices": len(mesh.vertices), "triangles": len(mesh.triangles),
            "euler_characteristic": int(mesh.euler_characteristic), "artifacts": ["dome.obj"]}


def cmd_regularity(cfg, out, seed):
    from .dome import regularity_scan

    mesh = _dome(cfg)
    rep = regularity_scan(mesh, radii=cfg.get("radii"), eps0=cfg.get("eps0"),
                          per_stratum=cfg.get("per_stratum", 8), seed=seed)
    (out / "regularity.csv").write_text(rep.to_csv(), newline="\n")
    return {"constant": rep.constant, "eps0": rep.eps0,
            "per_radius": {reports.fmt(k): v for k, v in rep.per_radius.items()},
            "boundary_profile": {reports.fmt(k): v for k, v in rep.boundary_profile().items()},
            "artifacts": ["regularity.csv"]}


def cmd_llc(cfg, out, seed):
    from .dome import llc_scan

    mesh = _dome(cfg)
    rep = llc_scan(mesh, lambda_cap=cfg.get("lambda_cap", 100.0), n_centers=cfg.get("n_centers", 8), seed=seed)
    (out / "llc.csv").write_text(rep.to_csv(), newline="\n")
    return {"lambda1": rep.lambda1, "lambda2": rep.lambda2, "capped": rep.capped, "artifacts": ["llc.csv"]}


def cmd_piece(cfg, out, seed):
    from .dome import points_on_level, square_piece

    mesh = _dome(cfg)
    t1, t2 = cfg["t1"], cfg["t2"]
    field = None
    if "x1" in cfg and "y1" in cfg:
        x1, y1 = cfg["x1"], cfg["y1"]
    elif "chord" in cfg:
        x1, y1, field = points_on_level(mesh, t1, cfg["chord"], start=cfg.get("start"))
    else:
        raise ConfigError("x1", "give x1 and y1, or chord")
    sp = square_piece(mesh, x1, y1, t1, t2, c0=cfg.get("c0"), field=field, strict=cfg.get("strict", True))
    result = {"area": sp.area, "diameter": sp.diameter, "ratio": sp.ratio, "c0": sp.c0, "checks": sp.checks,
              "x1": sp.x1, "y1": sp.y1, "x2": sp.x2, "y2": sp.y2}
    reports.write_json(out / "piece.json", result)
    return {"area": sp.area, "ratio": sp.ratio, "artifacts": ["piece.json"]}


def _repro_sec51(cfg, out, seed):
    from .partition import weak_chord_arc_scan
    from .snowflake import SnowflakeSpec

    spec = SnowflakeSpec.from_dict({**SEC51_SPEC, "depth": cfg.get("depth", SEC51_SPEC["depth"])})
    rep = weak_chord_arc_scan(spec, m0=10.0)
    (out / "wca.csv").write_text(rep.to_csv(), newline="\n")
    return {"spec": spec.to_dict(), "max_index": rep.max_index, "passed": rep.passed, "artifacts": ["wca.csv"]}


def _repro_sec52(cfg, out, seed):
    from .dimension import assouad_profile, step_exponents, tail_max
    from .partition import weak_chord_arc_scan
    from .snowflake import SnowflakeSpec

    spec = SnowflakeSpec.from_dict({**SEC52_SPEC, "depth": cfg.get("depth", SEC52_SPEC["depth"])})
    rep = weak_chord_arc_scan(spec, m0=10.0)
    (out / "wca.csv").write_text(rep.to_csv(), newline="\n")
    fit = assouad_profile(spec)
    _write_profile(out / "assouad.csv", fit)
    steps = step_exponents(fit)
    return {"spec": spec.to_dict(), "m_values": list(rep.m_values), "assouad_max": fit.exponent,
            "assouad_tail_max": tail_max(steps), "artifacts": ["wca.csv", "assouad.csv"]}


def _repro_cone(cfg, out, seed):
    from .curves import regular_polygon
    from .dome import build_dome

    h = cfg.get("h", 1 / 128)
    mesh = build_dome(regular_polygon(512, 1.0), 1.0, h)
    mesh.to_obj(out / "dome.obj")
    oracle = 2 * math.sqrt(2) * math.pi
    area = mesh.total_area
    rel = area / oracle - 1
    reports.write_json(out / "area.json", {"area": area, "oracle": oracle, "relative_error": rel, "h": h})
    return {"area": area, "relative_error": rel, "within_1pct": abs(rel) < 0.01, "artifacts": ["dome.obj", "area.json"]}


def _repro_alpha2_llc(cfg, out, seed):
    from .curves import regular_polygon
    from .dome import build_dome, llc_scan

    h = cfg.get("h", 1 / 128)
    result = {"artifacts": []}
    for alpha, tag in ((2.0, "alpha2"), (0.5, "alpha_half")):
        mesh = build_dome(regular_polygon(512, 1.0), alpha, h)
        rep = llc_scan(mesh, lambda_cap=100.0, seed=seed)
        (out / f"llc_{tag}.csv").write_text(rep.to_csv(), newline="\n")
        result[tag] = {"lambda1": rep.lambda1, "lambda2": rep.lambda2, "capped": rep.capped}
        result["artifacts"].append(f"llc_{tag}.csv")
    return result


REPRO = {"sec51": _repro_sec51, "sec52": _repro_sec52, "cone": _repro_cone, "alpha2-llc": _repro_alpha2_llc}

COMMANDS = {
    "snowflake": cmd_snowflake,
    "gauge": cmd_gauge,
    "partition": cmd_partition,
    "dim": cmd_dim,
    "levels": cmd_levels,
    "dome": cmd_dome,
    "regularity": cmd_regularity,
    "llc": cmd_llc,
    "piece": cmd_piece,
}


def _parser():
    ap = argparse.ArgumentParser(prog="domelab", description="Snowflakes, level sets and double domes.")
    ap.add_argument("subcommand", choices=sorted(COMMANDS) + ["repro"])
    ap.add_argument("bundle", nargs="?", help="experiment bundle for repro: " + ", ".join(REPRO_BUNDLES))
    ap.add_argument("--config", help="JSON config (or a manifest from an earlier run)")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", help="unsigned 64-bit seed; overrides the config seed")
    ap.add_argument("--threads", help="worker threads; falls back to DOMELAB_THREADS")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _parse_u64(text, field):
    try:
        v = int(text)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected an unsigned integer, got {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise ConfigError(field, "out of the unsigned 64-bit range")
    return v


def _resolve_threads(arg):
    raw = arg if arg is not None else os.environ.get("DOMELAB_THREADS")
    if raw is None:
        return 1
    v = _parse_u64(raw, "threads")
    if v < 1:
        raise ConfigError("threads", "must be at least 1")
    return v


def _load_config(path):
    if path is None:
        return None, {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and "manifest_version" in data:
        return data, data.get("config", {})
    return None, data


def run(argv=None):
    """Parse arguments, run one subcommand and return the exit code."""
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        manifest, config = _load_config(args.config)
        sub, bundle = args.subcommand, args.bundle
        if manifest is not None:
            sub, bundle = manifest["subcommand"], manifest.get("bundle")
        if sub == "repro":
            if bundle not in REPRO:
                raise ConfigError("bundle", f"expected one of {', '.join(REPRO_BUNDLES)}, got {bundle!r}")
        elif args.config is None:
            raise ConfigError("config", f"--config is required for {sub}")
        validate_config(sub, config)
        seed = _parse_u64(args.seed, "seed") if args.seed is not None else int(config.get("seed", 0))
        threads = _resolve_threads(args.threads)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fn = REPRO[bundle] if sub == "repro" else COMMANDS[sub]
        result = fn(config, out, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomelabError as exc:
        print(f"guard violation ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_GUARD
    wall = time.perf_counter() - t0
    man = {
        "manifest_version": 1,
        "subcommand": sub,
        "bundle": bundle if sub == "repro" else None,
        "config": config,
        "config_hash": reports.config_hash({"subcommand": sub, "bundle": bundle, "config": config}),
        "seed": seed,
        "threads": threads,
        "versions": reports.versions(),
        "wall_time_s": wall,
        "result": result,
    }
    reports.write_json(out / "manifest.json", man)
    print(json.dumps({k: v for k, v in result.items() if k != "artifacts"}, default=reports._jsonable))
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))
