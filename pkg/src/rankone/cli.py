"""Command-line experiment runner.

Subcommands::

    rankone detect       build a detector, write it, print a summary row
    rankone approximate  run recoveries and report cost and error per trial
    rankone regimes      tabulate cost bounds and detector sizes over (d, eps)
    rankone lowerbound   evade budgets with the fooling families
    rankone dispersion   exact dispersion of a point-set file

Exit codes: 0 success, 2 usage or parse error, 3 a bound or error check
failed, 4 a resource limit was hit.
"""

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import adversary, detectors, pointsets, recover
from .errors import DomainError, NumericError, ResourceError, UsageError
from .tensor_model import Regime, SmoothnessClass, stream

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_RESOURCE = 0, 2, 3, 4

APPROX_COLUMNS = (
    "seed", "regime", "d", "eps", "detector_size", "m", "detector_evals",
    "interp_evals", "total", "bound", "measured_error", "pass",
)
DETECT_COLUMNS = ("regime", "r", "M", "d", "eps", "mode", "size", "params")
REGIME_COLUMNS = (
    "r", "M", "regime", "tractability", "d", "eps", "mode", "detector_size", "m",
    "actual", "bound", "halton_baseline", "halton_saturated",
)
LOWER_COLUMNS = ("regime", "d", "budget", "family_size", "evaded_member", "witnessed_error")

# flag name -> (type, default); defaults apply after the config file
OPTIONS = {
    "r": (int, None),
    "M": (float, None),
    "d": (str, None),
    "eps": (str, None),
    "trials": (int, 10),
    "seed": (int, 0),
    "mode": (str, None),
    "c1": (float, 1.0),
    "regime_override": (str, None),
    "out": (str, None),
    "format": (str, "csv"),
    "threads": (int, 1),
    "pointset_out": (str, None),
    "pointset": (str, None),
    "source": (str, "generated"),
    "budget": (int, None),
    "points": (str, "random"),
}


class CheckFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing


def parse_int_list(text: str) -> list:
    """``"3"``, ``"1,2,4"`` or ``"1..6"`` (inclusive)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty integer list {text!r}")
    return out


def parse_float_list(text: str) -> list:
    """Comma-separated floats; ``2^-k`` style entries are allowed (``"2^-2..2^-10"`` halves)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if ".." in part and part.startswith("2^"):
            a, b = (int(p.strip()[2:]) for p in part.split(".."))
            step = 1 if b >= a else -1
            out.extend(2.0**k for k in range(a, b + step, step))
        elif part.startswith("2^"):
            out.append(2.0 ** int(part[2:]))
        elif part:
            out.append(float(part))
    if not out:
        raise UsageError(f"empty list {text!r}")
    return out


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment; keys as the long flags, dashes or underscores."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{k}: unknown key {key!r}")
        out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--r", type=int)
    common.add_argument("--M", type=float)
    common.add_argument("--d", help="dimension, list (1,2,3) or range (1..6)")
    common.add_argument("--eps", help="accuracy or comma list; 2^-2..2^-10 expands to halvings")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["verified", "formula"])
    common.add_argument("--c1", type=float)
    common.add_argument("--regime-override", dest="regime_override", choices=[g.value for g in Regime])
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--threads", type=int)

    p = argparse.ArgumentParser(prog="rankone", description="Rank-one tensor recovery experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("detect", parents=[common], help="build a detector point set")
    s.add_argument("--pointset-out", dest="pointset_out", help="where to write the point set")
    s = sub.add_parser("approximate", parents=[common], help="run recoveries")
    s.add_argument("--source", choices=["generated", "zero"])
    s.add_argument("--pointset", help="replay a saved detector instead of building one")
    sub.add_parser("regimes", parents=[common], help="cost bounds and sizes over (d, eps)")
    s = sub.add_parser("lowerbound", parents=[common], help="fooling-family demonstrations")
    s.add_argument("--budget", type=int, help="number of points (default: family size - 1)")
    s.add_argument("--points", choices=["random", "hitting"])
    s = sub.add_parser("dispersion", parents=[common], help="exact dispersion of a point-set file")
    s.add_argument("pointset_file", nargs="?", help="point-set file")
    return p


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    cfg = {k: v[1] for k, v in OPTIONS.items()}
    if getattr(ns, "config", None):
        for k, v in read_config_file(ns.config).items():
            typ = OPTIONS[k][0]
            try:
                cfg[k] = typ(v)
            except ValueError:
                raise UsageError(f"config key {k}: cannot parse {v!r}") from None
    for k in OPTIONS:
        v = getattr(ns, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["mode"] not in (None, "verified", "formula"):
        raise UsageError(f"mode must be verified or formula, got {cfg['mode']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {cfg['format']!r}")
    if cfg["regime_override"] is not None:
        cfg["regime_override"] = Regime(cfg["regime_override"])
    if cfg["threads"] < 1:
        raise UsageError("threads must be >= 1")
    return cfg


def require(cfg: dict, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


# ---------------------------------------------------------------------------
# output


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def render(rows: list, columns, kind: str) -> str:
    if kind == "json":
        clean = [{c: _jsonable(r.get(c)) for c in columns} for r in rows]
        return json.dumps(clean, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, int) and abs(v) > 2**63:
        return str(v)
    return v


def emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def single(values: list, name: str):
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value for this command")
    return values[0]


# ---------------------------------------------------------------------------
# commands


def cmd_detect(cfg: dict) -> int:
    require(cfg, "r", "M", "d", "eps")
    d = single(parse_int_list(cfg["d"]), "d")
    eps = single(parse_float_list(cfg["eps"]), "eps")
    mode = cfg["mode"] or "verified"
    cls = SmoothnessClass(cfg["r"], cfg["M"], d)
    P = detectors.build_detector(cls, eps, mode, cfg["regime_override"])
    params = P.meta["params"]
    if cfg["pointset_out"]:
        P.write(cfg["pointset_out"], header=P.meta["header"])
    row = {
        "regime": params.regime.value, "r": cls.r, "M": cls.M, "d": d, "eps": eps, "mode": mode,
        "size": len(P), "params": ";".join(f"{k}={fmt(v)}" for k, v in params.items()),
    }
    emit(render([row], DETECT_COLUMNS, cfg["format"]), cfg["out"])
    return EXIT_OK


def cmd_approximate(cfg: dict) -> int:
    require(cfg, "r", "M", "d", "eps")
    mode = cfg["mode"] or "verified"
    config = recover.Config(mode=mode, c1=cfg["c1"], regime=cfg["regime_override"])
    if cfg["trials"] < 1:
        raise UsageError("trials must be >= 1")
    replay = pointsets.read_pointset(cfg["pointset"]) if cfg["pointset"] else None
    rows, ok = [], True
    for d in parse_int_list(cfg["d"]):
        for eps in parse_float_list(cfg["eps"]):
            cls = SmoothnessClass(cfg["r"], cfg["M"], d)
            if replay is not None and replay.d != d:
                raise UsageError(f"replayed point set has d={replay.d}, expected {d}")
            trial_rows = recover.cost_actual_vs_bound(
                cls, eps, cfg["trials"], cfg["seed"], config, cfg["threads"], cfg["source"], replay
            )
            for t in trial_rows:
                ok &= t.passed
                rows.append({
                    "seed": t.seed, "regime": t.regime, "d": t.d, "eps": t.eps,
                    "detector_size": t.detector_size, "m": t.m, "detector_evals": t.detector_evals,
                    "interp_evals": t.interp_evals, "total": t.total, "bound": t.bound,
                    "measured_error": t.measured_error, "pass": t.passed,
                })
    emit(render(rows, APPROX_COLUMNS, cfg["format"]), cfg["out"])
    return EXIT_OK if ok else EXIT_CHECK


def cmd_regimes(cfg: dict) -> int:
    require(cfg, "r", "M", "d", "eps")
    mode = cfg["mode"] or "formula"
    rows = []
    for d in parse_int_list(cfg["d"]):
        cls = SmoothnessClass(cfg["r"], cfg["M"], d)
        regime = cfg["regime_override"] or cls.regime
        for eps in parse_float_list(cfg["eps"]):
            size = detectors.detector_cardinality(cls, eps, mode, regime)
            m = recover.choose_m(cls, eps, cfg["c1"])
            base = pointsets.halton_baseline_size(cls, eps)
            rows.append({
                "r": cls.r, "M": cls.M, "regime": regime.value,
                "tractability": adversary.classify_tractability(cls.r, cls.M).value,
                "d": d, "eps": eps, "mode": mode, "detector_size": size, "m": m, "actual": size + m,
                "bound": recover.cost_bound(cls, eps, cfg["c1"], regime),
                "halton_baseline": base.size, "halton_saturated": base.saturated,
            })
    emit(render(rows, REGIME_COLUMNS, cfg["format"]), cfg["out"])
    return EXIT_OK


def cmd_lowerbound(cfg: dict) -> int:
    require(cfg, "r", "M", "d")
    r, M = cfg["r"], cfg["M"]
    regime = cfg["regime_override"] or SmoothnessClass(r, M).regime
    rows = []
    for d in parse_int_list(cfg["d"]):
        cls = SmoothnessClass(r, M, d)
        rng = stream(cfg["seed"], d)
        if regime == Regime.SMALL:
            rows.append(_small_row(cls, cfg, rng))
            continue
        if regime == Regime.LARGE:
            if d > 12:
                raise UsageError("the Large family demonstration is limited to d <= 12")
            fam = adversary.fooling_family_large(r, M, d)
            eps = 0.5
        else:
            require(cfg, "eps")
            eps = single(parse_float_list(cfg["eps"]), "eps")
            fam = adversary.fooling_family_moderate(r, M, d, eps)
        budget = fam.size - 1 if cfg["budget"] is None else cfg["budget"]
        if budget < 0:
            raise UsageError("budget must be >= 0")
        if cfg["points"] == "hitting":
            P = adversary.hitting_points(fam)
            P = pointsets.PointSet(d, P.points[:budget], P.provenance)
        else:
            P = adversary.random_points(budget, d, rng)
        k, err = adversary.witnessed_error(fam, P, cls, eps)
        rows.append({
            "regime": regime.value, "d": d, "budget": budget, "family_size": fam.size,
            "evaded_member": k, "witnessed_error": err,
        })
    emit(render(rows, LOWER_COLUMNS, cfg["format"]), cfg["out"])
    return EXIT_OK


def _small_row(cls, cfg, rng):
    cap = adversary.small_point_cap(cls.r, cls.d)
    budget = cap if cfg["budget"] is None else cfg["budget"]
    pts = rng.random((budget, cls.d))
    f = adversary.fooling_family_small(cls.r, cls.M, cls.d, pts)
    if budget and np.any(f(pts) != 0.0):
        raise CheckFailed("fooling function is non-zero on a sample point")
    return {
        "regime": Regime.SMALL.value, "d": cls.d, "budget": budget, "family_size": 1,
        "evaded_member": 0, "witnessed_error": f.sup_norm,
    }


def cmd_dispersion(cfg: dict, path: Optional[str]) -> int:
    path = path or cfg["pointset"]
    if not path:
        raise UsageError("a point-set file is required")
    P = pointsets.read_pointset(path)
    if P.d > pointsets.VERIFIED_MAX_D:
        raise ResourceError(f"exact dispersion from the command line is limited to d <= {pointsets.VERIFIED_MAX_D}")
    v = pointsets.dispersion_exact(P)
    emit(f"{v:.12g}\n", cfg["out"])
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve(ns)
        if ns.command == "detect":
            return cmd_detect(cfg)
        if ns.command == "approximate":
            return cmd_approximate(cfg)
        if ns.command == "regimes":
            return cmd_regimes(cfg)
        if ns.command == "lowerbound":
            return cmd_lowerbound(cfg)
        return cmd_dispersion(cfg, ns.pointset_file)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"rankone: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, NumericError, MemoryError) as exc:
        print(f"rankone: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (CheckFailed, AssertionError) as exc:
        print(f"rankone: check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
