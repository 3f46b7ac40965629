"""Command-line front end: ``validate``, ``collect``, ``analyze``, ``report``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hplandscape import svg
from hplandscape.analysis import (AnalysisError, ice_curves, landscape_maps, modality_summary)
from hplandscape.collect import (CollectError, PlanError, SnapshotStore, load_plan, run_pipeline,
                                 surrogate_trainable, threads_from_env)
from hplandscape.dataset import (LANDSCAPE, POOLED, PER_PHASE, DatasetError, aggregate, normalize,
                                 read_csv, write_csv)
from hplandscape.models import (IGPR, ILM, SURFACES, IgprOptions, ModelError, cross_validate,
                                fit_surface_triple, format_cv_table)
from hplandscape.space import SpaceError, load_space, save_space

log = logging.getLogger("hplandscape")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


class ValidationError(Exception):
    pass


@dataclass
class RunConfig:
    data_dir: Path
    out_dir: Path
    kinds: tuple = (ILM, IGPR)
    grid: int = 51
    ice: int = 51
    alpha: float = 0.05
    bootstrap: int = 1000
    modality_seed: int = 0
    cv_folds: int = 5
    cv_seed: int = 0
    restarts: int = 8
    opt_seed: int = 0
    scope: str = POOLED
    slice_at: str = "midpoint"
    svg: bool = False


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require_file(path):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {p}")
    return p


# ---------------------------------------------------------------- validate

def cmd_validate(args):
    if not (args.plan or args.space):
        raise ValidationError("validate needs --plan or --space")
    if args.plan:
        plan, spec = load_plan(_require_file(args.plan))
        print(f"plan ok: {plan.space.n} hyperparameters, {plan.num_configs} configurations, "
              f"{len(plan.seeds)} seeds, {plan.num_phases} phases"
              + ("" if spec is None else ", surrogate defined"))
        space = plan.space
    else:
        space = load_space(_require_file(args.space))
        print(f"space ok: {', '.join(space.names)}")
    if args.dataset:
        ds = read_csv(_require_file(args.dataset), space)
        print(f"dataset ok: {len(ds)} rows, phases {ds.phases}")
    return EXIT_OK


# ---------------------------------------------------------------- collect

def cmd_collect(args):
    plan_path = _require_file(args.plan)
    plan, spec = load_plan(plan_path)
    if spec is None:
        raise ValidationError(f"{plan_path}: no 'surrogate' entry; only the built-in surrogate trainable is available")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = args.threads if args.threads else threads_from_env()
    archive = run_pipeline(plan, surrogate_trainable(spec), SnapshotStore(out / "snapshots"), threads)
    save_space(plan.space, out / "space.json")
    write_csv(archive.landscape, out / "landscape.csv")
    write_csv(archive.final, out / "final.csv")
    meta = {"plan": plan.to_json(), "surrogate": spec.to_json(),
            "chosen": [{"phase": i + 1, "conf_index": c, "seed": s} for i, (c, s) in enumerate(archive.chosen)]}
    (out / "selection.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"collected {len(archive.landscape)} landscape and {len(archive.final)} final rows into {out}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze

def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


def run_analysis(cfg: RunConfig) -> dict:
    """Aggregate, fit, cross-validate and analyze every phase; returns the summary."""
    space = load_space(_require_file(cfg.data_dir / "space.json"))
    ds = read_csv(_require_file(cfg.data_dir / "landscape.csv"), space)
    if len(ds) == 0:
        raise ValidationError("landscape dataset is empty")
    out = cfg.out_dir
    (out / "models").mkdir(parents=True, exist_ok=True)
    if cfg.svg:
        (out / "figures").mkdir(parents=True, exist_ok=True)
    emitted = []
    names = space.names
    num_configs = int(ds.select(kind=LANDSCAPE).conf.max()) + 1
    phases = ds.select(kind=LANDSCAPE).phases
    stats = {p: aggregate(ds, LANDSCAPE, p, num_configs) for p in phases}
    _, affines = normalize(stats, cfg.scope, allow_degenerate=True)

    stat_rows = []
    for p in phases:
        s = stats[p]
        for k in range(len(s)):
            stat_rows.append([p, int(s.conf[k])] + [_fmt(v) for v in s.unit[k]]
                             + [_fmt(s.iqm[k]), _fmt(s.q_lower[k]), _fmt(s.q_upper[k]), int(s.count[k])])
    _write_rows(out / "stats.csv", ["phase_index", "conf_index"] + [f"unit.{d}" for d in names]
                + ["iqm", "q_lower", "q_upper", "sample_count"], stat_rows)
    emitted.append(out / "stats.csv")

    opts = IgprOptions(restarts=cfg.restarts, opt_seed=cfg.opt_seed)
    cv_reports = []
    for kind in cfg.kinds:
        ice_rows, opt_rows = [], []
        for p in phases:
            st = stats[p]
            triple = fit_surface_triple(st, kind, opts, affines[p])
            try:
                cv = cross_validate(st, kind, cfg.cv_folds, cfg.cv_seed, affines[p], opts)
            except ModelError as e:
                raise ModelError(f"phase {p}, cross-validation ({kind}): {e}") from e
            cv_reports.append(cv)
            mpath = out / "models" / f"phase{p}_{kind}.json"
            triple.dump(mpath)
            emitted.append(mpath)
            fixed = None
            if cfg.slice_at == "best":
                fixed = st.unit[int(np.argmax(st.iqm))]
            if space.n >= 2:
                for lm in landscape_maps(triple, cfg.grid, fixed):
                    dx, dy = lm.grid.dims
                    for tag, nodes in (("max", lm.optima.maxima), ("min", lm.optima.minima)):
                        for a, b in nodes:
                            opt_rows.append([p, lm.surface, names[dx], names[dy], a, b,
                                             _fmt(lm.grid.axis[a]), _fmt(lm.grid.axis[b]),
                                             _fmt(lm.grid.values[a, b]), tag])
                    if cfg.svg:
                        f = out / "figures" / f"map_phase{p}_{kind}_{lm.surface}_{names[dx]}_{names[dy]}.svg"
                        f.write_text(svg.heatmap(lm.grid, lm.optima,
                                                 f"{kind.upper()} {lm.surface} phase {p}", names[dx], names[dy]))
                        emitted.append(f)
            for surface in SURFACES:
                for d in range(space.n):
                    ice = ice_curves(triple.surface(surface), d, st.unit, cfg.ice)
                    for a in range(ice.curves.shape[0]):
                        for g in range(ice.grid.size):
                            ice_rows.append([p, surface, names[d], int(st.conf[a]),
                                             _fmt(ice.grid[g]), _fmt(ice.curves[a, g])])
                    if cfg.svg and surface == "mean":
                        f = out / "figures" / f"ice_phase{p}_{kind}_{names[d]}.svg"
                        f.write_text(svg.curves(ice, f"{kind.upper()} ICE phase {p}", names[d]))
                        emitted.append(f)
        _write_rows(out / f"ice_{kind}.csv",
                    ["phase_index", "surface", "dim", "anchor_id", "position", "value"], ice_rows)
        _write_rows(out / f"optima_{kind}.csv",
                    ["phase_index", "surface", "dim_x", "dim_y", "node_x", "node_y", "unit_x", "unit_y",
                     "value", "kind"], opt_rows)
        emitted += [out / f"ice_{kind}.csv", out / f"optima_{kind}.csv"]

    table, results = modality_summary(ds, cfg.alpha, cfg.bootstrap, cfg.modality_seed)
    mod_rows = []
    for p in sorted(results):
        for r in results[p]:
            mod_rows.append([p, r.conf_index, _fmt(r.phi), _fmt(r.pivot), _fmt(r.p_value),
                             r.category, r.sample_count])
        if cfg.svg:
            st = stats[p]
            f = out / "figures" / f"modality_phase{p}.svg"
            f.write_text(svg.modality_scatter(st.unit, [r.category for r in results[p]], (0, 1 if space.n > 1 else 0),
                                              f"modality phase {p}", names[0], names[1] if space.n > 1 else ""))
            emitted.append(f)
    _write_rows(out / "modality.csv",
                ["phase_index", "conf_index", "phi", "pivot", "p_value", "category", "sample_count"], mod_rows)
    emitted.append(out / "modality.csv")

    summary = {
        "space": space.to_json(),
        "options": {"models": list(cfg.kinds), "grid_resolution": cfg.grid, "ice_resolution": cfg.ice,
                    "alpha": cfg.alpha, "null_replicates": cfg.bootstrap, "modality_seed": cfg.modality_seed,
                    "cv_folds": cfg.cv_folds, "cv_seed": cfg.cv_seed, "restarts": cfg.restarts,
                    "opt_seed": cfg.opt_seed, "slice_at": cfg.slice_at},
        "normalization": {"scope": cfg.scope, "affines": {str(p): affines[p].to_json() for p in phases}},
        "modality": table.to_json(),
        "cross_validation": [r.to_json() for r in cv_reports],
        "files": {str(f.relative_to(out)): _sha256(f) for f in emitted},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_analyze(args):
    data = Path(args.data)
    if not data.is_dir():
        raise ValidationError(f"data directory not found: {data}")
    kinds = {"ilm": (ILM,), "igpr": (IGPR,), "both": (ILM, IGPR)}[args.model]
    cfg = RunConfig(data, Path(args.out) if args.out else data / "analysis", kinds, args.grid,
                    args.ice, args.alpha, args.null_replicates, args.modality_seed, args.cv_folds,
                    args.cv_seed, args.restarts, args.opt_seed, args.normalize, args.slice_at, args.svg)
    if cfg.grid < 3 or cfg.ice < 2:
        raise ValidationError("--grid must be >= 3 and --ice >= 2")
    summary = run_analysis(cfg)
    print(f"wrote {len(summary['files'])} files to {cfg.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- report

def render_report(summary) -> str:
    from hplandscape.analysis import ModalityTable
    from hplandscape.models import CvReport

    rows = {int(p): v for p, v in summary["modality"].items()}
    parts = ["Modality (% of configurations)", ModalityTable(rows).format(), ""]
    by_kind = {}
    for r in summary["cross_validation"]:
        by_kind.setdefault(r["kind"], []).append(
            CvReport(r["phase"], r["kind"], r["k"], r["seed"], np.array(r["mse"]), np.array(r["mae"])))
    scope = summary["normalization"]["scope"]
    for kind, reps in by_kind.items():
        parts += [f"{kind.upper()} model fit ({reps[0].k}-fold CV, normalization {scope})",
                  format_cv_table(reps), ""]
    return "\n".join(parts)


def cmd_report(args):
    bundle = Path(args.bundle)
    summary = json.loads(_require_file(bundle / "summary.json").read_text())
    bad = [f for f, h in summary["files"].items()
           if not (bundle / f).is_file() or _sha256(bundle / f) != h]
    print(render_report(summary))
    if bad:
        print(f"hash mismatch or missing: {', '.join(bad)}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"all {len(summary['files'])} bundle files verified")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="hplandscape", description=__doc__)
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check space/plan/dataset files")
    v.add_argument("--plan")
    v.add_argument("--space")
    v.add_argument("--dataset")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("collect", help="run the phase protocol on the surrogate trainable")
    c.add_argument("--plan", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--threads", type=int, default=0)
    c.set_defaults(func=cmd_collect)

    a = sub.add_parser("analyze", help="fit surfaces and analyze a collected dataset")
    a.add_argument("--data", required=True, help="directory written by collect")
    a.add_argument("--out")
    a.add_argument("--model", choices=("ilm", "igpr", "both"), default="both")
    a.add_argument("--grid", type=int, default=51)
    a.add_argument("--ice", type=int, default=51)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--null-replicates", type=int, default=1000)
    a.add_argument("--modality-seed", type=int, default=0)
    a.add_argument("--cv-folds", type=int, default=5)
    a.add_argument("--cv-seed", type=int, default=0)
    a.add_argument("--restarts", type=int, default=8)
    a.add_argument("--opt-seed", type=int, default=0)
    a.add_argument("--normalize", choices=(POOLED, PER_PHASE), default=POOLED)
    a.add_argument("--slice-at", choices=("midpoint", "best"), default="midpoint")
    a.add_argument("--svg", action="store_true")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="print tables from an analysis bundle and verify hashes")
    r.add_argument("--bundle", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValidationError, PlanError, SpaceError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CollectError, ModelError, AnalysisError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
