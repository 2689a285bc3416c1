"""Configuration ingestion, analysis orchestration, report emission.

Subcommands: certify, search, reach, holder, identities. Reports are
deterministic byte for byte for a fixed config and package version: no
timestamps, sorted keys, seeded sampling throughout.

Exit codes: 0 all requested certifications succeeded, 2 when a
certification fails its spanning or decrease condition, 1 on errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import expr as ex
from .engine import (ControlSystem, GroupSpec, Structure, TargetDef,
                     VectorFieldDef, certify_fat, certify_manifold,
                     certify_point, estimate_bounds, search_groups)
from .errors import (ConfigError, NoGroupQualifiesError, NotPositiveBasisError,
                     StlaError)
from .identities import system_identity_report
from .sampling import circle_directions, unit_directions
from .trajectories import (FieldRuntime, SwitchSchedule, expansion_residual_order,
                           holder_fit, integrate_switched, reach_target,
                           write_holder_csv, write_residual_csv,
                           write_trajectory_csv)

TASKS = ("certify", "search", "reach", "holder", "identities")


@dataclass
class AnalysisConfig:
    system: ControlSystem
    target: TargetDef
    points: list
    tasks: list
    groups: list | None = None
    variant: str = "strict-extra"
    restricted: list | None = None
    seed: int = 0
    zero_tol: float = 1e-9
    reach_tol: float = 1e-6
    search_params: dict = field(default_factory=dict)
    holder_params: dict = field(default_factory=dict)
    reach_params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _need(doc, key, where, path):
    if key not in doc:
        raise ConfigError(f"missing required key '{key}'", path, where)
    return doc[key]


def _parse_expr(text, variables, where, path):
    try:
        return ex.parse(text, variables)
    except StlaError as exc:
        raise ConfigError(f"bad expression {text!r}: {exc}", path, where) from exc


def load_config(path):
    """Parse and validate a config file; all expressions parse eagerly."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("file not found", path) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", path,
                          f"line {exc.lineno}, column {exc.colno}") from exc

    sys_doc = _need(doc, "system", "top level", path)
    variables = _need(sys_doc, "variables", "system", path)
    if (not isinstance(variables, list) or not variables
            or len(set(variables)) != len(variables)):
        raise ConfigError("variables must be a non-empty list of unique names",
                          path, "system.variables")
    n = len(variables)

    fields = {}
    for name, comps in _need(sys_doc, "fields", "system", path).items():
        if not isinstance(comps, list) or len(comps) != n:
            raise ConfigError(
                f"field '{name}' needs exactly {n} component expressions",
                path, f"system.fields.{name}")
        parsed = [_parse_expr(c, variables, f"system.fields.{name}[{i}]", path)
                  for i, c in enumerate(comps)]
        fields[name] = VectorFieldDef(name, tuple(parsed))
    if not fields:
        raise ConfigError("at least one field is required", path, "system.fields")

    st_doc = sys_doc.get("structure", {"kind": "general"})
    kind = st_doc.get("kind", "general")
    if kind not in ("general", "convex", "symmetric", "affine"):
        raise ConfigError(f"unknown structure kind {kind!r}", path,
                          "system.structure.kind")
    drift = st_doc.get("drift")
    controls = st_doc.get("controls", [])
    for nm in ([drift] if drift else []) + list(controls):
        if nm not in fields:
            raise ConfigError(f"structure references undefined field '{nm}'",
                              path, "system.structure")
    structure = Structure(kind, drift, tuple(controls),
                          tuple(st_doc.get("levels", (-1.0, 0.0, 1.0))))
    system = ControlSystem(list(variables), fields, structure,
                           float(sys_doc.get("radius", 1.0)))

    tg_doc = _need(doc, "target", "top level", path)
    tkind = _need(tg_doc, "kind", "target", path)
    eqs = [_parse_expr(e, variables, f"target.equations[{i}]", path)
           for i, e in enumerate(tg_doc.get("equations", []))]
    ineqs = [_parse_expr(e, variables, f"target.inequalities[{i}]", path)
             for i, e in enumerate(tg_doc.get("inequalities", []))]
    comparison = tg_doc.get("comparison")
    if comparison is not None:
        comparison = _parse_expr(comparison, variables, "target.comparison", path)
    try:
        target = TargetDef(tkind, tuple(eqs), tuple(ineqs), comparison)
    except StlaError as exc:
        raise ConfigError(str(exc), path, "target") from exc
    if target.kind in ("manifold", "manifold-with-boundary") and target.h >= n:
        raise ConfigError("manifold targets need 1 <= h <= n-1 equations",
                          path, "target.equations")

    points = _need(doc, "points", "top level", path)
    if not isinstance(points, list) or not points:
        raise ConfigError("points must be a non-empty list", path, "points")
    for i, p in enumerate(points):
        if not isinstance(p, list) or len(p) != n:
            raise ConfigError(f"point {i} must have {n} coordinates", path,
                              f"points[{i}]")

    an = doc.get("analysis", {})
    tasks = an.get("tasks", ["certify"])
    if not tasks or any(t not in TASKS for t in tasks):
        raise ConfigError(f"tasks must be a non-empty subset of {TASKS}",
                          path, "analysis.tasks")

    groups = None
    if "groups" in an:
        groups = []
        palette = system.palette()
        for i, g in enumerate(an["groups"]):
            names = _need(g, "fields", f"analysis.groups[{i}]", path)
            for nm in names:
                if nm not in palette:
                    raise ConfigError(
                        f"group references '{nm}' which is not in the palette "
                        f"(available: {sorted(palette)})",
                        path, f"analysis.groups[{i}]")
            try:
                groups.append(GroupSpec(tuple(names), int(g.get("order", 1))))
            except StlaError as exc:
                raise ConfigError(str(exc), path, f"analysis.groups[{i}]") from exc

    restricted = an.get("restricted")
    if restricted is not None:
        for nm in restricted:
            if nm not in variables:
                raise ConfigError(f"restricted coordinate '{nm}' is not a variable",
                                  path, "analysis.restricted")
        restricted = [variables.index(nm) for nm in restricted]

    tol_doc = an.get("tolerances", {})
    return AnalysisConfig(
        system=system, target=target, points=[list(map(float, p)) for p in points],
        tasks=list(tasks), groups=groups,
        variant=an.get("variant", "strict-extra"), restricted=restricted,
        seed=int(doc.get("seed", 0)),
        zero_tol=float(tol_doc.get("zero", 1e-9)),
        reach_tol=float(tol_doc.get("reach", 1e-6)),
        search_params=dict(an.get("search", {})),
        holder_params=dict(an.get("holder", {})),
        reach_params=dict(an.get("reach", {})),
        raw=doc)


# ---------------------------------------------------------------------------
# orchestration

def _error_entry(exc):
    return {"error": type(exc).__name__, "message": str(exc)}


def _certify_one(cfg, x_o, groups):
    sys_, tg = cfg.system, cfg.target
    bounds = estimate_bounds(sys_, x_o, seed=cfg.seed)
    if tg.kind == "fat":
        cert = certify_fat(sys_, tg, x_o, groups, bounds=bounds, tol=cfg.zero_tol)
    elif tg.kind == "point":
        cert = certify_point(sys_, x_o, groups, bounds=bounds, tol=cfg.zero_tol)
    else:
        cert = certify_manifold(sys_, tg, x_o, groups, cfg.variant,
                                restricted=cfg.restricted, bounds=bounds,
                                tol=cfg.zero_tol, seed=cfg.seed)
    return cert, bounds


def _searched_groups(cfg, x_o):
    sp = cfg.search_params
    res = search_groups(
        cfg.system, x_o,
        None if cfg.target.kind == "point" else cfg.target,
        k_max=int(sp.get("k_max", 4)),
        length_max=int(sp.get("length_max", 4)),
        budget=int(sp.get("budget", 100000)),
        tol=cfg.zero_tol, fat=cfg.target.kind == "fat")
    return res


def run(cfg, out_dir=None, verbose=False):
    """Execute the configured tasks point by point; returns (report, exit code)."""
    report = {
        "version": __version__,
        "seed": cfg.seed,
        "config_digest": hashlib.sha256(
            json.dumps(cfg.raw, sort_keys=True).encode()).hexdigest(),
        "target_kind": cfg.target.kind,
        "points": [],
    }
    exit_code = 0
    artifacts = []

    for pi, x_o in enumerate(cfg.points):
        entry = {"point": x_o}
        cert = None
        bounds = None
        groups = cfg.groups
        try:
            if "search" in cfg.tasks or groups is None:
                sres = _searched_groups(cfg, x_o)
                entry["search"] = {
                    "groups": [{"fields": list(g.fields), "order": g.order}
                               for g in sres.groups],
                    "evaluated": sres.evaluated,
                    "budget_exhausted": sres.budget_exhausted,
                }
                if groups is None:
                    groups = sres.groups
            needs_cert = any(t in cfg.tasks for t in ("certify", "reach", "holder"))
            if needs_cert:
                if not groups:
                    raise NoGroupQualifiesError(
                        "no candidate groups configured or found")
                cert, bounds = _certify_one(cfg, x_o, groups)
                entry["certificate"] = cert.to_dict()
        except (NoGroupQualifiesError, NotPositiveBasisError) as exc:
            entry["certify_failed"] = _error_entry(exc)
            exit_code = max(exit_code, 2)
            report["points"].append(entry)
            continue
        except StlaError as exc:
            entry["error"] = _error_entry(exc)
            exit_code = 1
            report["points"].append(entry)
            continue

        if "reach" in cfg.tasks and cert is not None:
            rp = cfg.reach_params
            starts = rp.get("starts")
            if starts is None:
                n = cfg.system.dim
                dirs = (circle_directions(8) if n == 2
                        else unit_directions(8, n, seed=cfg.seed))
                r0 = float(rp.get("radius", 1e-3))
                starts = [list(np.asarray(x_o) + r0 * d) for d in dirs]
            steps = int(rp.get("steps_per_leg", 1000))
            runtime = FieldRuntime(cfg.system)
            reaches = []
            for si, start in enumerate(starts):
                try:
                    est = reach_target(cfg.system, cfg.target, x_o, cert,
                                       tuple(start), bounds=bounds,
                                       reach_tol=cfg.reach_tol,
                                       steps_per_leg=steps, runtime=runtime)
                    reaches.append(est.to_dict())
                    if out_dir is not None and est.reached and est.tau is not None:
                        specs = [c.group for c in cert.groups]
                        if cfg.target.kind == "fat":
                            sched = SwitchSchedule.balanced(
                                cert.groups[0].group.fields, float(est.tau[0]))
                        else:
                            sched = SwitchSchedule.from_groups(specs, est.tau)
                        sim = integrate_switched(cfg.system, sched, start,
                                                 steps_per_leg=steps,
                                                 runtime=runtime)
                        name = f"trajectory_p{pi}_s{si}.csv"
                        write_trajectory_csv(f"{out_dir}/{name}", sim)
                        artifacts.append(name)
                except StlaError as exc:
                    reaches.append(_error_entry(exc))
            entry["reach"] = reaches
            # residual-order table for the leading group
            spec = cert.groups[0].group
            u = (cfg.target.inequalities[0] if cfg.target.kind == "fat"
                 else cfg.target.equations[0] if cfg.target.equations else None)
            if u is not None:
                fit = expansion_residual_order(
                    cfg.system, list(spec.fields), u, x_o, spec.order,
                    steps_per_leg=min(steps, 400))
                entry["expansion_fit"] = {
                    "slope": fit.slope, "degenerate": fit.degenerate}
                if out_dir is not None:
                    name = f"residual_order_p{pi}.csv"
                    write_residual_csv(f"{out_dir}/{name}", fit)
                    artifacts.append(name)

        if "holder" in cfg.tasks and cert is not None:
            hp = cfg.holder_params
            try:
                fit = holder_fit(
                    cfg.system, cfg.target, x_o, cert,
                    radii=np.geomspace(float(hp.get("r_min", 1e-4)),
                                       float(hp.get("r_max", 1e-2)),
                                       int(hp.get("radii", 8))),
                    n_dirs=int(hp.get("directions", 16)),
                    bounds=bounds, reach_tol=cfg.reach_tol,
                    steps_per_leg=int(hp.get("steps_per_leg", 200)),
                    seed=cfg.seed)
                entry["holder"] = fit.to_dict()
                if out_dir is not None:
                    name = f"holder_p{pi}.csv"
                    write_holder_csv(f"{out_dir}/{name}", fit)
                    artifacts.append(name)
            except StlaError as exc:
                entry["holder"] = _error_entry(exc)
                exit_code = max(exit_code, 1)

        report["points"].append(entry)

    if "identities" in cfg.tasks:
        results = system_identity_report(cfg.system, cfg.points[0],
                                         seed=cfg.seed, tol=cfg.zero_tol)
        report["identities"] = [r.to_dict() for r in results]
        if any(not r.ok for r in results):
            exit_code = max(exit_code, 1)

    report["artifacts"] = sorted(artifacts)
    report["exit_code"] = exit_code
    return report, exit_code


# ---------------------------------------------------------------------------
# rendering

def _format_text(report):
    lines = [f"stla report (version {report['version']})",
             f"target kind: {report['target_kind']}",
             f"seed: {report['seed']}"]
    for entry in report["points"]:
        pt = ", ".join(f"{v:g}" for v in entry["point"])
        lines.append(f"\npoint ({pt}):")
        if "certificate" in entry:
            c = entry["certificate"]
            lines.append(f"  certified: {c['theorem']} order {c['k_bar']} "
                         f"(exponent {c['exponent']:g})")
            for g in c["groups"]:
                lines.append(f"    group {g['fields']} order {g['order']}")
        if "certify_failed" in entry:
            e = entry["certify_failed"]
            lines.append(f"  certification failed: {e['error']}: {e['message']}")
        if "error" in entry:
            e = entry["error"]
            lines.append(f"  error: {e['error']}: {e['message']}")
        if "search" in entry:
            lines.append(f"  search: {len(entry['search']['groups'])} groups "
                         f"({entry['search']['evaluated']} candidates)")
        if "reach" in entry:
            ok = sum(1 for r in entry["reach"] if r.get("reached"))
            lines.append(f"  reach: {ok}/{len(entry['reach'])} starts reached")
        if "holder" in entry and "exponent" in entry.get("holder", {}):
            h = entry["holder"]
            lines.append(f"  holder fit: exponent {h['exponent']:.4f} "
                         f"constant {h['constant']:.4g}")
    if "identities" in report:
        bad = [r for r in report["identities"] if not r["ok"]]
        lines.append(f"\nidentities: {len(report['identities']) - len(bad)} ok, "
                     f"{len(bad)} failed")
        for r in report["identities"]:
            lines.append(f"  {r['name']}: gap {r['gap']:.3g}")
    lines.append(f"\nexit code: {report['exit_code']}")
    return "\n".join(lines) + "\n"


def write_report(report, out_dir):
    import os
    os.makedirs(out_dir, exist_ok=True)
    with open(f"{out_dir}/report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(f"{out_dir}/report.txt", "w", encoding="utf-8") as fh:
        fh.write(_format_text(report))


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="stla",
        description="small-time local attainability certification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS:
        p = sub.add_parser(name, help=f"run the {name} task")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override seed")
        p.add_argument("--tol", type=float, default=None,
                       help="override zero tolerance")
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tol is not None:
        cfg.zero_tol = args.tol
    cfg.tasks = [args.command]

    import os
    out_dir = args.out
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    try:
        report, code = run(cfg, out_dir=out_dir, verbose=args.verbose)
    except StlaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if out_dir is not None:
        write_report(report, out_dir)
    text = _format_text(report)
    if args.verbose or out_dir is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
