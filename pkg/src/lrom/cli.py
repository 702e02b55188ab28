"""Command-line driver: ``lrom {offline,online,evaluate,fom,elbow}``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O or artifact error.
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import reports
from .clustering import elbow_scan
from .errors import ArtifactError, ConfigError, LromError, NumericError, TrainingError
from .rom import TIMING_SCOPE, evaluate, model_summary, train, train_with_global
from .sampling import generate
from .store import load_model, manifest_digest, save_model

log = logging.getLogger("lrom")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("LROM_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigError(f"LROM_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def _load_doc(args):
    if not args.config:
        raise ConfigError("--config is required")
    return cfgmod.load(args.config, args.seed_override)


def _paths(args, doc):
    out = doc.get("output", {})
    model = args.model or out.get("model_dir")
    report = args.out or out.get("report_dir") or (_sibling(model, "report") if model else None)
    return model, report


def _sibling(model, what):
    # outputs never go inside the model directory, which must stay byte-reproducible
    m = Path(model)
    return m.parent / f"{m.name}_{what}"


def _mu_list(values, dim):
    pts = []
    for v in values:
        parts = [float(x) for x in v.replace(",", " ").split()]
        if len(parts) != dim:
            raise ConfigError(f"--mu {v!r} has {len(parts)} values, the parameter space has {dim}")
        pts.append(parts)
    return np.array(pts, dtype=float)


def _query_points(args, domain):
    if args.mu:
        return _mu_list(args.mu, domain.dim)
    if args.samples:
        return generate(args.kind, args.samples, domain, args.seed).points
    raise ConfigError("give --mu values or --samples N")


def _offline_tables(model):
    deim_rows = [(k, len(c.members), c.A.Q, c.f.Q, f"{c.A.pattern.checksum():016x}")
                 for k, c in enumerate(model.deim.clusters)]
    sizes = np.bincount(model.store.assignment, minlength=model.store.n_clusters)
    rb_rows = [(k, int(sizes[k]), b.retained_count) for k, b in enumerate(model.store.bases)]
    sv_a = [(k, i, s) for k, c in enumerate(model.deim.clusters) for i, s in enumerate(c.A.singular_values)]
    sv_f = [(k, i, s) for k, c in enumerate(model.deim.clusters) for i, s in enumerate(c.f.singular_values)]
    sv_u = [(k, i, s) for k, b in enumerate(model.store.bases) for i, s in enumerate(b.singular_values)]
    return deim_rows, rb_rows, sv_a, sv_f, sv_u


def _write_offline_report(report, model, tag, seconds):
    deim_rows, rb_rows, sv_a, sv_f, sv_u = _offline_tables(model)
    d = Path(report)
    reports.write_csv(d / f"{tag}deim_clusters.csv", ["cluster", "members", "Q_a", "Q_f", "pattern_checksum"],
                      deim_rows)
    reports.write_csv(d / f"{tag}rb_clusters.csv", ["cluster", "members", "N"], rb_rows)
    reports.write_csv(d / f"{tag}sv_deim_matrix.csv", ["cluster", "index", "sigma"], sv_a)
    reports.write_csv(d / f"{tag}sv_deim_vector.csv", ["cluster", "index", "sigma"], sv_f)
    reports.write_csv(d / f"{tag}sv_rb.csv", ["cluster", "index", "sigma"], sv_u)
    return {**model_summary(model), "offline_seconds": seconds}


def cmd_offline(args):
    doc = _load_doc(args)
    cfg = cfgmod.to_rom_config(doc, _threads(args))
    model_dir, report = _paths(args, doc)
    if not model_dir:
        raise ConfigError("no model directory: pass --model or set output.model_dir")
    t0 = time.perf_counter()
    if doc.get("rom", {}).get("train_global", False):
        local, glob = train_with_global(cfg)
    else:
        local, glob = train(cfg), None
    seconds = time.perf_counter() - t0
    save_model(local, model_dir, glob)
    summary = {"local": _write_offline_report(report, local, "", seconds), "model_dir": str(model_dir),
               "manifest_sha256": manifest_digest(model_dir)}
    if glob is not None:
        summary["global"] = _write_offline_report(report, glob, "global_", None)
    # timings live in the report, never in the model directory
    reports.write_json(Path(report) / "offline_report.json", summary)
    print(f"offline: model written to {model_dir} (manifest {summary['manifest_sha256'][:16]})")
    return EXIT_OK


def _need_model(args):
    if not args.model:
        raise ConfigError("--model is required")
    return load_model(args.model)


def cmd_online(args):
    local, glob = _need_model(args)
    model = glob if args.use_global else local
    if model is None:
        raise ArtifactError("model directory has no global baseline")
    pts = _query_points(args, model.config.geometry.domain)
    out = Path(args.out or _sibling(args.model, "online"))
    rows, fields = [], []
    M = pts.shape[1]
    for i, mu in enumerate(pts):
        sol = model.solve(mu)
        t = sol.timings
        rows.append([i, *mu, sol.clusters[0], sol.clusters[1], len(sol.u_N), t["theta"], t["assembly"],
                     t["solve"], t["reconstruction"], t["total"], sol.condition, sol.warning or ""])
        fields.append(sol.u_hat)
    header = ["index", *[f"mu{j + 1}" for j in range(M)], "deim_cluster", "rb_cluster", "N", "t_theta",
              "t_assembly", "t_solve", "t_reconstruction", "t_total", "condition", "warning"]
    reports.write_csv(out / "online.csv", header, rows)
    F = np.column_stack(fields)
    reports.write_csv(out / "solutions.csv", ["dof", *[f"q{i}" for i in range(len(pts))]],
                      [[j, *F[j]] for j in range(F.shape[0])])
    print(f"online: {len(rows)} queries written to {out}")
    return EXIT_OK


_EVAL_COLS = ["index", "deim_cluster", "rb_cluster", "N", "Q_a", "Q_f", "rel_l2", "rel_h1", "deim_linf_a",
              "deim_linf_f", "pattern_misses", "fom_time", "rom_time", "speedup", "condition"]


def _eval_rows(rep, M):
    header = [*_EVAL_COLS[:1], *[f"mu{j + 1}" for j in range(M)], *_EVAL_COLS[1:]]
    rows = [[r["index"], *r["mu"], *[r[c] for c in _EVAL_COLS[1:]]] for r in rep.rows]
    return header, rows


def cmd_evaluate(args):
    local, glob = _need_model(args)
    if args.config:
        kind, n, seed = cfgmod.test_spec(_load_doc(args))
    else:
        kind, n, seed = args.kind, args.samples or 100, args.seed
    domain = local.config.geometry.domain
    test = generate(kind, n, domain, seed)
    out = Path(args.out or _sibling(args.model, "evaluate"))
    table, summary = [], {"test": {"kind": kind, "n": n, "seed": seed}, "timing_scope": TIMING_SCOPE}
    for tag, model in (("local", local), ("global", glob)):
        if model is None:
            continue
        rep = evaluate(model, test, local.runner)
        header, rows = _eval_rows(rep, domain.dim)
        reports.write_csv(out / f"{tag}_errors.csv", header, rows)
        agg = rep.aggregates()
        agg["total_pattern_misses"] = int(rep.column("pattern_misses").sum())
        summary[tag] = agg
        table.append([tag, agg["max_Q_a"], agg["max_Q_f"], agg["max_N"], 1e3 * agg["median_rom_time"],
                      1e3 * agg["median_fom_time"], agg["median_fom_time"] / agg["median_rom_time"],
                      agg["mean_rel_l2"], agg["max_rel_l2"], agg["mean_rel_h1"], agg["max_rel_h1"],
                      agg["mean_deim_linf_a"], agg["mean_deim_linf_f"]])
    reports.write_csv(out / "comparison.csv",
                      ["model", "max_Q_a", "max_Q_f", "max_N", "online_ms", "fom_ms", "speedup",
                       "mean_rel_l2", "max_rel_l2", "mean_rel_h1", "max_rel_h1", "mean_deim_linf_a",
                       "mean_deim_linf_f"], table)
    reports.write_json(out / "summary.json", summary)
    for row in table:
        print(f"evaluate[{row[0]}]: mean rel_l2 {row[7]:.3e}, max N {row[3]}, speedup {row[6]:.1f}x")
    return EXIT_OK


def cmd_fom(args):
    doc = _load_doc(args)
    cfg = cfgmod.to_rom_config(doc)
    runner = cfg.runner()
    pts = _mu_list(args.mu or [], cfg.geometry.domain.dim)
    if len(pts) != 1:
        raise ConfigError("fom needs exactly one --mu")
    system, u, seconds = runner.solve(pts[0])
    space = runner.space
    xy = space.mesh.node_coords
    d = space.dofs_per_node
    act = system.active_map.active.reshape(-1, d).all(axis=1)
    free = system.active_map.free.reshape(-1, d).all(axis=1)
    U = np.where(system.active_map.active, u, np.nan).reshape(-1, d)  # masked where inactive
    names = ["u"] if d == 1 else ["ux", "uy"]
    out = Path(args.out or _paths(args, doc)[1] or ".")
    reports.write_csv(out / "fom_field.csv", ["node", "x", "y", *names, "active", "free"],
                      [[i, *xy[i], *U[i], int(act[i]), int(free[i])] for i in range(len(xy))])
    reports.write_json(out / "fom_stats.json", {**system.stats, "mu": pts[0], "seconds": seconds})
    print(f"fom: {system.stats['free_dofs']} free DOFs, field written to {out / 'fom_field.csv'}")
    return EXIT_OK


def cmd_elbow(args):
    doc = _load_doc(args)
    cfg = cfgmod.to_rom_config(doc)
    ks = args.k or doc["clustering"].get("elbow_k") or list(range(1, 21))
    if args.set == "deim":
        pts = generate(cfg.sampling_deim, cfg.n_train_deim, cfg.geometry.domain, cfg.seed_deim)
    else:
        pts = generate(cfg.sampling_rb, cfg.n_train, cfg.geometry.domain, cfg.seed_rb)
    table = elbow_scan(pts.points, sorted(ks), seed=cfg.seed_cluster)
    out = Path(args.out or _paths(args, doc)[1] or ".")
    reports.write_csv(out / "elbow.csv", ["k", "variance"], table)
    print(f"elbow: {len(table)} rows written to {out / 'elbow.csv'}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="lrom", description="Localized reduced basis models for unfitted domains.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        sp.add_argument("--config", metavar="PATH")
        if model:
            sp.add_argument("--model", metavar="DIR")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed-override", type=int, metavar="INT")
        sp.add_argument("--threads", type=int, metavar="INT")

    def queries(sp):
        sp.add_argument("--mu", action="append", help="parameter vector, e.g. --mu 1.0 or --mu '1.0,0.3'")
        sp.add_argument("--samples", type=int, metavar="N")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--kind", default="uniform_random",
                        choices=["uniform_random", "latin_hypercube", "tensor_grid"])

    sp = sub.add_parser("offline", help="train localized DEIM and RB models")
    common(sp)
    sp.set_defaults(func=cmd_offline)

    sp = sub.add_parser("online", help="reduced solves for given parameters")
    common(sp)
    queries(sp)
    sp.add_argument("--global", dest="use_global", action="store_true", help="use the global baseline")
    sp.set_defaults(func=cmd_online)

    sp = sub.add_parser("evaluate", help="ROM vs FOM errors and speedups on a test set")
    common(sp)
    queries(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("fom", help="solve and export one full-order field")
    common(sp, model=False)
    sp.add_argument("--mu", action="append")
    sp.set_defaults(func=cmd_fom)

    sp = sub.add_parser("elbow", help="k-means variance table")
    common(sp, model=False)
    sp.add_argument("--k", type=int, nargs="+")
    sp.add_argument("--set", choices=["deim", "rb"], default="deim")
    sp.set_defaults(func=cmd_elbow)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TrainingError) as exc:
        print(f"lrom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"lrom: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArtifactError, OSError) as exc:
        print(f"lrom: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LromError as exc:
        print(f"lrom: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
