"""Command line tool: configure, train, evaluate, sweep, and export.

Subcommands: train, evaluate, sweep-truncation, compare-baseline, eigen.
Every training run leaves a self-contained directory with the config
snapshot, per-iteration CSV, rendered figures, binary checkpoints, and a
JSON manifest sufficient to replay the run.

Numerical imports happen only after the --threads flag is applied: BLAS
libraries read their thread-count environment variables at import time,
and --threads 1 is the documented way to get bitwise-reproducible runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

REPLAY_RTOL = 1e-10

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepinn",
        description="singularity enriched physics-informed neural network solver",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS threads; 1 gives bitwise-reproducible runs")
    parser.add_argument("--output-root", default=None,
                        help="directory for run artifacts "
                             "(default: $SEPINN_OUTPUT_ROOT or ./runs)")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training configuration")
    t.add_argument("config", nargs="?", default=None, help="configuration file")
    t.add_argument("--replay", metavar="MANIFEST", default=None,
                   help="re-run from a manifest and check the summary matches")
    t.add_argument("--seed", type=int, default=None, help="override the config seed")
    t.add_argument("--run-name", default=None, help="run directory name")

    e = sub.add_parser("evaluate", help="error report for a checkpoint")
    e.add_argument("target", help="run directory or checkpoint file")
    e.add_argument("--problem", default=None, help="problem name (bare checkpoints)")
    e.add_argument("--method", default=None, help="method the checkpoint was trained with")
    e.add_argument("--truncation", type=int, default=None, help="series truncation level")
    e.add_argument("--slice", dest="z_slice", type=float, default=None,
                   help="z slice for 3D grid export")
    e.add_argument("--res", type=int, default=0, help="grid resolution for field export")
    e.add_argument("--n-samples", type=int, default=20000, help="error sample count")
    e.add_argument("--seed", type=int, default=101, help="error sample seed")

    s = sub.add_parser("sweep-truncation", help="error table over truncation levels")
    s.add_argument("config", help="configuration file (method sepinn-c)")
    s.add_argument("--levels", default="5,10,15,20", help="comma-separated levels")
    s.add_argument("--analytic", action="store_true",
                   help="use the closed-form coefficients instead of training")
    s.add_argument("--run-name", default=None)

    c = sub.add_parser("compare-baseline", help="enriched run vs plain baseline")
    c.add_argument("config", help="configuration file (method sepinn)")
    c.add_argument("--run-name", default=None)

    g = sub.add_parser("eigen", help="alternating eigenvalue solver")
    g.add_argument("config", help="configuration file (method eigen)")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.add_argument("--run-name", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .config import ConfigError

    handlers = {
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "sweep-truncation": cmd_sweep_truncation,
        "compare-baseline": cmd_compare_baseline,
        "eigen": cmd_eigen,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


# -- shared plumbing ----------------------------------------------------------


def _output_root(args) -> Path:
    if args.output_root:
        return Path(args.output_root)
    env = os.environ.get("SEPINN_OUTPUT_ROOT")
    return Path(env) if env else Path("runs")


def _run_dir(args, cfg, name=None) -> Path:
    name = name or getattr(args, "run_name", None) or cfg.output_dir \
        or f"{cfg.problem}-{cfg.method}-seed{cfg.seed}"
    path = _output_root(args) / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def _atomic_json(path: Path, payload: dict):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _build_problem(cfg):
    from . import problems as pr

    trunc = cfg.truncation if cfg.truncation >= 1 else None
    problem = pr.get_problem(cfg.problem, truncation=trunc)
    if cfg.method == "sepinn-n":
        mode = "rz" if cfg.aux_widths[0] == 2 else "xyz"
        problem = pr.with_aux_terms(problem, hidden=tuple(cfg.aux_widths[1:-1]),
                                    input_mode=mode)
    return problem


def _expand_coeff_lr(cfg, problem):
    """Map the configured coefficient rates onto the extras vector.

    Accepts a single shared rate or one rate per enrichment term (each term's
    block of series coefficients shares its term's rate)."""
    if not cfg.coeff_lr:
        return None
    if len(cfg.coeff_lr) == 1:
        return float(cfg.coeff_lr[0])
    n_terms = len(problem.terms)
    if len(cfg.coeff_lr) != n_terms:
        from .config import ConfigError

        raise ConfigError([f"adam.coeff_lr: got {len(cfg.coeff_lr)} rates for "
                           f"{n_terms} enrichment terms"])
    block = cfg.truncation + 1 if cfg.method == "sepinn-c" else 1
    import numpy as np

    return np.repeat(np.asarray(cfg.coeff_lr, dtype=float), block)


def _build_training(cfg, problem, samples=None):
    from . import geometry as geo
    from .network import MlpArch, init_params
    from .optimize import AdamConfig, LbfgsConfig, PenaltySchedule

    if samples is None:
        samples = geo.build_samples(problem.domain, cfg.n_interior,
                                    cfg.n_dirichlet, cfg.n_neumann, cfg.seed)
    nets = [init_params(MlpArch(tuple(cfg.widths)), cfg.seed)]
    if cfg.method == "sepinn-n":
        for k in range(len(problem.terms)):
            nets.append(init_params(MlpArch(tuple(cfg.aux_widths)), cfg.seed + 1 + k))
    schedule = PenaltySchedule(cfg.sigma_d, cfg.sigma_cap, growth=cfg.growth,
                               sigma_n=cfg.sigma_n, threshold=cfg.threshold)
    adam = AdamConfig(lr_network=cfg.adam_lr,
                      lr_coeffs=_expand_coeff_lr(cfg, problem),
                      max_iter=cfg.adam_iters)
    lbfgs = LbfgsConfig(memory=cfg.lbfgs_memory, tolerance=cfg.lbfgs_tol,
                        max_iter=cfg.lbfgs_iters)
    adam_first = None
    if cfg.warmup_iters > 0:
        adam_first = AdamConfig(lr_network=cfg.warmup_lr, max_iter=cfg.warmup_iters)
    return samples, nets, schedule, adam, lbfgs, adam_first


def _w_fn(net):
    from .network import forward_with_derivatives

    return lambda pts: forward_with_derivatives(net, pts, order=0).value


def _singular_fn(problem, coeffs):
    import numpy as np

    from .losses import coefficient_tables

    coeffs = np.asarray(coeffs, dtype=float)
    terms = list(problem.terms)

    def fn(pts):
        values, _, _ = coefficient_tables(terms, pts)
        return values @ coeffs

    return fn


def _aux_singular_fn(problem, aux_nets):
    import numpy as np

    from . import enrichment as en
    from .network import forward_with_derivatives

    def fn(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(len(pts))
        for term, net in zip(problem.terms, aux_nets):
            ev = en.eval_singular(term, pts)
            if term.coeff.input_mode == "rz":
                xin = np.column_stack([ev.r, pts[:, 2]])
            else:
                xin = pts
            out += forward_with_derivatives(net, xin, order=0).value * ev.value
        return out

    return fn


def _solution_fns(cfg, problem, nets, coeffs):
    """(w, singular, full) evaluators for a trained parameter set."""
    w_fn = _w_fn(nets[0])
    if cfg.method == "pinn":
        return w_fn, None, w_fn
    if cfg.method == "sepinn-n":
        s_fn = _aux_singular_fn(problem, nets[1:])
    else:
        s_fn = _singular_fn(problem, coeffs)
    return w_fn, s_fn, lambda pts: w_fn(pts) + s_fn(pts)


def _run_metrics(cfg, problem, report) -> dict:
    """Deterministic post-training metrics on fresh error samples."""
    from . import metrics as me

    out = {}
    if cfg.method == "eigen":
        for key in ("mu_1", "mu_2", "gamma_1", "gamma_2"):
            if key in report.results:
                out[key] = float(report.results[key])
        return out
    coeffs = report.final_coeffs
    if cfg.method == "sepinn":
        for k in range(coeffs.size):
            out["gamma_hat" if coeffs.size == 1 else f"gamma_hat_{k}"] = float(coeffs[k])
    elif cfg.method == "sepinn-c" and coeffs.size:
        out["gamma_1"] = float(coeffs[1]) if coeffs.size > 1 else float(coeffs[0])
        if coeffs.size > 2:
            out["gamma_2"] = float(coeffs[2])
    w_fn, s_fn, u_fn = _solution_fns(cfg, problem, report.final_params, coeffs)
    if cfg.method == "pinn":
        if problem.exact_u is not None:
            rep = me.relative_l2(u_fn, problem.exact_u, problem.domain,
                                 n=cfg.error_n, seed=cfg.error_seed)
            out["e"] = rep.relative
            out["e_abs"] = rep.absolute
    elif problem.exact_w is not None:
        rep = me.solution_report(problem, w_fn, s_fn, n=cfg.error_n, seed=cfg.error_seed)
        out.update(rep.components)
    if report.validation_errors:
        out["validation_error"] = float(report.validation_errors[-1])
    return out


def _summary_line(cfg, metrics, wall, status) -> str:
    parts = [f"problem={cfg.problem}", f"method={cfg.method}", f"seed={cfg.seed}",
             f"status={status}"]
    for key in sorted(metrics):
        parts.append(f"{key}={metrics[key]:.12e}")
    parts.append(f"wall={wall:.1f}s")
    return "summary " + " ".join(parts)


def _write_manifest(path: Path, args, cfg, metrics, wall, status, checkpoints,
                    artifacts, command):
    from . import __version__

    payload = {
        "tool": "sepinn",
        "version": __version__,
        "command": command,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "threads": args.threads,
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "status": status,
        "wall_seconds": wall,
        "metrics": metrics,
        "checkpoints": [str(c) for c in checkpoints],
        "artifacts": artifacts,
    }
    _atomic_json(path, payload)
    return payload


def _train_once(args, cfg, run_dir: Path, samples=None):
    """Shared train driver: artifacts into run_dir, returns (report, metrics, wall)."""
    from . import report as rp
    from .config import save_config
    from .network import save_checkpoint
    from .optimize import eigen_alternate, two_stage_train

    save_config(cfg, run_dir / "config.cfg")
    problem = _build_problem(cfg)
    samples, nets, schedule, adam, lbfgs, adam_first = _build_training(cfg, problem, samples)
    t0 = time.perf_counter()
    if cfg.method == "eigen":
        from .network import MlpArch

        report = eigen_alternate(problem, samples, [MlpArch(tuple(cfg.widths))] * 2,
                                 schedule, adam, cfg.seed, alpha=cfg.alpha,
                                 beta=cfg.beta, nu=tuple(cfg.nu), mu_tol=cfg.mu_tol,
                                 max_alternations=cfg.max_alternations,
                                 max_restarts=cfg.max_restarts,
                                 pretrain_iters=cfg.pretrain_iters,
                                 artifact_dir=run_dir)
    else:
        report = two_stage_train(problem, samples, nets, schedule, adam, lbfgs,
                                 cfg.seed, method=cfg.method,
                                 gamma_init=cfg.gamma_init, adam_first=adam_first,
                                 validation_n=cfg.validation_n,
                                 artifact_dir=run_dir)
    wall = time.perf_counter() - t0
    artifacts = {}
    if report.final_params:
        extras = report.final_coeffs
        if cfg.method == "eigen" and report.results:
            import numpy as np

            extras = np.concatenate([report.final_coeffs,
                                     [report.results["mu_1"], report.results["mu_2"]]])
        final_ck = run_dir / "checkpoint_final.bin"
        save_checkpoint(final_ck, report.final_params, extras=extras, seed=cfg.seed)
        report.checkpoints.append(str(final_ck))
    report.write_csv(run_dir / "report.csv")
    artifacts["report_csv"] = "report.csv"
    if report.rows:
        rp.render_training_curves(report.rows, run_dir / "training.png",
                                  validation=report.validation_errors)
        artifacts["training_png"] = "training.png"
    if report.gamma_trajectory:
        refs = [v for v in (problem.references or {}).values()
                if isinstance(v, (int, float))]
        rp.render_gamma_trajectory(report.gamma_trajectory, run_dir / "gamma.png",
                                   references=refs)
        artifacts["gamma_png"] = "gamma.png"
    metrics = _run_metrics(cfg, problem, report) if report.status == "ok" else {}
    return problem, report, metrics, wall, artifacts


# -- subcommands ---------------------------------------------------------------


def cmd_train(args) -> int:
    from .config import load_config

    if args.replay:
        return _replay(args)
    if not args.config:
        print("error: train needs a config file (or --replay)", file=sys.stderr)
        return EXIT_CONFIG
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    run_dir = _run_dir(args, cfg)
    problem, report, metrics, wall, artifacts = _train_once(args, cfg, run_dir)
    _write_manifest(run_dir / "manifest.json", args, cfg, metrics, wall,
                    report.status, report.checkpoints, artifacts, "train")
    print(_summary_line(cfg, metrics, wall, report.status))
    print(f"artifacts: {run_dir}")
    return EXIT_OK if report.status == "ok" else EXIT_NUMERICAL


def _replay(args) -> int:
    from .config import RunConfig, validate_config
    from .config import ConfigError

    manifest_path = Path(args.replay)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = RunConfig(**manifest["config"])
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    run_dir = _run_dir(args, cfg, name=manifest_path.parent.name + "-replay")
    problem, report, metrics, wall, artifacts = _train_once(args, cfg, run_dir)
    _write_manifest(run_dir / "manifest.json", args, cfg, metrics, wall,
                    report.status, report.checkpoints, artifacts, "train")
    print(_summary_line(cfg, metrics, wall, report.status))
    stored = manifest.get("metrics", {})
    failures = []
    for key, ref in sorted(stored.items()):
        if not isinstance(ref, (int, float)):
            continue
        got = metrics.get(key)
        if got is None:
            failures.append(f"{key}: missing in replay")
            continue
        tol = REPLAY_RTOL * max(1.0, abs(ref))
        flag = "ok" if abs(got - ref) <= tol else "MISMATCH"
        print(f"replay {key}: stored={ref!r} new={got!r} {flag}")
        if flag != "ok":
            failures.append(f"{key}: |{got!r} - {ref!r}| > {tol:g}")
    if failures or report.status != "ok":
        for line in failures:
            print(f"replay mismatch: {line}", file=sys.stderr)
        return EXIT_NUMERICAL
    print("replay: summary reproduced")
    return EXIT_OK


def _load_eval_target(args):
    """Resolve (cfg, checkpoint path) from a run dir or a bare checkpoint."""
    from .config import ConfigError, RunConfig

    target = Path(args.target)
    if target.is_dir():
        with open(target / "manifest.json") as fh:
            manifest = json.load(fh)
        cfg = RunConfig(**manifest["config"])
        ck = target / "checkpoint_final.bin"
        if not ck.exists():
            stored = [Path(c) for c in manifest.get("checkpoints", [])]
            if not stored:
                raise FileNotFoundError(f"no checkpoints recorded in {target}")
            ck = stored[-1]
        return cfg, ck
    if args.problem is None:
        raise ConfigError(["evaluate: bare checkpoints need --problem"])
    cfg = RunConfig(problem=args.problem, method=args.method or "sepinn")
    if args.truncation:
        cfg.truncation = args.truncation
    cfg.widths = []  # filled from the checkpoint below
    return cfg, target


def cmd_evaluate(args) -> int:
    import numpy as np

    from . import metrics as me
    from . import report as rp
    from .network import forward_with_derivatives, load_checkpoint

    cfg, ck_path = _load_eval_target(args)
    nets, extras, _ = load_checkpoint(ck_path)
    cfg.widths = list(nets[0].arch.widths)
    if cfg.method == "sepinn-n" and len(nets) > 1:
        cfg.aux_widths = list(nets[1].arch.widths)
    problem = _build_problem(cfg)
    if nets[0].arch.widths[0] != problem.dim:
        print(f"error: checkpoint input width {nets[0].arch.widths[0]} does not "
              f"match problem dimension {problem.dim}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = ck_path.parent
    lines = {}
    if cfg.method == "eigen":
        half = extras.size // 2
        gammas, mus = extras[:half], extras[half:]
        from . import geometry as geo
        from .losses import coefficient_tables

        sample = geo.sample_interior(problem.domain, args.n_samples, args.seed)
        values, laps, _ = coefficient_tables(list(problem.terms), sample)
        for i, (net, gam, mu) in enumerate(zip(nets, gammas, mus), start=1):
            res = forward_with_derivatives(net, sample, order=2)
            u_val = res.value + values[:, 0] * gam
            u_lap = res.laplacian + laps[:, 0] * gam
            lines[f"mu_{i}"] = float(mu)
            lines[f"residual_rms_{i}"] = float(np.sqrt(np.mean((u_lap + mu * u_val) ** 2)))
    else:
        w_fn, s_fn, u_fn = _solution_fns(cfg, problem, nets, extras)
        if cfg.method == "pinn" and problem.exact_u is not None:
            rep = me.relative_l2(u_fn, problem.exact_u, problem.domain,
                                 n=args.n_samples, seed=args.seed)
            lines.update({"e": rep.relative, "e_abs": rep.absolute,
                          "max_pointwise": rep.max_pointwise})
        elif problem.exact_w is not None:
            rep = me.solution_report(problem, w_fn, s_fn,
                                     n=args.n_samples, seed=args.seed)
            lines.update(rep.components)
            lines["max_pointwise"] = rep.max_pointwise
        else:
            from . import geometry as geo
            from .losses import coefficient_tables

            sample = geo.sample_interior(problem.domain, args.n_samples, args.seed)
            res = forward_with_derivatives(nets[0], sample, order=2)
            residual = res.laplacian + problem.source(sample)
            if extras.size:
                _, laps, _ = coefficient_tables(list(problem.terms), sample)
                residual = residual + laps @ extras
            lines["residual_rms"] = float(np.sqrt(np.mean(residual**2)))
        for k in range(extras.size):
            lines[f"gamma_{k}"] = float(extras[k])
    for key in sorted(lines):
        print(f"{key} = {lines[key]:.6e}")
    with open(out_dir / "evaluate.csv", "w") as fh:
        fh.write("metric,value\n")
        for key in sorted(lines):
            fh.write(f"{key},{lines[key]!r}\n")
    if args.res:
        if cfg.method == "eigen":
            u_fn = _w_fn(nets[0])
        grid_path = out_dir / "field.csv"
        me.export_field_grid(u_fn, problem.domain, args.res, grid_path,
                             z_slice=args.z_slice)
        rp.render_field_csv(grid_path, out_dir / "field.png")
        print(f"grid: {grid_path}")
    return EXIT_OK


def cmd_sweep_truncation(args) -> int:
    import csv as csvmod

    import numpy as np

    from . import metrics as me
    from . import report as rp
    from .config import ConfigError, load_config

    cfg = load_config(args.config)
    if cfg.method != "sepinn-c":
        raise ConfigError(["run.method: sweep-truncation needs method sepinn-c"])
    levels = sorted({int(tok) for tok in args.levels.split(",") if tok.strip()})
    if not levels or levels[0] < 1:
        raise ConfigError(["--levels: need positive truncation levels"])
    run_dir = _run_dir(args, cfg, name=getattr(args, "run_name", None)
                       or f"{cfg.problem}-sweep")
    base = dataclasses.replace(cfg, truncation=max(levels))
    problem = _build_problem(base)
    t0 = time.perf_counter()
    if args.analytic:
        rows = me.truncation_study(problem, levels, n=cfg.error_n, seed=cfg.error_seed)
    else:
        runs = {}
        walls = {}
        for level in levels:
            cfg_n = dataclasses.replace(cfg, truncation=level)
            sub_dir = run_dir / f"N{level}"
            sub_dir.mkdir(exist_ok=True)
            _, report, metrics, wall, _ = _train_once(args, cfg_n, sub_dir)
            if report.status != "ok":
                print(f"level {level}: {report.status}", file=sys.stderr)
                return EXIT_NUMERICAL
            blocks = np.split(report.final_coeffs, len(problem.terms)) \
                if len(problem.terms) > 1 else [report.final_coeffs]
            runs[level] = (_w_fn(report.final_params[0]), blocks)
            walls[level] = wall
            print(f"level {level}: wall={wall:.1f}s "
                  + " ".join(f"{k}={v:.4e}" for k, v in sorted(metrics.items())))
        rows = me.truncation_study(problem, levels, runs=runs,
                                   n=cfg.error_n, seed=cfg.error_seed)
        for row in rows:
            row["wall_seconds"] = walls[row["N"]]
    wall = time.perf_counter() - t0
    csv_path = run_dir / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csvmod.DictWriter(fh, fieldnames=list(rows[0].keys()), restval="")
        writer.writeheader()
        writer.writerows(rows)
    rp.render_truncation(rows, run_dir / "sweep.png")
    metrics = {}
    for row in rows:
        for key in ("e", "e_u", "e_S"):
            if key in row:
                metrics[f"{key}_N{row['N']}"] = float(row[key])
    _write_manifest(run_dir / "manifest.json", args, cfg, metrics, wall, "ok",
                    [], {"sweep_csv": "sweep.csv", "sweep_png": "sweep.png"},
                    "sweep-truncation")
    for row in rows:
        print("  " + " ".join(f"{k}={v:.4e}" if isinstance(v, float) else f"{k}={v}"
                              for k, v in row.items()))
    print(f"artifacts: {run_dir}")
    return EXIT_OK


def cmd_compare_baseline(args) -> int:
    import csv as csvmod

    from . import geometry as geo
    from . import metrics as me
    from . import report as rp
    from .config import ConfigError, load_config

    cfg = load_config(args.config)
    if cfg.method != "sepinn":
        raise ConfigError(["run.method: compare-baseline needs method sepinn"])
    run_dir = _run_dir(args, cfg, name=getattr(args, "run_name", None)
                       or f"{cfg.problem}-baseline")
    problem = _build_problem(cfg)
    samples = geo.build_samples(problem.domain, cfg.n_interior, cfg.n_dirichlet,
                                cfg.n_neumann, cfg.seed)
    t0 = time.perf_counter()
    results = {}
    reports = {}
    for method in ("sepinn", "pinn"):
        cfg_m = dataclasses.replace(cfg, method=method)
        sub_dir = run_dir / method
        sub_dir.mkdir(exist_ok=True)
        # same seed and the very same sample set for both runs
        problem_m, report, metrics, wall, _ = _train_once(args, cfg_m, sub_dir,
                                                          samples=samples)
        if report.status != "ok":
            print(f"{method}: {report.status}", file=sys.stderr)
            return EXIT_NUMERICAL
        _, _, u_fn = _solution_fns(cfg_m, problem_m, report.final_params,
                                   report.final_coeffs)
        rep = me.relative_l2(u_fn, problem_m.exact_u, problem_m.domain,
                             n=cfg.error_n, seed=cfg.error_seed)
        results[method] = {"e_u": rep.relative, "wall": wall, **metrics}
        reports[method] = report
        print(f"{method}: e_u={rep.relative:.4e} wall={wall:.1f}s")
    wall = time.perf_counter() - t0
    csv_path = run_dir / "comparison.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csvmod.writer(fh)
        writer.writerow(["method", "iteration", "stage", "total", "interior",
                         "dirichlet", "neumann"])
        for method, report in reports.items():
            for row in report.rows:
                writer.writerow([method] + [row.get(k, "") for k in
                                            ("iteration", "stage", "total",
                                             "interior", "dirichlet", "neumann")])
    rp.render_comparison(reports["sepinn"].rows, reports["pinn"].rows,
                         ("sepinn", "pinn"), run_dir / "comparison.png")
    metrics = {
        "sepinn_e_u": results["sepinn"]["e_u"],
        "pinn_e_u": results["pinn"]["e_u"],
        "ratio": results["sepinn"]["e_u"] / results["pinn"]["e_u"],
    }
    if "gamma_hat" in results["sepinn"]:
        metrics["gamma_hat"] = results["sepinn"]["gamma_hat"]
    _write_manifest(run_dir / "manifest.json", args, cfg, metrics, wall, "ok",
                    [], {"comparison_csv": "comparison.csv",
                         "comparison_png": "comparison.png"}, "compare-baseline")
    print(f"summary sepinn_e_u={metrics['sepinn_e_u']:.4e} "
          f"pinn_e_u={metrics['pinn_e_u']:.4e} ratio={metrics['ratio']:.3f}")
    print(f"artifacts: {run_dir}")
    return EXIT_OK


def cmd_eigen(args) -> int:
    from .config import ConfigError, load_config

    cfg = load_config(args.config)
    if cfg.method != "eigen":
        raise ConfigError(["run.method: the eigen subcommand needs method eigen"])
    if args.seed is not None:
        cfg.seed = args.seed
    run_dir = _run_dir(args, cfg)
    problem, report, metrics, wall, artifacts = _train_once(args, cfg, run_dir)
    _write_manifest(run_dir / "manifest.json", args, cfg, metrics, wall,
                    report.status, report.checkpoints, artifacts, "eigen")
    print(_summary_line(cfg, metrics, wall, report.status))
    print(f"artifacts: {run_dir}")
    return EXIT_OK if report.status == "ok" else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
