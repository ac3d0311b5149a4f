"""Config-driven experiment runner.

Subcommands: green, conserved, evolve, smoothing, micro, inflate, sweep,
selftest.  Every run writes the resolved config and a generated reference
file beside its outputs.  Exit codes: 0 pass, 1 property failure, 2 usage
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics, flows, hierarchy, lax
from .config import ConfigError, ExperimentConfig, config_reference
from .selftest import format_report, run_selftest
from .spectral import Field, SpectralError
from .storage import write_csv, write_json, write_snapshot, write_trajectory

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _prepare_out(cfg: ExperimentConfig, subcommand: str) -> str:
    out = os.path.join(cfg.out, subcommand)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "resolved_config.json"), "w", newline="\n") as fh:
        fh.write(cfg.to_json())
    with open(os.path.join(out, "config_reference.txt"), "w", newline="\n") as fh:
        fh.write(config_reference())
    write_json(os.path.join(out, "format.json"), {"format": "aknslab-v1"})
    return out


def _fan_out(items, worker, threads: int):
    if threads <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, items))


def cmd_green(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "green")
    f = cfg.make_field()
    grid = f.grid
    rows = []

    def one(kappa: float):
        triple = lax.greens_fixed_point(f, kappa, tol=cfg.flow.fp_tol)
        entries = [("fixed_point", triple)]
        series = lax.greens_series(f, kappa, 3)
        entries.append(("series(3)", series))
        if grid.points <= lax.ORACLE_MAX_POINTS and \
                abs(kappa) * grid.length >= lax.ORACLE_MIN_KAPPA_L:
            entries.append(("oracle", lax.greens_oracle(f, kappa)))
        return kappa, entries

    for kappa, entries in _fan_out(list(cfg.diagnostics.kappas), one, cfg.threads):
        reference = dict(entries).get("oracle", entries[0][1])
        for method, triple in entries:
            for part in ("g12", "g21", "gamma"):
                base = os.path.join(out, f"{part}_k{kappa:g}_{method}")
                write_snapshot(base, Field(grid, getattr(triple, part), f.sign),
                               0.0, f"{part} at kappa={kappa:g} via {method}")
            ref_norm = float(np.sqrt(grid.dx * np.sum(np.abs(reference.g12) ** 2)))
            dev = float(np.sqrt(grid.dx * np.sum(np.abs(triple.g12 - reference.g12) ** 2)))
            rows.append([kappa, method, triple.quadratic_residual(grid),
                         dev / max(ref_norm, 1e-300), triple.meta.get("iterations", 0),
                         triple.meta.get("residual", 0.0)])
        write_json(os.path.join(out, f"meta_k{kappa:g}.json"),
                   {"kappa": kappa,
                    "methods": {m: {k: v for k, v in t.meta.items()}
                                for m, t in entries}})
    write_csv(os.path.join(out, "identities.csv"),
              ["kappa", "method", "quadratic_residual", "l2_vs_reference",
               "iterations", "fp_residual"], rows)
    return EXIT_OK


def cmd_conserved(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "conserved")
    f = cfg.make_field()
    ham = hierarchy.hamiltonians(f)
    write_json(os.path.join(out, "hamiltonians.json"),
               {**ham.as_dict(), "imag_leakage": ham.imag_leakage})
    rows = []
    for kappa in cfg.diagnostics.kappas:
        triple = lax.greens_fixed_point(f, kappa, tol=cfg.flow.fp_tol)
        det_i = lax.pdet_integral(f, kappa, triple)
        det_t = lax.pdet_trace(f, kappa, cfg.diagnostics.trace_order)
        alp = f.sign * det_i.real
        err = (hierarchy.expansion_error(f, kappa, det_i)
               if kappa >= 4.0 else float("nan"))
        rows.append([kappa, det_i, det_t.value, abs(det_i - det_t.value),
                     det_t.spectral_radius, alp, err])
    write_csv(os.path.join(out, "determinant.csv"),
              ["kappa", "det_integral", "det_trace", "method_gap",
               "spectral_radius", "alpha", "expansion_error"], rows)
    return EXIT_OK


def _run_flow(cfg: ExperimentConfig):
    f = cfg.make_field()
    spec = flows.FlowSpec(cfg.flow.kind, cfg.flow.dt, cfg.flow.t_final,
                          scheme=cfg.flow.scheme,
                          snapshot_stride=cfg.flow.snapshot_stride,
                          kappa=cfg.flow.kappa or None,
                          fp_tol=cfg.flow.fp_tol)
    return f, flows.evolve(f, spec)


def cmd_evolve(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "evolve")
    _, traj = _run_flow(cfg)
    drift = diagnostics.conserved_drift(traj, kappas=tuple(cfg.diagnostics.kappas))
    write_trajectory(os.path.join(out, "trajectory"), traj, drift.table)
    rows = [[name, max_dev] for name, max_dev in sorted(drift.relative_drift.items())]
    write_csv(os.path.join(out, "drift.csv"), ["quantity", "relative_drift"], rows)
    write_json(os.path.join(out, "stats.json"),
               {**traj.stats, "conjugacy_violation": traj.conjugacy_violation()})
    return EXIT_OK


def cmd_smoothing(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "smoothing")
    _, traj = _run_flow(cfg)
    rows = []
    for kappa in cfg.diagnostics.kappas:
        rep = diagnostics.local_smoothing_norm(
            traj, cfg.diagnostics.sigma, kappa=kappa,
            h_count=cfg.diagnostics.h_count_sup)
        rows.append([cfg.diagnostics.sigma, kappa, rep.window,
                     rep.value, rep.value_kappa])
    write_csv(os.path.join(out, "smoothing.csv"),
              ["sigma", "kappa", "window", "x_norm_sq", "x_kappa_norm_sq"], rows)
    return EXIT_OK


def cmd_micro(cfg: ExperimentConfig) -> int:
    from .hierarchy import current as current_of, density as density_of
    from .lax import greens_fixed_point

    out = _prepare_out(cfg, "micro")
    _, traj = _run_flow(cfg)
    rep = diagnostics.micro_residual(traj, cfg.diagnostics.varkappa,
                                     cfg.diagnostics.flavor,
                                     h_count=cfg.diagnostics.h_count)
    write_csv(os.path.join(out, "integrated.csv"),
              ["h", "flux_side", "density_side", "gap", "relative_gap"],
              [[h, lhs, rhs, gap, rel] for h, lhs, rhs, gap, rel in rep.integrated])
    # per-snapshot (x, density, current) samples for plotting
    flavor = cfg.diagnostics.flavor
    vk = cfg.diagnostics.varkappa
    rows = []
    for i in range(len(traj)):
        f = traj.field(i)
        r = traj.partner(i)
        triple = greens_fixed_point(f, vk, tol=cfg.flow.fp_tol, r=r)
        extra = ()
        if flavor in ("a_flow", "nls_diff", "mkdv_diff"):
            plus = greens_fixed_point(f, traj.spec.kappa, tol=cfg.flow.fp_tol, r=r)
            if flavor == "a_flow":
                extra = (plus,)
            else:
                minus = greens_fixed_point(f, -traj.spec.kappa,
                                           tol=cfg.flow.fp_tol, r=r)
                extra = (plus, minus)
        rho = density_of(f, triple, tilde=flavor == "tilde_mkdv", r=r)
        j = current_of(f, flavor, triple, extra, r=r)
        t = traj.times[i]
        for x, d, c in zip(traj.grid.x, rho, j):
            rows.append([t, x, d, c])
    write_csv(os.path.join(out, "density_current.csv"),
              ["t", "x", "density", "current"], rows)
    write_json(os.path.join(out, "pointwise.json"),
               {"flavor": rep.flavor, "varkappa": rep.varkappa,
                "kappa": rep.kappa, "dt": rep.dt, "window": rep.window,
                "l1": rep.pointwise_l1, "max": rep.pointwise_max,
                "max_relative_gap": rep.max_rel_gap()})
    return EXIT_OK


def cmd_inflate(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "inflate")
    parity = "odd" if cfg.data.profile == "appendix_odd" else "even"
    rep = diagnostics.norm_inflation_experiment(
        parity, cfg.data.amplitude, tuple(cfg.diagnostics.lambdas),
        cfg.diagnostics.sigma, bumps=cfg.diagnostics.bumps,
        separation=cfg.diagnostics.separation, sign=cfg.data.sign,
        grid=cfg.make_grid(), window=cfg.flow.t_final, dt=cfg.flow.dt,
        snapshot_stride=cfg.flow.snapshot_stride,
        threshold_factor=cfg.diagnostics.threshold_factor)
    rows = []
    for lam in rep.lambdas:
        for t, v in zip(rep.times, rep.series[lam]):
            rows.append([lam, t, v])
    write_csv(os.path.join(out, "series.csv"), ["lambda", "t", "h_sigma_norm"], rows)
    write_csv(os.path.join(out, "mean.csv"), ["t", "mean"],
              [[t, m] for t, m in zip(rep.times, rep.mean_series)])
    summary = {
        "sigma": rep.sigma, "t1": rep.t1, "t1_found": rep.t1_found,
        "threshold": rep.threshold,
        "production_rate_im": rep.production_rate.imag,
        "predicted_imag_sign": rep.predicted_imag_sign,
        "growth_ratio": {str(k): v for k, v in rep.growth_ratio.items()},
        "initial_band": rep.initial_band,
        "evolved_log_fit": rep.evolved_log_fit,
        "bumps": rep.bumps, "separation": rep.separation,
        "superposition_error": rep.superposition_error,
    }
    write_json(os.path.join(out, "summary.json"), summary)
    if not rep.t1_found:
        print("inflate: no mean production detected within the window", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "sweep")
    f = cfg.make_field()
    star = "nls" if cfg.flow.kind.startswith("nls") else "mkdv"
    rows = diagnostics.kappa_convergence_study(
        f, star, cfg.diagnostics.varkappa, tuple(cfg.diagnostics.sweep_kappas),
        cfg.flow.t_final, s=cfg.diagnostics.s, dt=cfg.flow.dt,
        h_count=cfg.diagnostics.h_count, snapshot_stride=cfg.flow.snapshot_stride,
        fp_tol=cfg.flow.fp_tol)
    write_csv(os.path.join(out, "sweep.csv"), ["kappa", "defect"], rows)
    monotone = all(rows[i][1] > rows[i + 1][1] for i in range(len(rows) - 1))
    write_json(os.path.join(out, "summary.json"),
               {"star": star, "varkappa": cfg.diagnostics.varkappa,
                "monotone_decreasing": monotone})
    if not monotone:
        print("sweep: defect table is not monotone decreasing", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_selftest(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg, "selftest")
    checks = run_selftest(cfg.seed)
    report = format_report(checks)
    print(report)
    with open(os.path.join(out, "selftest.txt"), "w", newline="\n") as fh:
        fh.write(report + "\n")
    write_csv(os.path.join(out, "selftest.csv"),
              ["check", "passed", "measured", "bound"],
              [[name, ok, measured, bound] for name, ok, measured, bound in checks])
    return EXIT_OK if all(ok for _, ok, _, _ in checks) else EXIT_PROPERTY


COMMANDS = {
    "green": cmd_green,
    "conserved": cmd_conserved,
    "evolve": cmd_evolve,
    "smoothing": cmd_smoothing,
    "micro": cmd_micro,
    "inflate": cmd_inflate,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aknslab",
        description="Numerical laboratory for the NLS/mKdV integrable hierarchy.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default="", help="JSON config path")
        p.add_argument("--out", default="", help="output directory")
        p.add_argument("--threads", type=int, default=0, help="sweep fan-out")
        p.add_argument("--seed", type=int, default=-1, help="RNG seed")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg.apply_env()
        if args.out:
            cfg.out = args.out
        if args.threads > 0:
            cfg.threads = args.threads
        if args.seed >= 0:
            cfg.seed = args.seed
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.subcommand](cfg)
    except (ConfigError, SpectralError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (lax.LaxError, flows.FlowError, hierarchy.HierarchyError,
            diagnostics.DiagnosticsError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
