"""Command-line interface: scenario execution with machine-readable output.

Every compute subcommand reads one YAML config and writes flat files into
--out-dir: trajectory.csv (shared column schema), diagnostics.csv, and
summary.json. Floating-point values are printed with 17 significant digits
so identical config and seed reproduce byte-identical outputs. The plot
subcommand renders figures from a finished output directory; it never runs
physics.

Exit codes: 0 success, 1 config error, 2 numerical failure (a diagnostic
summary.json is still written when possible).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import canonchecks, diagnostics
from .config import RunConfig, load_config
from .errors import ConfigError, GyrokitError
from .fields import sample, verify_model
from .fullorbit import integrate_full
from .gcmotion import hamiltonian_K, integrate_gc
from .gyrotransform import from_guiding_center, gc_from_orbit_average, to_guiding_center

TRAJ_COLUMNS = ("t", "rx", "ry", "rz", "vx_or_prx", "vy_or_pry", "vz_or_prz",
                "phi", "p_phi", "mu", "energy_or_K", "constraint_residual")
TRAJ_NOTE = ("# full-orbit rows: v columns hold velocity, energy_or_K holds "
             "energy, phi/p_phi/constraint_residual are empty; gc rows: v "
             "columns hold p_r, energy_or_K holds K\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: str, columns, rows, note: str = ""):
    with open(path, "w", newline="") as f:
        if note:
            f.write(note)
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def _json_value(x, indent: int) -> str:
    pad = " " * indent
    if x is None:
        return "null"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(float(x)):
            return "null"
        return format(float(x), ".17g")
    if isinstance(x, str):
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        inner = ",\n".join(pad + "  " + _json_value(v, indent + 2) for v in x)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(x, dict):
        if not x:
            return "{}"
        inner = ",\n".join(
            pad + "  " + _json_value(str(k), 0) + ": " + _json_value(v, indent + 2)
            for k, v in sorted(x.items())
        )
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(x)} to JSON")


def write_summary(path: str, summary: dict):
    """Deterministic JSON with sorted keys and 17-digit floats."""
    with open(path, "w", newline="") as f:
        f.write(_json_value(summary, 0) + "\n")


def _base_summary(scenario: str, cfg: RunConfig) -> dict:
    return {
        "scenario": scenario,
        "eps": cfg.eps,
        "slopes": {},
        "residual_maxima": {},
        "status": "ok",
    }


# --------------------------------------------------------------------------
# Subcommand handlers. Each returns the summary dict; file writes happen
# here, after all computation (scan jobs included) has finished.
# --------------------------------------------------------------------------


def _cmd_fields_check(cfg: RunConfig, out: str, jobs: int) -> dict:
    rng = np.random.default_rng(cfg.seed)
    points = [rng.uniform(-0.45, 0.45, size=3) for _ in range(16)]
    steps = (1e-3, 1e-4)
    reports = [verify_model(cfg.field, points, 0.0, h, cfg.eps, cfg.species)
               for h in steps]
    rows = [(r.h, r.curl_residual, r.faraday_residual) for r in reports]
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("h", "curl_residual", "faraday_residual"), rows)
    fine = reports[-1]
    if all(r.curl_residual > 1e-10 for r in reports):
        slope = (math.log(reports[0].curl_residual / reports[1].curl_residual)
                 / math.log(steps[0] / steps[1]))
    else:
        slope = None  # residual at the roundoff floor: exact potentials
    summary = _base_summary("fields-check", cfg)
    summary["residual_maxima"] = {
        "curl": fine.curl_residual,
        "faraday": fine.faraday_residual,
    }
    summary["slopes"] = {"curl_vs_h": slope}
    summary["n_points"] = len(points)
    return summary


def _orbit_rows(traj, cfg: RunConfig):
    rows = []
    energy_series = []
    mus = diagnostics.mu_series(traj, cfg.field, cfg.eps, cfg.species)[1]
    for i in range(len(traj)):
        fs = sample(cfg.field, traj.r[i], traj.t[i], cfg.eps, cfg.species)
        en = (0.5 * cfg.species.m * float(traj.v[i] @ traj.v[i])
              + cfg.species.q * fs.Phi)
        energy_series.append(en)
        r, v = traj.r[i], traj.v[i]
        rows.append((traj.t[i], r[0], r[1], r[2], v[0], v[1], v[2],
                     None, None, mus[i], en, None))
    return rows, np.asarray(energy_series), mus


def _cmd_orbit(cfg: RunConfig, out: str, jobs: int) -> dict:
    it = cfg.integrator
    traj = integrate_full(cfg.initial_full_state(), it.t_end, it.dt,
                          cfg.field, cfg.eps, cfg.species, scheme=it.scheme,
                          sample_stride=it.sample_stride)
    rows, energy, mus = _orbit_rows(traj, cfg)
    write_csv(os.path.join(out, "trajectory.csv"), TRAJ_COLUMNS, rows,
              TRAJ_NOTE)
    write_csv(os.path.join(out, "diagnostics.csv"), ("t", "energy", "mu"),
              zip(traj.t, energy, mus))
    summary = _base_summary("orbit", cfg)
    summary["residual_maxima"] = {
        "energy_drift": float(np.max(np.abs(energy - energy[0]))
                              / abs(energy[0])),
        "mu_drift": float(np.max(np.abs(mus - mus[0])) / mus[0]),
    }
    summary["n_samples"] = len(traj)
    return summary


def _cmd_gc(cfg: RunConfig, out: str, jobs: int) -> dict:
    it = cfg.integrator
    g0 = cfg.initial_gc_state()
    traj = integrate_gc(g0, it.t_end, it.dt, cfg.field, cfg.eps, cfg.species,
                        sample_stride=it.sample_stride)
    mu = -(cfg.species.q / (cfg.species.m * cfg.species.c)) * traj.p_phi
    K = np.array([
        hamiltonian_K(traj.state(i),
                      sample(cfg.field, traj.r[i], traj.t[i], cfg.eps,
                             cfg.species), cfg.species)
        for i in range(len(traj))
    ])
    rows = [
        (traj.t[i], traj.r[i][0], traj.r[i][1], traj.r[i][2],
         traj.p_r[i][0], traj.p_r[i][1], traj.p_r[i][2], traj.phi[i],
         traj.p_phi[i], mu[i], K[i], traj.residual[i])
        for i in range(len(traj))
    ]
    write_csv(os.path.join(out, "trajectory.csv"), TRAJ_COLUMNS, rows,
              TRAJ_NOTE)
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("t", "K", "p_phi", "constraint_residual"),
              zip(traj.t, K, traj.p_phi, traj.residual))
    summary = _base_summary("gc", cfg)
    summary["residual_maxima"] = {
        "K_drift": float(np.max(np.abs(K - K[0])) / abs(K[0])),
        "p_phi_drift": float(np.max(np.abs(traj.p_phi - traj.p_phi[0]))),
        "constraint_residual": float(np.max(traj.residual)),
    }
    summary["n_samples"] = len(traj)
    return summary


def _cmd_transform(cfg: RunConfig, out: str, jobs: int) -> dict:
    sp = cfg.species
    s0 = cfg.initial_full_state()
    g = to_guiding_center(s0, cfg.field, cfg.eps, sp)
    s2 = from_guiding_center(g, cfg.field, cfg.eps, sp)
    g2 = to_guiding_center(s2, cfg.field, cfg.eps, sp)
    fs = sample(cfg.field, g.r, g.t, cfg.eps, sp)
    mu = g.mu(sp)
    K = hamiltonian_K(g, fs, sp)
    en = 0.5 * sp.m * float(s0.v @ s0.v) + sp.q * sample(
        cfg.field, s0.r, s0.t, cfg.eps, sp).Phi
    rows = [
        (s0.t, s0.r[0], s0.r[1], s0.r[2], s0.v[0], s0.v[1], s0.v[2],
         None, None, mu, en, None),
        (g.t, g.r[0], g.r[1], g.r[2], g.p_r[0], g.p_r[1], g.p_r[2],
         g.phi, g.p_phi, mu, K, 0.0),
    ]
    write_csv(os.path.join(out, "trajectory.csv"), TRAJ_COLUMNS, rows,
              TRAJ_NOTE)
    pos_err = float(np.linalg.norm(s2.r - s0.r))
    vel_err = float(np.linalg.norm(s2.v - s0.v))
    gc_err = float(np.linalg.norm(g2.r - g.r))
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("position_error", "velocity_error", "gc_position_error"),
              [(pos_err, vel_err, gc_err)])
    summary = _base_summary("transform", cfg)
    summary["guiding_center"] = {
        "r": g.r, "p_r": g.p_r, "phi": g.phi, "p_phi": g.p_phi, "v": g.v,
        "mu": mu, "u": g.u(fs), "w": g.w(fs, sp),
    }
    summary["residual_maxima"] = {
        "round_trip_position": pos_err,
        "round_trip_velocity": vel_err,
        "round_trip_gc_position": gc_err,
    }
    return summary


def _cmd_compare(cfg: RunConfig, out: str, jobs: int) -> dict:
    sp = cfg.species
    it = cfg.integrator
    s0 = cfg.initial_full_state()
    full = integrate_full(s0, it.t_end, it.dt, cfg.field, cfg.eps, sp,
                          scheme=it.scheme, sample_stride=1)
    avg = gc_from_orbit_average(full, cfg.field, cfg.eps, sp)
    g0 = to_guiding_center(s0, cfg.field, cfg.eps, sp)
    dt_gc = it.dt * it.sample_stride
    gc = integrate_gc(g0, it.t_end, dt_gc, cfg.field, cfg.eps, sp)
    mu_gc = -(sp.q / (sp.m * sp.c)) * gc.p_phi
    K = np.array([
        hamiltonian_K(gc.state(i),
                      sample(cfg.field, gc.r[i], gc.t[i], cfg.eps, sp), sp)
        for i in range(len(gc))
    ])
    rows = [
        (gc.t[i], gc.r[i][0], gc.r[i][1], gc.r[i][2], gc.p_r[i][0],
         gc.p_r[i][1], gc.p_r[i][2], gc.phi[i], gc.p_phi[i], mu_gc[i],
         K[i], gc.residual[i])
        for i in range(len(gc))
    ]
    write_csv(os.path.join(out, "trajectory.csv"), TRAJ_COLUMNS, rows,
              TRAJ_NOTE)
    r_interp = np.column_stack([
        np.interp(avg.t, gc.t, gc.r[:, k]) for k in range(3)
    ])
    err = np.sqrt(np.sum((r_interp - avg.r) ** 2, axis=1))
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("t", "tracking_error", "mu_orbit_avg"),
              zip(avg.t, err, avg.mu))
    summary = _base_summary("compare", cfg)
    summary["residual_maxima"] = {
        "tracking_error": float(np.max(err)),
        "constraint_residual": float(np.max(gc.residual)),
        "K_drift": float(np.max(np.abs(K - K[0])) / abs(K[0])),
    }
    summary["n_avg_samples"] = len(avg.t)
    return summary


def _cmd_scan(cfg: RunConfig, out: str, jobs: int) -> dict:
    if cfg.scan is None:
        raise ConfigError("config error: scan section required for the scan "
                          "subcommand")
    metric = diagnostics.build_metric(cfg.scan.metric, cfg.field,
                                      cfg.initial_full_state(), cfg.species,
                                      **cfg.scan.options)
    result = diagnostics.scan(metric, cfg.scan.eps_list, jobs=jobs)
    write_csv(os.path.join(out, "diagnostics.csv"), ("eps", "metric"),
              zip(result.eps_values, result.metric_values))
    summary = _base_summary("scan", cfg)
    summary["eps"] = list(result.eps_values)
    summary["metric"] = cfg.scan.metric
    summary["metric_values"] = list(result.metric_values)
    summary["slopes"] = {
        cfg.scan.metric: result.loglog_slope,
        cfg.scan.metric + "_stderr": result.slope_stderr,
    }
    summary["loglog_slope"] = result.loglog_slope
    return summary


def _cmd_action_check(cfg: RunConfig, out: str, jobs: int) -> dict:
    sp = cfg.species
    it = cfg.integrator
    s0 = cfg.initial_full_state()
    rows = []
    summary = _base_summary("action-check", cfg)
    residuals = {}
    for label, dt in (("dt", it.dt), ("dt_half", 0.5 * it.dt)):
        traj = integrate_full(s0, it.t_end, dt, cfg.field, cfg.eps, sp,
                              scheme="rk4", sample_stride=1)
        t, Y = canonchecks.full_path(traj, cfg.field, cfg.eps, sp)
        act = canonchecks.FullOrbitAction(cfg.field, cfg.eps, sp)
        res = canonchecks.el_residual(act, t, Y, node_stride=4)
        residuals["full_" + label] = res
        rows.append(("full", dt, res))
    g0 = to_guiding_center(s0, cfg.field, cfg.eps, sp)
    for label, dt in (("dt", it.dt * it.sample_stride),
                      ("dt_half", 0.5 * it.dt * it.sample_stride)):
        traj = integrate_gc(g0, it.t_end, dt, cfg.field, cfg.eps, sp)
        t, Y = canonchecks.gc_path(traj)
        act = canonchecks.GCAction(cfg.field, cfg.eps, sp)
        res = canonchecks.el_residual(act, t, Y, node_stride=4)
        residuals["gc_" + label] = res
        rows.append(("gc", dt, res))
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("path", "dt", "el_residual"), rows)
    summary["residual_maxima"] = residuals
    summary["slopes"] = {
        "full_ratio": residuals["full_dt"] / residuals["full_dt_half"],
        "gc_ratio": residuals["gc_dt"] / residuals["gc_dt_half"],
    }
    return summary


def _cmd_canon_check(cfg: RunConfig, out: str, jobs: int) -> dict:
    sp = cfg.species
    it = cfg.integrator
    g0 = cfg.initial_gc_state()
    sys_gc = canonchecks.gyrokinetic_system(cfg.field, cfg.eps, sp)
    reports = {}
    rows = []
    for label, dt in (("dt", it.dt), ("dt_half", 0.5 * it.dt)):
        traj = integrate_gc(g0, it.t_end, dt, cfg.field, cfg.eps, sp)
        t, z, u = canonchecks.gc_blocks(traj, cfg.field, cfg.eps, sp)
        rep = canonchecks.verify_generalized_canonical(sys_gc, t, z, u)
        reports[label] = rep
        rows.append((dt, rep.hamilton_residual_max,
                     rep.constraint_residual_max))
    write_csv(os.path.join(out, "diagnostics.csv"),
              ("dt", "hamilton_residual", "constraint_residual"), rows)
    summary = _base_summary("canon-check", cfg)
    summary["residual_maxima"] = {
        "hamilton": reports["dt"].hamilton_residual_max,
        "constraint": reports["dt"].constraint_residual_max,
    }
    summary["slopes"] = {
        "hamilton_ratio": (reports["dt"].hamilton_residual_max
                           / reports["dt_half"].hamilton_residual_max),
    }
    return summary


COMMANDS = {
    "fields-check": _cmd_fields_check,
    "orbit": _cmd_orbit,
    "gc": _cmd_gc,
    "transform": _cmd_transform,
    "compare": _cmd_compare,
    "scan": _cmd_scan,
    "action-check": _cmd_action_check,
    "canon-check": _cmd_canon_check,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gyrokit",
        description="Guiding-center dynamics runs with CSV/JSON output.",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", required=True, help="YAML run config")
        sp.add_argument("--out-dir", default=".", help="output directory")
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel scan jobs")
        sp.add_argument("--quiet", action="store_true")
    pl = sub.add_parser("plot", help="render figures from an output directory")
    pl.add_argument("--out-dir", default=".",
                    help="directory holding trajectory/diagnostics/summary")
    pl.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        from . import plots

        written = plots.render_output_dir(args.out_dir)
        if not args.quiet:
            for path in written:
                print(f"wrote {path}")
        return 0

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        summary = COMMANDS[args.command](cfg, args.out_dir, args.jobs)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except GyrokitError as exc:
        summary = _base_summary(args.command, cfg)
        summary["status"] = "numerical_failure"
        summary["error"] = f"{type(exc).__name__}: {exc}"
        write_summary(os.path.join(args.out_dir, "summary.json"), summary)
        if not args.quiet:
            print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    write_summary(os.path.join(args.out_dir, "summary.json"), summary)
    if not args.quiet:
        print(f"{args.command}: status={summary['status']} "
              f"out={args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
