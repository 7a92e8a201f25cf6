"""Command-line entry points.

Subcommands: run, galerkin, viscosity, stability, invariant, tightness,
diagnose.  Every run writes a manifest (resolved config echo, master seed,
version, artifact checksums); numbers in CSVs are printed with 17
significant digits so parsing them back reproduces the exact doubles.
Exit codes: 0 success, 2 constraint error, 3 blow-up.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, rng as rngmod
from .dynamics import parse_observables, run_trajectory
from .errors import (BlowUpError, ConfigurationError, TimeStepError)
from .experiments import (galerkin_sweep, log_estimate_monitor, lp_envelope,
                          viscosity_sweep, w14_monitor, weak_residual,
                          yudovich_stability)
from .fieldio import write_field
from .measures import kb_average, tightness_diagnostic
from .runconfig import parse_config, realize
from .spectral import LayerField, single_mode_field

FMT = "{:.17g}"


def _fmt(x) -> str:
    return FMT.format(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _write_manifest(out: Path, settings, defaulted, args, artifacts,
                    extra=None):
    manifest = {
        "version": f"layerqg {__version__}",
        "master_seed": args.seed,
        "rng_scheme": rngmod.SCHEME,
        "config": settings.echo(),
        "defaults_applied": sorted(defaulted),
        "flags": {k: v for k, v in vars(args).items()
                  if k not in ("func", "config")},
        "artifacts": [{"path": p.name, "sha256": _sha256(p)}
                      for p in sorted(artifacts)],
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _series_rows(record, names):
    for i, t in enumerate(record.times):
        yield [t] + [record.observables[n][i] for n in names]


def _common(parser):
    parser.add_argument("--config", required=True, help="key=value file")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1)


def _setup(args, snap_every=0):
    settings, defaulted = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = realize(settings, args.seed, snap_every=snap_every)
    return settings, defaulted, out, config


def cmd_run(args):
    settings, defaulted, out, config = _setup(args, snap_every=args.snap_every)
    observables = parse_observables(settings.observables, config.pairs)
    artifacts = []
    blown = None
    try:
        record = run_trajectory(config, observables=observables)
    except BlowUpError as err:
        record = err.record
        blown = err.time
    names = [ob.name for ob in observables]
    series = out / "series.csv"
    _write_csv(series, ["time"] + names, _series_rows(record, names))
    artifacts.append(series)
    for i, t in enumerate(record.snap_times):
        snap = out / f"snapshot_{i:06d}.lqg"
        write_field(snap, LayerField.from_coeffs(config.basis,
                                                 record.q_snapshots[i]))
        artifacts.append(snap)
    extra = {"blow_up_time": blown} if blown is not None else None
    _write_manifest(out, settings, defaulted, args, artifacts, extra)
    if blown is not None:
        print(f"blow-up at t={blown}", file=sys.stderr)
        return 3
    return 0


def cmd_galerkin(args):
    settings, defaulted, out, config = _setup(args)
    ladder = [int(v) for v in args.n_ladder.split(",")]
    report = galerkin_sweep(config, ladder, snap_every=args.snap_every or 1,
                            threads=args.threads)
    path = out / "galerkin.csv"
    _write_csv(path, ["rungs", report.distance_name],
               [[label, d] for label, d in report.rows()])
    _write_manifest(out, settings, defaulted, args, [path], {
        "monotone_decreasing": report.monotone_decreasing,
        "first_violation": report.first_violation,
        "empirical_rate": report.empirical_rate})
    return 0


def cmd_viscosity(args):
    settings, defaulted, out, config = _setup(args)
    ladder = [float(v) for v in args.eps_ladder.split(",")]
    report = viscosity_sweep(config, ladder, snap_every=args.snap_every or 1,
                             threads=args.threads)
    path = out / "viscosity.csv"
    _write_csv(path, ["rungs", report.distance_name],
               [[label, d] for label, d in report.rows()])
    est = out / "viscosity_est2.csv"
    _write_csv(est, ["eps", "eps_l2h1"],
               zip(ladder, report.extras["est2"]))
    _write_manifest(out, settings, defaulted, args, [path, est], {
        "monotone_decreasing": report.monotone_decreasing,
        "first_violation": report.first_violation})
    return 0


def cmd_stability(args):
    settings, defaulted, out, config = _setup(args)
    ladder = [float(v) for v in args.delta_ladder.split(",")]
    pert = single_mode_field(config.basis, 1, 2, [1.0, -0.5, 0.25])
    report = yudovich_stability(config, ladder, pert,
                                snap_every=args.snap_every or 1,
                                threads=args.threads)
    path = out / "stability.csv"
    _write_csv(path, ["delta", "z_T", "max_step_jump"],
               zip(ladder, report.distances, report.extras["max_jump"]))
    _write_manifest(out, settings, defaulted, args, [path], {
        "z_decreasing": bool(np.all(np.diff(report.distances) < 0))})
    return 0


def cmd_invariant(args):
    settings, defaulted, out, config = _setup(args)
    horizons = [float(v) for v in args.horizons.split(",")]
    observables = parse_observables(settings.observables, config.pairs)
    measures = kb_average(config, horizons, observables,
                          n_paths=args.paths, threads=args.threads)
    path = out / "invariant.csv"
    names = measures[0].names
    rows = []
    for m in measures:
        for name, mean, err in zip(m.names, m.means, m.stderrs):
            rows.append([m.horizon, name, mean, err])
    _write_csv(path, ["horizon", "observable", "mean", "stderr"], rows)
    _write_manifest(out, settings, defaulted, args, [path],
                    {"n_paths": args.paths, "observables": names})
    return 0


def cmd_tightness(args):
    settings, defaulted, out, config = _setup(args)
    report = tightness_diagnostic(config, rate=args.rate,
                                  horizon=args.horizon)
    frac = out / "tightness_fractions.csv"
    _write_csv(frac, ["radius", "fraction"],
               zip(report.radii, report.fractions))
    series = out / "tightness_series.csv"
    env = report.envelope if report.envelope is not None \
        else np.full_like(report.times, np.nan)
    _write_csv(series, ["time", "q_inf", "theta_inf", "zeta_h52", "envelope"],
               zip(report.times, report.q_inf_series,
                   report.theta_inf_series, report.zeta_norm_series, env))
    _write_manifest(out, settings, defaulted, args, [frac, series], {
        "sup_q_inf": report.sup_q_inf,
        "thirds": report.thirds.tolist(),
        "trend_ok": report.trend_ok,
        "envelope_uninformative": report.envelope_uninformative,
        "envelope_condition_held": report.envelope_condition_held})
    return 0


def cmd_diagnose(args):
    settings, defaulted, out, config = _setup(
        args, snap_every=args.snap_every or 1)
    try:
        record = run_trajectory(config, observables=[])
    except BlowUpError as err:
        print(f"blow-up at t={err.time}", file=sys.stderr)
        return 3
    artifacts = []
    log_rep = log_estimate_monitor(record)
    w14 = w14_monitor(record)
    rows = []
    envs = {}
    for k in (1, 2):
        q_norm, env_q, _, _ = lp_envelope(record, k)
        envs[k] = (q_norm, env_q)
    phi = single_mode_field(config.basis, 1, 1, [1.0, 0.0, 0.0])
    resid = weak_residual(record, [phi])[0]
    for i, t in enumerate(record.snap_times):
        rows.append([t, log_rep.series[i], w14.series[i], w14.envelope[i],
                     envs[1][0][i], envs[1][1][i],
                     envs[2][0][i], envs[2][1][i], resid[i]])
    path = out / "diagnostics.csv"
    _write_csv(path, ["time", "log_ratio", "gradl4", "gradl4_envelope",
                      "l2", "l2_envelope", "l4", "l4_envelope",
                      "weak_residual"], rows)
    artifacts.append(path)
    _write_manifest(out, settings, defaulted, args, artifacts, {
        "log_ratio_max": log_rep.maximum,
        "w14_dominated": w14.dominated,
        "l2_dominated": bool(np.all(envs[1][0] <= envs[1][1] * (1 + 1e-9))),
        "l4_dominated": bool(np.all(envs[2][0] <= envs[2][1] * (1 + 1e-9)))})
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="layerqg",
        description="Damped stochastic 3-layer quasi-geostrophic experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single trajectory, CSV series")
    _common(p)
    p.add_argument("--snap-every", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("galerkin", help="mode-refinement study")
    _common(p)
    p.add_argument("--n-ladder", default="16,32,64")
    p.add_argument("--snap-every", type=int, default=0)
    p.set_defaults(func=cmd_galerkin)

    p = sub.add_parser("viscosity", help="vanishing-viscosity study")
    _common(p)
    p.add_argument("--eps-ladder", default="0.2,0.1,0.05,0.025")
    p.add_argument("--snap-every", type=int, default=0)
    p.set_defaults(func=cmd_viscosity)

    p = sub.add_parser("stability", help="perturbation-growth study")
    _common(p)
    p.add_argument("--delta-ladder", default="0.1,0.01,0.001")
    p.add_argument("--snap-every", type=int, default=0)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("invariant", help="time-averaged observables")
    _common(p)
    p.add_argument("--horizons", default="50,100,200")
    p.add_argument("--paths", type=int, default=4)
    p.set_defaults(func=cmd_invariant)

    p = sub.add_parser("tightness", help="long-run confinement diagnostic")
    _common(p)
    p.add_argument("--rate", type=float, default=2.0)
    p.add_argument("--horizon", type=float, default=100.0)
    p.set_defaults(func=cmd_tightness)

    p = sub.add_parser("diagnose", help="monitors and envelopes for one run")
    _common(p)
    p.add_argument("--snap-every", type=int, default=1)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, TimeStepError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except BlowUpError as err:
        print(f"blow-up: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
