"""Command line entry point: ``chnsdbc <subcommand> [options]``.

Every subcommand prints a short human summary on stdout and writes its
machine-readable outputs to ``-o/--outdir``. With ``--strict`` any failed
check (or error) ends the process with a nonzero exit code and a single JSON
object ``{"error", "message", "command"}`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, kernels
from . import io as cio
from .config import RunConfig, initial_state, parse_config

EXIT_FAILED = 1
EXIT_ERROR = 2


class CheckFailed(Exception):
    """A report completed but its pass condition does not hold."""


def _outdir(args) -> Path:
    d = Path(args.outdir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config(args) -> RunConfig:
    if args.config is None:
        raise ValueError("this subcommand needs -c <config>")
    return parse_config(args.config)


def _require(ok: bool, what: str) -> None:
    if not ok:
        raise CheckFailed(what)


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> dict:
    from .solver import n_steps_for, run

    if args.resume:
        manifest, cfg = cio.read_manifest(args.resume)
        out = Path(args.resume).parent
    else:
        cfg = _config(args)
        out = _outdir(args)
        manifest = None
    params, scheme = cfg.model_params(), cfg.scheme_config()
    grid = cfg.grid()
    total = n_steps_for(cfg.run.T, scheme.dt)
    cadence = cfg.run.snapshot_cadence
    energy = out / "energy.csv"

    if manifest is not None:
        done = cio.snapshot_indices(out)
        if not done:
            raise ValueError("nothing to resume: no snapshots next to the manifest")
        start = done[-1]
        state = cio.read_snapshot(out, start, grid)
        cio.truncate_energy_csv(energy, state.t)
        files = [f for f in manifest["snapshots"] if int(Path(f).name.split("_")[0]) <= start]
    else:
        start = 0
        state = initial_state(cfg)
        cio.write_energy_csv(energy, [])
        files = cio.write_snapshot(out, 0, state)
    cio.write_manifest(out, cfg, steps=start, snapshots=files, complete=start >= total)

    pending = []

    def on_step(n, s, report):
        pending.append(report)
        step = start + n
        if step % cadence == 0 or step == total:
            cio.write_energy_csv(energy, pending, append=True)
            pending.clear()
            files.extend(cio.write_snapshot(out, step, s))
            cio.write_manifest(out, cfg, steps=step, snapshots=files, complete=step == total)

    if start < total:
        remaining = (total - start) * scheme.dt
        run(state, params, scheme, remaining, callbacks=[on_step], keep_snapshots=False)
    return {"outdir": str(out), "steps": total, "resumed_from": start if manifest else None, "ok": True}


# ---------------------------------------------------------------------------
# reports


def cmd_verify_operators(args) -> dict:
    from . import verification as vf

    studies = vf.run_studies()
    table = vf.convergence_table(studies)
    fourier = vf.fourier_symbol_check()
    out = _outdir(args)
    (out / "convergence.csv").write_text(table, encoding="utf-8")
    orders = {s.name: s.observed_order for s in studies}
    ok = all(o >= args.min_order for o in orders.values()) and all(v <= args.roundoff for v in fourier.values())
    report = {"orders": orders, "fourier": fourier, "min_order": args.min_order, "roundoff": args.roundoff, "ok": ok}
    cio.write_json(out / "verify_operators.json", report)
    print(table, end="")
    for name, v in fourier.items():
        print(f"fourier {name}: {v:.3e}")
    _require(ok, "operator convergence below the required order")
    return report


def cmd_energy_report(args) -> dict:
    from .studies import energy_study

    cfg = _config(args)
    study = energy_study(cfg, halve=args.halve)
    out = _outdir(args)
    cio.write_energy_csv(out / "energy.csv", study.ledger)
    report = study.to_dict()
    cio.write_json(out / "energy_report.json", report)
    print(f"max per-step increase {study.max_increase:.3e} (bound {study.increase_bound:.3e})")
    print(f"integrated identity defect {study.integrated_defect:.6e}")
    if study.halved is not None:
        print(f"defect ratio under dt halving {study.defect_ratio:.4f}")
    _require(study.ok, "energy ledger check failed")
    return report


def cmd_absorption(args) -> dict:
    from .studies import absorption_study

    cfg = _config(args)
    study = absorption_study(cfg)
    out = _outdir(args)
    report = study.to_dict()
    cio.write_json(out / "absorption.json", report)
    f = study.fit
    print(f"delta {f.delta:.6g}  rho/delta {f.rho_over_delta:.6g}  plateau spread {f.plateau_spread:.3e}  max violation {f.max_violation:.3e}")
    _require(study.ok, "absorbing-set check failed")
    return report


def cmd_gronwall(args) -> dict:
    from .studies import calibrate_gronwall, gronwall_study

    cfg = _config(args)
    out = _outdir(args)
    if args.calibrate:
        C = calibrate_gronwall(cfg, eps=args.perturbation)
        report = {"calibrated_C": C, "ok": True}
        cio.write_json(out / "gronwall_calibration.json", report)
        print(f"gronwall_C = {C!r}")
        return report
    rep = gronwall_study(cfg, eps=args.perturbation, stream=args.stream)
    report = rep.to_dict()
    cio.write_json(out / "gronwall.json", report)
    print(f"C {rep.C:.6g}  M_T {rep.M_T:.6g}  max ratio {rep.max_ratio:.6g}  within slack {rep.separation_ok}")
    _require(rep.separation_ok, "continuous-dependence bound violated beyond slack")
    return report


def cmd_trajectory_dim(args) -> dict:
    from scipy.spatial.distance import squareform

    from . import trajectory as tr
    from .studies import dimension_study, ensemble, smoothing_study

    cfg = _config(args)
    out = _outdir(args)
    params = cfg.model_params()
    segs = ensemble(cfg)
    cio.write_matrix_csv(out / "distances.csv", squareform(tr.pairwise_distances(segs, params)))
    study = dimension_study(cfg, segs)
    report = study.to_dict()
    cio.write_json(out / "dimension.json", study.segments.to_dict())
    print(
        f"segments: slope {study.segments.slope:.4f} CI [{study.segments.ci_low:.4f}, {study.segments.ci_high:.4f}]"
        f"  e1 images: {study.images.slope:.4f}  theta {study.lipschitz.theta:.4g}"
    )
    ok = study.ok
    if args.smoothing or args.calibrate:
        sm = smoothing_study(cfg, reference=segs, kappa=None if args.calibrate else cfg.diagnostics.kappa or None)
        report["smoothing"] = sm.to_dict()
        if args.calibrate:
            print(f"kappa = {sm.kappa!r}")
        else:
            print(f"kappa {sm.kappa:.6g}  worst held-out ratio/bound {sm.worst:.6g}")
            ok = ok and sm.ok
    report["ok"] = ok
    cio.write_json(out / "trajectory_dim.json", report)
    _require(ok, "trajectory checks failed")
    return report


def cmd_check_hypotheses(args) -> dict:
    from .physics import GrowthHypothesis, check_hypotheses

    hyp = _config(args).hypothesis() if args.config else GrowthHypothesis()
    rep = check_hypotheses(hyp)
    print("satisfied" if rep.satisfied else "violated")
    print(f"{'constant':<10}{'value':>12}")
    for k, v in rep.constants.items():
        print(f"{k:<10}{v:>12.6g}")
    for name, w in rep.witnesses.items():
        if w is not None:
            print(f"witness {name}: {w}")
    report = rep.to_dict()
    if args.outdir:
        cio.write_json(_outdir(args) / "hypotheses.json", report)
    _require(rep.satisfied, "growth hypotheses violated")
    return report


COMMANDS = {
    "run": cmd_run,
    "verify-operators": cmd_verify_operators,
    "energy-report": cmd_energy_report,
    "absorption": cmd_absorption,
    "gronwall": cmd_gronwall,
    "trajectory-dim": cmd_trajectory_dim,
    "check-hypotheses": cmd_check_hypotheses,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI run configuration")
    common.add_argument("-o", "--outdir", default=".", help="output directory (default: .)")
    common.add_argument("--strict", action="store_true", help="nonzero exit and JSON error on any failed check")
    common.add_argument("--threads", type=int, default=1, help="threads for per-mode solves (wall-clock only)")

    parser = argparse.ArgumentParser(prog="chnsdbc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="integrate and write energy.csv, snapshots, manifest.json")
    p.add_argument("--resume", metavar="MANIFEST", help="continue an interrupted run from its manifest")
    p = sub.add_parser("verify-operators", parents=[common], help="manufactured-solution convergence table")
    p.add_argument("--min-order", type=float, default=1.9)
    p.add_argument("--roundoff", type=float, default=1e-10, help="tolerance of the Fourier-symbol check")
    p = sub.add_parser("energy-report", parents=[common], help="energy ledger and per-step increase")
    p.add_argument("--halve", action="store_true", help="repeat at dt/2 and report the defect ratio")
    sub.add_parser("absorption", parents=[common], help="absorbing-set fit over three initial energies")
    p = sub.add_parser("gronwall", parents=[common], help="continuous dependence on initial data")
    p.add_argument("--perturbation", type=float, default=None, help="initial perturbation size (default: config)")
    p.add_argument("--stream", type=int, default=1, help="RNG stream of the perturbation")
    p.add_argument("--calibrate", action="store_true", help="fit the growth constant C on this pair and print it")
    p = sub.add_parser("trajectory-dim", parents=[common], help="attractor ensemble, dimension and Lipschitz checks")
    p.add_argument("--smoothing", action="store_true", help="also run the smoothing check with a held-out ensemble")
    p.add_argument("--calibrate", action="store_true", help="print kappa fitted on the reference ensemble")
    p = sub.add_parser("check-hypotheses", parents=[common], help="sampled check of the growth conditions")
    p.set_defaults(outdir=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        kernels.set_threads(args.threads)
        COMMANDS[args.command](args)
    except CheckFailed as exc:
        return _fail(args, "check_failed", str(exc), EXIT_FAILED)
    except Exception as exc:
        return _fail(args, type(exc).__name__, str(exc), EXIT_ERROR)
    return 0


def _fail(args, kind: str, message: str, code: int) -> int:
    if args.strict:
        print(json.dumps({"error": kind, "message": message, "command": args.command}), file=sys.stderr)
        return code
    print(f"chnsdbc {args.command}: {message}", file=sys.stderr)
    # outside strict mode a failed check is reported but does not fail the process
    return 0 if kind == "check_failed" else code


__all__ = ["main", "build_parser", "COMMANDS", "CheckFailed"]
