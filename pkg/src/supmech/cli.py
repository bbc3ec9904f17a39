"""Command-line front end.

    supmech validate|calibrate|measure|sweep --config PATH --out DIR [--seed N] [--snapshot-stride K]

Exit codes are listed in ``EXIT_CODES``; each error class has its own.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from . import errors
from .config import ExperimentConfig, check_config, default_config_path, load_config
from .hybrid import marginals
from .io import write_csv, write_grid_function, write_hybrid_state, write_json
from .measurement import (
    BOUND_FLOOR,
    BOUND_SLACK,
    CalibrationReport,
    build_experiment,
    calibrate,
    decoherence_sweep,
    run_measurement,
)

SUMMARY_SCHEMA = "supmech-summary/1"
COMMANDS = ("validate", "calibrate", "measure", "sweep")

EXIT_OK = 0
EXIT_USAGE = 2
# most specific class first
EXIT_CODES: list[tuple[type, int]] = [
    (errors.ParseError, 3),
    (errors.InvariantViolation, 4),
    (errors.GeometryInfeasible, 5),
    (errors.DegenerateSpectrum, 6),
    (errors.CalibrationFailure, 7),
    (errors.CflViolation, 8),
    (errors.MassLeak, 9),
    (errors.OverlappingDomains, 10),
    (errors.SupmechError, 11),
    (OSError, 12),
]


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    raise exc


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: Path
    out_dir: Path | None
    seed: int = 0
    snapshot_stride: int | None = None
    scales: tuple | None = None


def _prepare_out(manifest: RunManifest) -> Path:
    if manifest.out_dir is None:
        raise errors.InvariantViolation([("--out", f"required for {manifest.command}")])
    out = Path(manifest.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_checked(manifest: RunManifest) -> ExperimentConfig:
    config = load_config(manifest.config_path)
    problems = check_config(config, geometry=False)
    if problems:
        raise errors.InvariantViolation(problems)
    return config


def _calibration_rows(report: CalibrationReport):
    return [[e.index, e.eigenvalue, e.label, e.mass, e.fidelity, e.passed] for e in report.entries]


CALIBRATION_HEADER = ["branch", "eigenvalue", "label", "mass_in_domain", "fidelity", "passed"]


def cmd_validate(manifest: RunManifest) -> int:
    config = load_config(manifest.config_path)
    problems = check_config(config)
    for f, m in problems:
        print(f"{f}: {m}")
    if manifest.out_dir is not None:
        out = _prepare_out(manifest)
        (out / "validate.txt").write_text("".join(f"{f}: {m}\n" for f, m in problems) or "ok\n")
    if problems:
        raise errors.InvariantViolation(problems)
    print("ok")
    return EXIT_OK


def cmd_calibrate(manifest: RunManifest) -> int:
    out = _prepare_out(manifest)
    experiment = build_experiment(_load_checked(manifest))
    report = calibrate(experiment, raise_on_failure=False)
    write_csv(out / "calibration.csv", CALIBRATION_HEADER, _calibration_rows(report))
    for line in report.lines():
        print(line)
    if not report.passed:
        bad = next(e for e in report.entries if not e.passed)
        raise errors.CalibrationFailure(f"branch {bad.index} failed calibration", index=bad.index, report=report)
    return EXIT_OK


def cmd_measure(manifest: RunManifest) -> int:
    out = _prepare_out(manifest)
    config = _load_checked(manifest)
    experiment = build_experiment(config)
    report = calibrate(experiment)
    write_csv(out / "calibration.csv", CALIBRATION_HEADER, _calibration_rows(report))

    callback = None
    if manifest.snapshot_stride:
        snap_dir = out / "snapshots"

        def callback(step, t, state):
            write_hybrid_state(snap_dir / f"state_{step:06d}.csv", state)

    result = run_measurement(experiment, seed=manifest.seed, callback=callback, stride=manifest.snapshot_stride)

    expected = [abs(c) ** 2 for c in experiment.amplitudes]
    born_rows = [[b.eigenvalue, b.label, p, e]
                 for b, p, e in zip(config.branches, result.born, expected)]
    write_csv(out / "born.csv", ["eigenvalue", "label", "probability", "expected"], born_rows)

    w_rows = []
    for name, w in result.W_values.items():
        bound = result.W_bounds[name]
        w_rows.append([name, w, bound, abs(w) <= BOUND_SLACK * bound + BOUND_FLOOR])
    write_csv(out / "W_table.csv", ["probe", "W", "bound", "within_bound"], w_rows)

    rho, dens = marginals(result.Phi_f, check=False)
    write_grid_function(out / "marginal_classical.csv", dens.density, "density")
    write_csv(out / "marginal_quantum.csv", ["row", "col", "re", "im"],
              [[i, j, rho.matrix[i, j].real, rho.matrix[i, j].imag]
               for i in range(rho.dim) for j in range(rho.dim)])

    summary = {
        "schema": SUMMARY_SCHEMA,
        "command": "measure",
        "config_name": config.name,
        "seed": manifest.seed,
        "method": config.method,
        "n_steps": config.n_steps,
        "grid": config.grid,
        "eta_over_hbar": result.eta,
        "born": [{"eigenvalue": r[0], "label": r[1], "probability": r[2], "expected": r[3]} for r in born_rows],
        "residual_mass": result.residual_mass,
        "min_cell_eigenvalue": result.min_eigenvalue,
        "max_abs_W": result.max_abs_W,
        "W": {r[0]: {"value": r[1], "bound": r[2], "within_bound": r[3]} for r in w_rows},
        "calibration": [dict(zip(CALIBRATION_HEADER, row)) for row in _calibration_rows(report)],
    }
    write_json(out / "summary.json", summary)
    for b, p in zip(config.branches, result.born):
        print(f"outcome {b.eigenvalue:+g}: probability {p:.6f}")
    print(f"eta/hbar = {result.eta:.6g}, max |W| = {result.max_abs_W:.3e}")
    return EXIT_OK


def cmd_sweep(manifest: RunManifest) -> int:
    out = _prepare_out(manifest)
    config = _load_checked(manifest)
    sweep = decoherence_sweep(config, manifest.scales, seed=manifest.seed)
    rows = [[r.scale, r.eta_over_hbar, r.max_abs_W, r.max_bound, r.regime] for r in sweep.rows]
    write_csv(out / "sweep.csv", ["scale", "eta_over_hbar", "max_abs_W", "max_bound", "regime"], rows)
    write_json(out / "summary.json", {
        "schema": SUMMARY_SCHEMA,
        "command": "sweep",
        "config_name": config.name,
        "seed": manifest.seed,
        "rows": [dict(zip(["scale", "eta_over_hbar", "max_abs_W", "max_bound", "regime"], r)) for r in rows],
        "trend_ok": sweep.trend_ok,
        "envelope_decreasing": sweep.envelope_decreasing,
    })
    for r in sweep.rows:
        print(f"scale {r.scale:g}: eta/hbar = {r.eta_over_hbar:.6g}, max |W| = {r.max_abs_W:.3e} ({r.regime})")
    return EXIT_OK


HANDLERS = {"validate": cmd_validate, "calibrate": cmd_calibrate, "measure": cmd_measure, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="supmech", description="Hybrid quantum-classical measurement simulator.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, default=None,
                        help=f"experiment config (JSON); default: {default_config_path().name}")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for the random probe observables")
    parser.add_argument("--snapshot-stride", type=int, default=None,
                        help="write the hybrid state every K steps (measure only)")
    parser.add_argument("--scales", type=float, nargs="+", default=None,
                        help="override the sweep scale factors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.snapshot_stride is not None and args.snapshot_stride < 1:
        print("error: --snapshot-stride must be positive", file=sys.stderr)
        return EXIT_USAGE
    manifest = RunManifest(args.command, args.config or default_config_path(), args.out, args.seed,
                           args.snapshot_stride, tuple(args.scales) if args.scales else None)
    try:
        return HANDLERS[manifest.command](manifest)
    except (errors.SupmechError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
