"""``radcal <command> --config <path> --out <dir> [--seed N]``.

Commands:

    simulate   raw PGM captures (+ sidecars) of the scene and panel over the sweep grid
    sweep      per-band sweep CSV, onset JSON and exposure windows
    calibrate  calibrated reflectance images (.npy) and ELM lines with R²/MAPE
    crossmat   cross-calibration MAPE matrices per band (CSV + JSON) and plot data
    vi         per-plot index CSV and regression JSON
    report     consolidated JSON summary of all of the above

On failure a JSON error record is printed to stderr and the process exits
with the error's code (listed in ``--help``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import load_run_config
from .errors import RadcalError, all_error_classes
from .io import ensure_dir

COMMANDS = ("simulate", "sweep", "calibrate", "crossmat", "vi", "report")
EXIT_INTERNAL = 1
EXIT_IO = 3


def _exit_code_table() -> str:
    lines = ["exit codes:", "  0   success", f"  {EXIT_INTERNAL}   unexpected internal error",
             "  2   invalid command line", f"  {EXIT_IO}   operating-system I/O failure"]
    for cls in all_error_classes():
        lines.append(f"  {cls.exit_code:<3d} {cls.__name__}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radcal",
        description="Radiometric calibration and exposure analysis for multispectral captures.",
        epilog=_exit_code_table(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="run-config JSON")
    parser.add_argument("--out", required=True, help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def run(command: str, config_path, out, seed: int | None = None) -> list[str]:
    """Execute one command; returns the files now under ``out``, relative to it."""
    config = load_run_config(config_path).with_seed(seed)
    out = ensure_dir(out)
    if command == "simulate":
        pipeline.write_simulation(config, out)
    elif command == "sweep":
        pipeline.write_sweep({b: pipeline.compute_sweep(config, b) for b in config.bands}, out)
    elif command == "calibrate":
        pipeline.write_calibration({b: pipeline.compute_calibration(config, b) for b in config.bands}, out)
    elif command == "crossmat":
        pipeline.write_crossmat({b: pipeline.compute_crossmat(config, b) for b in config.bands}, out)
    elif command == "vi":
        pipeline.write_vi(pipeline.compute_vi_experiment(config), out)
    elif command == "report":
        pipeline.write_report(pipeline.compute_report(config), out / "report.json")
    else:
        raise RadcalError(f"unknown command {command!r}")
    return sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file())


def _error_record(exc: BaseException, code: int, command: str, config_path: str) -> str:
    return json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc),
                       "command": command, "config": config_path}, sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args.command, Path(args.config), Path(args.out), args.seed)
    except RadcalError as exc:
        print(_error_record(exc, exc.exit_code, args.command, args.config), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(_error_record(exc, EXIT_IO, args.command, args.config), file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
