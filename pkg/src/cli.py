"""Command-line entry point: run experiments and write their data and plots."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from .benchmark import DEFAULT_PROBES, DEFAULT_STEPS, bench_frame, cost_slopes, run_benchmark
from .config import ConfigManager, SimConfig, render_config
from .ensemble import draw_inputs, integrate_config, run_ensemble, summarize
from .errors import EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError, NMGLEError
from .export import DEFAULT_OUTPUT_DIR, OutputSession, series_frame, stderr_units
from .logging_setup import LOG_DIR, configure_logging
from .models import Approximation, Formulation
from .observables import KernelEquation, kernel_series, memory_kernel, memory_metric
from .trajectory import TimeGrid

logger = logging.getLogger(__name__)

KERNEL_POINTS = 2000
METRIC_NOTE = "heuristic score defined by this tool, not a published measure"


class CommandName(str, Enum):
    SIMULATE = "simulate"
    COMPARE = "compare-formulations"
    MSD = "msd"
    KERNEL = "kernel"
    BENCH = "bench-convolution"
    ECHO = "echo-config"


@dataclass(slots=True)
class Command:
    name: CommandName
    config_path: Optional[Path] = None
    out: Optional[Path] = None
    steps: tuple[int, ...] = DEFAULT_STEPS
    probes: int = DEFAULT_PROBES
    workers: Optional[int] = None

    @property
    def output_dir(self) -> Path:
        return self.out if self.out is not None else DEFAULT_OUTPUT_DIR / self.name.value


# -- command bodies -----------------------------------------------------------


def _simulate(config: SimConfig, session: OutputSession, command: Command) -> None:
    result = run_ensemble(config, workers=command.workers)
    summary = summarize(result)
    series = result.series
    session.write_series("series.csv", list(series.values()))
    session.write_json("summary.json", summary.to_dict())
    session.write_json("result.json", result.to_dict())
    session.write_plot(
        "msd.svg",
        [series["msd_direct"], series["msd_vacf"]],
        title="Mean-square displacement",
        ylabel="MSD",
        loglog=config.loglog,
    )
    session.write_plot("vacf.svg", [series["vacf"]], title="Velocity autocorrelation", ylabel="C(τ)")


def _compare(config: SimConfig, session: OutputSession, command: Command) -> None:
    if config.approx is not Approximation.QUADRUPOLE:
        raise ConfigError("compare-formulations needs the quadrupole approximation", key="dynamics.approx")
    lattice = config.build_lattice()
    grid = config.grid
    dx = np.zeros(grid.n_points)
    dp = np.zeros(grid.n_points)
    relative = 0.0

    for index in range(config.n_trajectories):
        alphas0, noise = draw_inputs(config, lattice, index)
        local = integrate_config(config, lattice, alphas0, noise, formulation=Formulation.LOCAL)
        reduced = integrate_config(config, lattice, alphas0, noise, formulation=Formulation.REDUCED)
        gap_x = np.linalg.norm(local.positions - reduced.positions, axis=1)
        gap_p = np.linalg.norm(local.momenta - reduced.momenta, axis=1)
        dx = np.maximum(dx, gap_x)
        dp = np.maximum(dp, gap_p)
        scale_x = max(float(np.max(np.abs(local.positions))), np.finfo(float).tiny)
        scale_p = max(float(np.max(np.abs(local.momenta))), np.finfo(float).tiny)
        relative = max(relative, float(gap_x.max()) / scale_x, float(gap_p.max()) / scale_p)

    frame = pd.DataFrame({"t": grid.times(), "abs_dx": dx, "abs_dp": dp})
    session.write_frame("divergence.csv", frame)
    session.write_json(
        "comparison.json",
        {
            "max_abs_dx": float(dx.max()),
            "max_abs_dp": float(dp.max()),
            "max_relative_divergence": relative,
            "n_trajectories": config.n_trajectories,
            "convolution": config.convolution.value,
        },
    )
    logger.info("Local vs reduced: max relative divergence %.3g", relative)


def _msd(config: SimConfig, session: OutputSession, command: Command) -> None:
    result = run_ensemble(config, workers=command.workers)
    direct = result.series["msd_direct"]
    via_vacf = result.series["msd_vacf"]
    combined = np.hypot(direct.stderr, via_vacf.stderr)
    gap = stderr_units(direct.values - via_vacf.values, combined)
    frame = series_frame([direct, via_vacf])
    frame["difference_in_stderr"] = gap
    session.write_frame("msd.csv", frame)
    finite = gap[np.isfinite(gap)]
    session.write_json(
        "msd.json",
        {
            "max_difference_in_stderr": float(finite.max()) if finite.size else None,
            "final_msd_direct": float(direct.values[-1]),
            "final_msd_vacf": float(via_vacf.values[-1]),
            "n_completed": result.n_completed,
        },
    )
    session.write_plot("msd.svg", [direct, via_vacf], title="Mean-square displacement", ylabel="MSD", loglog=config.loglog)


def _kernel(config: SimConfig, session: OutputSession, command: Command) -> None:
    lattice = config.build_lattice()
    horizon = config.horizon(lattice)
    lags = TimeGrid(0.0, horizon / KERNEL_POINTS, KERNEL_POINTS)
    payload: Dict[str, object] = {"horizon": horizon, "approx": config.approx.value, "memory_metric_note": METRIC_NOTE}
    columns = {"tau": lags.elapsed()}
    for which in KernelEquation:
        kernel = memory_kernel(lattice, which, config.approx)
        columns[f"K_{which.value}"] = kernel_series(kernel, lags).values
        payload[f"memory_metric_{which.value}"] = memory_metric(kernel, horizon)
        payload[f"weights_{which.value}"] = kernel.weights.tolist()
        payload[f"omegas_{which.value}"] = kernel.omegas.tolist()
    session.write_frame("kernel.csv", pd.DataFrame(columns))
    session.write_json("kernel.json", payload)


def _bench(config: SimConfig, session: OutputSession, command: Command) -> None:
    rows = run_benchmark(command.steps, command.probes, seed=config.master_seed)
    session.write_frame("bench.csv", bench_frame(rows))
    session.write_json(
        "bench.json",
        {
            "slopes": cost_slopes(rows),
            "speedups": {str(row.steps): row.speedup for row in rows},
            "max_relative_difference": max(row.max_relative_difference for row in rows),
        },
    )


_HANDLERS: Dict[CommandName, Callable[[SimConfig, OutputSession, Command], None]] = {
    CommandName.SIMULATE: _simulate,
    CommandName.COMPARE: _compare,
    CommandName.MSD: _msd,
    CommandName.KERNEL: _kernel,
    CommandName.BENCH: _bench,
}


def _report(exc: BaseException, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    logger.error("Command failed (exit %s): %s", code, exc)
    return code


def execute(command: Command) -> int:
    """Run ``command``; returns the process exit status."""

    manager = ConfigManager(command.config_path)
    try:
        config = manager.load()
    except NMGLEError as exc:
        return _report(exc, exc.exit_code)
    except OSError as exc:
        return _report(exc, EXIT_IO)

    if command.name is CommandName.ECHO:
        sys.stdout.write(render_config(config))
        if command.out is not None:
            try:
                manager.save(command.out, config)
            except OSError as exc:
                return _report(exc, EXIT_IO)
        return EXIT_OK

    try:
        session = OutputSession(command.output_dir)
    except OSError as exc:
        return _report(exc, EXIT_IO)

    logger.info("Running %s into %s", command.name.value, session.directory)
    try:
        session.write_echo(config)
        _HANDLERS[command.name](config, session, command)
    except NMGLEError as exc:
        session.discard()
        return _report(exc, exc.exit_code)
    except OSError as exc:
        session.discard()
        return _report(exc, EXIT_IO)

    logger.info("Wrote %s", ", ".join(path.name for path in session.files))
    print(f"Outputs saved to {session.directory}")
    return EXIT_OK


def _parse_steps(text: str) -> tuple[int, ...]:
    try:
        steps = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid step list {text!r}") from exc
    if not steps or min(steps) < 1:
        raise argparse.ArgumentTypeError("step counts must be positive integers")
    return steps


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m src", description="Particle coupled to field modes: dynamics, memory and diffusion")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-dir", type=Path, default=LOG_DIR, help="Directory for the rotating log file.")
    sub = parser.add_subparsers(dest="command", required=True)

    descriptions = {
        CommandName.SIMULATE: "Run an ensemble and write series, summary and plots",
        CommandName.COMPARE: "Integrate local and reduced quadrupole equations on matched inputs",
        CommandName.MSD: "Compare the VACF double integral with the direct MSD",
        CommandName.KERNEL: "Tabulate memory kernels and the memory score",
        CommandName.BENCH: "Time naive versus incremental history convolution",
        CommandName.ECHO: "Print the effective configuration",
    }
    for name, help_text in descriptions.items():
        command = sub.add_parser(name.value, help=help_text)
        command.add_argument("--config", type=Path, help="Config file (defaults apply when omitted).")
        command.add_argument("--out", type=Path, help="Output directory (defaults to runs/<command>).")
        if name in {CommandName.SIMULATE, CommandName.MSD}:
            command.add_argument("--workers", type=int, help="Worker threads (overrides NMGLE_THREADS).")
        if name is CommandName.BENCH:
            command.add_argument("--steps", type=_parse_steps, default=DEFAULT_STEPS, help="Comma-separated step counts.")
            command.add_argument("--probes", type=int, default=DEFAULT_PROBES, help="Naive calls timed per step count.")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_arg_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(getattr(logging, args.log_level), args.log_dir)
    except OSError as exc:
        return _report(exc, EXIT_IO)

    command = Command(
        name=CommandName(args.command),
        config_path=args.config,
        out=args.out,
        steps=getattr(args, "steps", DEFAULT_STEPS),
        probes=getattr(args, "probes", DEFAULT_PROBES),
        workers=getattr(args, "workers", None),
    )
    if command.probes < 1:
        parser.error("--probes must be >= 1")
        return EXIT_CONFIG
    return execute(command)


__all__ = ["CommandName", "Command", "execute", "main"]


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    raise SystemExit(main())
