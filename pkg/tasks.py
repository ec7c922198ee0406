"""Utility tasks for development workflows."""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent
CONFIG_DIR = ROOT / "configs"


def run_pytest() -> int:
    result = subprocess.run([sys.executable, "-m", "pytest"], cwd=ROOT)
    return result.returncode


def run_simulate(config: str) -> int:
    path = CONFIG_DIR / f"{config}.conf"
    result = subprocess.run([sys.executable, "-m", "src", "simulate", "--config", str(path)], cwd=ROOT)
    return result.returncode


def run_bench(steps: str) -> int:
    result = subprocess.run([sys.executable, "-m", "src", "bench-convolution", "--steps", steps], cwd=ROOT)
    return result.returncode


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Project task runner")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("test", help="Run the pytest suite")
    simulate = sub.add_parser("simulate", help="Run an ensemble from one of the bundled configs")
    simulate.add_argument("config", nargs="?", default="default", help="Config name under configs/ (without .conf)")
    bench = sub.add_parser("bench", help="Time naive versus incremental convolution")
    bench.add_argument("--steps", default="1000,10000,100000")

    args = parser.parse_args(argv)
    if args.command == "test":
        return run_pytest()
    if args.command == "simulate":
        return run_simulate(args.config)
    if args.command == "bench":
        return run_bench(args.steps)
    parser.error("Unknown command")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
