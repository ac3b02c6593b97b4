#!/usr/bin/env python3
"""
Experiment reproduction script

Runs the multi-seed training protocol for every preset under
data/config/experiments and prints one summary line per preset, including
the rate at which the preset's run criterion was met. With ``--bounds`` the
Euler and MLP-limit bound sweeps of data/config/bounds.toml run as well.
"""

import argparse
import json
import os
import sys
from pathlib import Path

# Add project root directory to path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

import pandas as pd

from frontend.app import main as resnetlab_main
from utils.config.settings import get_runtime_settings

EXPERIMENTS_DIR = Path(project_root) / "data" / "config" / "experiments"
BOUNDS_CONFIG = Path(project_root) / "data" / "config" / "bounds.toml"


def criterion_line(run_dir: Path) -> str:
    path = run_dir / "criterion.json"
    if not path.exists():
        return ""
    result = json.loads(path.read_text(encoding="utf-8"))
    mark = "ok" if result["passed"] else "MISSED"
    return f"{result['kind']} {result['satisfied']}/{result['runs']} (need {result['min_runs']}) {mark}"


def summarize(name: str, run_dir: Path) -> str:
    summary_path = run_dir / "summary.csv"
    if not summary_path.exists():
        return f"{name}: no summary"
    summary = pd.read_csv(summary_path)
    if summary.empty:
        return f"{name}: no runs"
    parts = [f"best loss {summary['final_loss'].min():.4g}"]
    if summary["accuracy"].notna().any():
        parts.append(f"best accuracy {summary['accuracy'].max():.3f}")
    verdicts = summary["tunnel_verdict"].value_counts()
    parts.append(", ".join(f"{verdict} x{count}" for verdict, count in verdicts.items()))
    criterion = criterion_line(run_dir)
    if criterion:
        parts.append(criterion)
    return f"{name}: " + "; ".join(parts)


def summarize_bounds(kind: str, run_dir: Path) -> str:
    path = run_dir / f"bounds_{kind}_instances.csv"
    if not path.exists():
        return f"bounds {kind}: no instance table"
    instances = pd.read_csv(path)
    if kind == "euler":
        measurable = instances[instances["order_ratio_second"].notna()]
        fraction = float(measurable["order_in_range"].mean()) if len(measurable) else float("nan")
        return f"bounds euler: {len(instances)} specs, order ratios in range for {fraction:.0%}"
    applicable = int(instances["crossings_applicable"].sum())
    misses = int(instances["crossing_misses"].sum())
    return (f"bounds mlp: {len(instances)} models, max err/eps spread {instances['eps_spread'].max():.3f}, "
            f"level crossings {applicable - misses}/{applicable}")


def main():
    """
    Run every selected preset through ``resnetlab train``
    """
    parser = argparse.ArgumentParser(description="Reproduce the toy training experiments")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=get_runtime_settings().output_root / "experiments")
    parser.add_argument("--only", nargs="*", help="Preset names (file stems) to run")
    parser.add_argument("--bounds", action="store_true", help="Also run the Euler and MLP bound sweeps")
    args = parser.parse_args()

    presets = sorted(EXPERIMENTS_DIR.glob("*.toml"))
    if args.only:
        presets = [p for p in presets if p.stem in set(args.only)]
    if not presets and not args.bounds:
        print("No experiment presets selected")
        return 1

    failures = 0
    lines = []
    for preset in presets:
        run_dir = args.out / preset.stem
        print(f"Running {preset.stem} -> {run_dir}")
        status = resnetlab_main(["train", "--config", str(preset), "--out", str(run_dir), "--seed", str(args.seed)])
        if status != 0:
            failures += 1
        line = summarize(preset.stem, run_dir)
        lines.append(line if status == 0 else f"{line} [exit {status}]")

    if args.bounds:
        for kind in ("euler", "mlp"):
            run_dir = args.out / f"bounds_{kind}"
            print(f"Running bounds --kind {kind} -> {run_dir}")
            status = resnetlab_main(["bounds", "--config", str(BOUNDS_CONFIG), "--kind", kind,
                                     "--out", str(run_dir), "--seed", str(args.seed)])
            if status != 0:
                failures += 1
            line = summarize_bounds(kind, run_dir)
            lines.append(line if status == 0 else f"{line} [exit {status}]")

    print("\nSummary")
    for line in lines:
        print(f"  {line}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
