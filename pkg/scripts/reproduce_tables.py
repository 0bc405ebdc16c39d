"""Run every convergence config and write the rate tables.

    python3 scripts/reproduce_tables.py [--out results] [--format markdown] [--paper-scale]
"""
import argparse
import sys
from pathlib import Path

from fastfrac.harness import REPORT_SUFFIX, StudyConfig, check_rates, emit_report, run_convergence

CONFIGS = Path(__file__).parent / "configs"
STUDIES = [
    "smooth_cdm.json",
    "smooth_fem.json",
    "singular_fem.json",
    "singular_cdm4.json",
    "manufactured_space.json",
    "manufactured_time.json",
]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="results")
    parser.add_argument("--format", default="markdown", choices=sorted(REPORT_SUFFIX))
    parser.add_argument("--paper-scale", action="store_true")
    parser.add_argument("--only", nargs="*", help="subset of config file names")
    args = parser.parse_args(argv)

    status = 0
    for name in args.only or STUDIES:
        cfg = StudyConfig.load(CONFIGS / name, args.paper_scale)
        table = run_convergence(cfg)
        path = emit_report(table, Path(args.out) / (cfg.stem + REPORT_SUFFIX[args.format]), args.format)
        print(f"{name}: wrote {path}")
        if cfg.expected_rate is not None:
            for msg in check_rates(table, cfg.expected_rate, cfg.rate_tolerance or 0.1):
                print(f"  rate check: {msg}")
                status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
