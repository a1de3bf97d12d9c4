"""Run the oracle checks and print a one-line verdict per check.

    python scripts/validate.py [--level full] [--out report_dir]
"""

import argparse
import sys

from herdlab.experiments import run_validate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", choices=("quick", "full"), default="quick")
    ap.add_argument("--out")
    args = ap.parse_args()
    report = run_validate(args.level, args.out)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']:<32} {c['metric']}={c['value']:.4g} "
              f"(threshold {c['threshold']:.4g}, {c['detail']['seconds']:.1f} s)")
    sys.exit(0 if report["passed"] else 1)


if __name__ == "__main__":
    main()
