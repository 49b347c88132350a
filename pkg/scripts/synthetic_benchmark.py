"""PFNet vs VAR vs persistence on sinusoid + AR(1) noise data.

    python scripts/synthetic_benchmark.py --out runs/synthetic
"""

import argparse
import json
import logging
from dataclasses import replace

from pfnet.benchmark import SyntheticStudy, run_synthetic_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--epochs", type=int, default=SyntheticStudy.epochs)
    parser.add_argument("--seeds", default="0,1,2")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    study = replace(SyntheticStudy(), epochs=args.epochs, seeds=tuple(int(s) for s in args.seeds.split(",")))
    result = run_synthetic_study(study, out=args.out)
    print(json.dumps(result, indent=2))


if __name__ == "__main__":
    main()
