"""Exchange-Rate study: grid search over window and highway width, then the
ablation (LTPM-only, PFNet-xt, PFNet, VAR) at the chosen configuration.

    python scripts/exchange_rate.py --data data/exchange_rate.txt --out runs/exchange_rate

The file is the public 7588 x 8 daily exchange-rate matrix (comma-separated,
one day per line, no header).
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

from pfnet.benchmark import ExchangeRateStudy, find_exchange_rate, run_exchange_rate_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", default=None)
    parser.add_argument("--out", default="runs/exchange_rate")
    parser.add_argument("--horizon", type=int, default=ExchangeRateStudy.horizon)
    parser.add_argument("--epochs", type=int, default=ExchangeRateStudy.epochs)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    path = args.data or find_exchange_rate()
    if path is None:
        sys.exit("exchange_rate.txt not found; pass --data or set PFNET_EXCHANGE_RATE")
    study = replace(ExchangeRateStudy(), horizon=args.horizon, epochs=args.epochs)
    result = run_exchange_rate_study(path, study, out=args.out)
    print(result.pop("table"))
    print(json.dumps(result, indent=2))


if __name__ == "__main__":
    main()
