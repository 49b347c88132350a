"""Command-line front end.

    pfnet train --data exchange_rate.txt --horizon 3 --out runs/er_h3
    pfnet evaluate --checkpoint runs/er_h3/checkpoint.txt --data exchange_rate.txt
    pfnet predict --checkpoint runs/er_h3/checkpoint.txt --data recent.txt --out forecast.csv
    pfnet grid-search --data exchange_rate.txt --horizon 3 --grid window=32,64,128 --grid hw=4,8,16
    pfnet ablation --data exchange_rate.txt --horizon 3 --seeds 0,1,2

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 divergence.
"""

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError, DataError, DivergenceError, PFNetError
from .experiment import MODEL_KINDS, RunConfig, ablation, evaluate, forecast, grid_search, read_config_file, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

# Flags that map directly onto RunConfig fields.
_RUN_FLAGS = ("data", "horizon", "window", "model", "seed", "out", "epochs", "select",
              "depth", "channels", "hw", "mlp_hidden", "c1", "c2", "lr", "batch_size")


def _int_list(text):
    return [int(t) for t in text.split(",") if t]


def _add_shared(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--data")
    p.add_argument("--horizon", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--select", choices=("rse", "rae"))
    p.add_argument("--depth", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--hw", type=int)
    p.add_argument("--mlp-hidden", dest="mlp_hidden", type=int)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="pfnet", description="Parallel trend/fluctuation forecaster")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_shared(sub.add_parser("train", help="train one configuration"))

    p = sub.add_parser("evaluate", help="test metrics of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", help="write metrics key=value file here")

    p = sub.add_parser("predict", help="forecast every admissible anchor to CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("grid-search", help="grid search ranked on validation")
    _add_shared(p)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("ablation", help="train LTPM / PFNet-xt / PFNet / VAR on shared splits")
    _add_shared(p)
    p.add_argument("--horizons", type=_int_list, help="comma-separated horizons (default --horizon)")
    p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default --seed)")
    return parser


def run_config(args):
    values = read_config_file(args.config) if args.config else {}
    for key in _RUN_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return RunConfig.from_dict(values).validate()


def _parse_grid(specs, template):
    grids = {}
    for spec in specs:
        key, sep, raw = spec.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not hasattr(template, key):
            raise ConfigError(f"bad --grid entry {spec!r}")
        caster = type(getattr(template, key)) if getattr(template, key) is not None else str
        grids[key] = [caster(v) for v in raw.split(",") if v]
    return grids


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            record = train(run_config(args))
            print(json.dumps({"best_epoch": record.best_epoch, "valid": record.valid, "test": record.test}, indent=2))
        elif args.command == "evaluate":
            report = evaluate(args.checkpoint, args.data, args.horizon)
            sys.stdout.write(report.to_kv())
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(report.to_kv())
        elif args.command == "predict":
            preds = forecast(args.checkpoint, args.data, args.out)
            print(f"wrote {preds.shape[0]} forecasts to {args.out}")
        elif args.command == "grid-search":
            template = run_config(args)
            grids = _parse_grid(args.grid, template) or {"window": [template.window]}
            best, board = grid_search(template, grids, jobs=args.jobs)
            for row in board:
                print(json.dumps(row))
            print(json.dumps({"best": best.config["out"], "test": best.test}))
        elif args.command == "ablation":
            base = run_config(args)
            table, _ = ablation(base, args.horizons, args.seeds)
            os.makedirs(base.out, exist_ok=True)
            with open(os.path.join(base.out, "ablation.txt"), "w") as fh:
                fh.write(table)
            sys.stdout.write(table)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PFNetError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
