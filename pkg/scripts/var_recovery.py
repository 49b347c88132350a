"""Fit VAR(1) on a simulated stable process and compare with the truth.

    python scripts/var_recovery.py --n 4 --T 2000 --sigma 0.01
"""

import argparse

import numpy as np

from pfnet.metrics import compute_metrics
from pfnet.synthetic import stable_var1_coefs, var1_noise_floor, var1_process
from pfnet.var import fit_var, predict_var


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=4)
    parser.add_argument("--T", type=int, default=2000)
    parser.add_argument("--sigma", type=float, default=0.01)
    parser.add_argument("--radius", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    A = stable_var1_coefs(args.n, radius=args.radius, seed=args.seed)
    x = var1_process(A, T=args.T, sigma=args.sigma, seed=args.seed + 1)
    cut, test_start = int(0.6 * args.T), int(0.8 * args.T)
    model = fit_var(x[:, :cut], p=1, horizon=1)
    pred = predict_var(model, x[:, test_start - 1:-1].T[:, :, None])
    report = compute_metrics(pred.T, x[:, test_start:])
    print(f"max |A_hat - A|  {np.max(np.abs(model.coefs[0] - A)):.4f}")
    print(f"test RSE         {report.rse:.4f}")
    print(f"noise floor RSE  {var1_noise_floor(A, args.sigma):.4f}")


if __name__ == "__main__":
    main()
