"""Rejection rates of the surrogate graph test on Gaussian factor panels (true null)."""
import argparse
import time

import numpy as np

from stocknet.bench import null_rejection_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--T", type=int, default=1000)
    ap.add_argument("--surrogates", type=int, default=199)
    ap.add_argument("--repetitions", type=int, default=200)
    ap.add_argument("--filter", default="pmfg", choices=("mst", "pmfg"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--save", help="write the (repetitions x metrics) p-value table as .npy")
    args = ap.parse_args()
    t0 = time.perf_counter()
    study = null_rejection_study(args.N, args.T, args.surrogates, args.repetitions, args.seed,
                                 args.filter, jobs=args.jobs)
    lo, hi = study.interval()
    print(f"{args.repetitions} repetitions, N_S={args.surrogates}, {time.perf_counter() - t0:.0f} s")
    print(f"99% binomial interval around 0.05: [{lo:.3f}, {hi:.3f}]")
    for m, rate in study.rejection_rates().items():
        flag = "ok" if lo <= rate <= hi else "OUTSIDE"
        print(f"  {m:>17}: rejection rate {rate:.3f}  {flag}")
    if args.save:
        np.save(args.save, study.p_values)


if __name__ == "__main__":
    main()
