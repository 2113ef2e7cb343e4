"""Query-complexity comparison across problem dimensions.

Tabulates the descent algorithm's upper and lower query bounds, its
stochastic-oracle variant, and the classical zeroth-order baselines.
The default accuracy scaling eps = 1/sqrt(d) is the regime where the
descent count overtakes every baseline; pass --eps to pin it instead.
"""

import argparse

from qhdsim.resources import (baseline_queries, qhd_query_lower,
                              qhd_query_upper, stochastic_queries)

BASELINES = ("belloni", "risteski_li", "li_zhang", "subgradient")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+",
                    default=[16, 64, 256, 1024])
    ap.add_argument("--G", type=float, default=1.0)
    ap.add_argument("--R", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=None,
                    help="fixed accuracy; default d**-0.5 per row")
    args = ap.parse_args()

    cols = ["d", "eps", "descent_upper", "descent_lower", "stochastic",
            *BASELINES]
    print(" ".join(f"{c:>13}" for c in cols))
    for d in args.dims:
        eps = args.eps if args.eps is not None else d**-0.5
        row = [d, eps,
               qhd_query_upper(d, args.G, args.R, eps).count,
               qhd_query_lower(d, args.G, args.R, eps).hypercube,
               stochastic_queries(d, args.G, args.R, eps)]
        row += [baseline_queries(b, d, args.G, args.R, eps).count
                for b in BASELINES]
        print(f"{row[0]:>13d} " + " ".join(f"{v:>13.4g}" for v in row[1:]))


if __name__ == "__main__":
    main()
