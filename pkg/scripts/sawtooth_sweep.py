"""Write S*_N over a range of pool sizes for several attachment points.

The CSV has the ``ldpcdo sweep`` layout and can be plotted directly:
log10_value against N shows the lattice sawtooth on a linear decay.

    python scripts/sawtooth_sweep.py --output sawtooth.csv
"""
import argparse
import sys

from ldpcdo.cli import SWEEP_COLUMNS, sweep_rows, write_csv
from ldpcdo.pricer import TrancheSpec, quarterly_dates

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--alpha", type=float, action="append", help="attachment point; repeat (default 0.06, 0.1)")
    parser.add_argument("--beta", type=float, default=0.2)
    parser.add_argument("--f-t-minus", type=float, default=0.03, help="marginal default probability before expiry")
    parser.add_argument("--t-expiry", type=float, default=5.0)
    parser.add_argument("--n-from", type=int, default=50)
    parser.add_argument("--n-to", type=int, default=500)
    parser.add_argument("--quantity", choices=["spread", "star"], default="star")
    parser.add_argument("--output", help="CSV path (default stdout)")
    args = parser.parse_args()

    alphas = args.alpha or [0.06, 0.1]
    tranche = TrancheSpec(min(alphas), args.beta, args.t_expiry, quarterly_dates(args.t_expiry))
    rows = sweep_rows(tranche, alphas, args.f_t_minus, range(args.n_from, args.n_to + 1), args.quantity)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, SWEEP_COLUMNS, fh)
    else:
        write_csv(rows, SWEEP_COLUMNS, sys.stdout)
