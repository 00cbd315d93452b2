"""Dilation drift on and off the scaling line, plus the family-growth check on the diagonal tuple.

Writes ``<out>/sweep_drift.csv`` and ``<out>/sweep_family.json``.
"""

import argparse
from fractions import Fraction as Fr
from pathlib import Path

from displab import strichartz_sweep as sw
from displab.cli import worker_pool
from displab.exponents import ProblemParams
from displab.reports import write_csv, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    bump = sw.TestFamily(sw.Generator.MODULATED_BUMPS, 1, (1.5, 1.5)).members()[0]
    rows = []
    for P in (ProblemParams(2, "3/2"), ProblemParams(2, "4/3"), ProblemParams(2, "3/2", Fr(-1, 20))):
        pairs = [(1 / iq, 1 / ((1 - P.gamma - P.alpha * iq) / 2)) for iq in (Fr(1, 3), Fr(1, 5))]
        pairs += [(4, 4), (3, 6), (6, 3)]
        for q, p in pairs:
            d = sw.homogeneous_dilation(P, q, p, bump)
            rows.append({"alpha": str(P.alpha), "gamma": str(P.gamma), "q": float(q), "p": float(p),
                         "predicted": d.predicted, "fitted": d.fitted, "error": d.error})
            print(f"alpha={P.alpha} gamma={P.gamma} (q,p)=({float(q):.3g},{float(p):.3g}): "
                  f"drift {d.fitted:+.4f} predicted {d.predicted:+.4f}")
    write_csv(out / "sweep_drift.csv", rows)
    P43, q = ProblemParams(2, "4/3"), Fr(10, 3)
    fam = sw.TestFamily()
    with worker_pool() as pool:
        small = sw.inhomogeneous_ratio_sweep(P43, q, q, q, q, fam, pool=pool)
        large = sw.inhomogeneous_ratio_sweep(P43, q, q, q, q, fam.enlarged(4), pool=pool)
    summary = {"small": small.as_dict(), "large": large.as_dict(),
               "family_growth": sw.family_growth(small, large),
               "retarded_over_full": sw.christ_kiselev_constant(large)}
    write_json(out / "sweep_family.json", summary)
    print(f"family growth {summary['family_growth']:.3f}; retarded/full {summary['retarded_over_full']:.3f}")


if __name__ == "__main__":
    main()
