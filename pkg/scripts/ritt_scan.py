"""Fitted Ritt constant of barycentres T = int e^{-tA} mu(dt) by decade of |lambda - 1|."""
import math

import numpy as np

from sectorcalc.measures import MeasureSpec, PowerExpDensity
from sectorcalc.opcalc import barycentre, check_ritt
from sectorcalc.sectorial import certify_sectorial

MEASURES = {
    "delta_1": MeasureSpec(((1.0, 1.0),)),
    "exponential": MeasureSpec((), PowerExpDensity(1.0, 0.0, 1.0)),
    "gamma(2)": MeasureSpec((), PowerExpDensity(1.0, 1.0, 1.0)),
}


def main():
    for omega, ev in ((0.0, [1.0, 2.0]), (math.pi / 4, [1.0, 2 * np.exp(0.7j), 2 * np.exp(-0.7j)])):
        S = certify_sectorial(np.diag(ev), omega)
        for name, mu in MEASURES.items():
            r = check_ritt(barycentre(S, mu), math.pi / 2 - S.omega)
            decades = " ".join(f"{c:.4f}" for c in r.C_by_decade)
            print(f"omega={omega:.3f} {name:12s} C={r.C:.4f} passed={r.passed}  by decade: {decades}")


if __name__ == "__main__":
    main()
