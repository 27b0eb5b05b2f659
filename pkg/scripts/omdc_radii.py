"""Recompute the optimal radii of the axis (OMDC) constellations.

Prints the radii stored in ``diffstc.alphabets`` next to the values found
by a fresh multistart search.
"""

import numpy as np

from diffstc.alphabets import OMDC4_RADII, OMDC8_RADII
from diffstc.design_analysis import omdc_objective, optimize_omdc_radii


def main():
    for q, stored in ((4, OMDC4_RADII), (8, OMDC8_RADII)):
        radii, value = optimize_omdc_radii(q, starts=200, seed=0)
        print(f"q={q} search  radii={np.array2string(radii, precision=9)}  objective={value:.9f}")
        print(f"q={q} stored  radii={np.array2string(np.asarray(stored), precision=9)}  "
              f"objective={omdc_objective(stored):.9f}")


if __name__ == "__main__":
    main()
