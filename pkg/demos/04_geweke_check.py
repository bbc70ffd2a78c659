"""Does the sampler target the right posterior? A Geweke joint-distribution test.

Prior draws and an alternating sweep / data-redraw chain must give the same
moments for every parameter function. A short run is shown; pass a sweep
count (the acceptance suite uses 100000) for a sharper test.
"""

import sys

from msgarch_bnp import Hyperparameters
from msgarch_bnp.geweke import geweke_test


def main(sweeps=5000):
    hp = Hyperparameters(s=0.5, r=30.0, s_star=1.0, sigma0_sq_policy=1.0)
    res = geweke_test(hp, N=3, T=50, sweeps=sweeps, seed=0)
    print(res.report())
    print("all |z| <= 3:", res.passed())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5000)
