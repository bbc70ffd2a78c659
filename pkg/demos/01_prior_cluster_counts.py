"""How many clusters does the Pitman-Yor prior expect?

The prior law of the number of occupied components among N units is
available in closed form. This script prints it for the panel sizes used in
the examples and checks it against a Chinese-restaurant simulation.
"""

import numpy as np

from msgarch_bnp.pyp import polya_urn_partition, prior_cluster_mean, prior_cluster_pmf


def main():
    print("N    nu    psi   mean clusters  mode")
    for N in (30, 78):
        for nu, psi in ((0.0, 1.0), (0.0, 10.0), (0.25, 1.0)):
            prior = prior_cluster_pmf(N, nu, psi)
            print(f"{N:<4d} {nu:<5.2f} {psi:<5.1f} {prior_cluster_mean(N, nu, psi):13.3f}  {prior.support[prior.pmf.argmax()]}")

    # Monte Carlo check of one setting with the urn scheme
    N, nu, psi = 30, 0.25, 1.0
    rng = np.random.default_rng(0)
    counts = np.array([np.unique(polya_urn_partition(N, nu, psi, rng)).size for _ in range(20000)])
    freq = np.bincount(counts, minlength=N + 1)[1:] / counts.size
    pmf = prior_cluster_pmf(N, nu, psi).pmf
    print("\nclusters  analytic  urn")
    for h in range(1, 11):
        print(f"{h:8d}  {pmf[h - 1]:.4f}    {freq[h - 1]:.4f}")


if __name__ == "__main__":
    main()
