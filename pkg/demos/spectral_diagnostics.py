"""Spectral diagnostics of sketched reformulations.

Builds a few problems, pairs them with sketch distributions, and prints
the quantities that control every convergence rate: the eigenvalues of
W = B^{-1/2} E[Z] B^{-1/2}, the condition number zeta, and whether the
reformulation is exact (solves the same set as Ax = b).
"""

import numpy as np

from sketchsolve import (
    Block,
    Coordinate,
    FixedIdentity,
    Gaussian,
    Problem,
    build_reformulation,
    gossip_incidence,
    kaczmarz_distribution,
    spd_with_matching_metric,
)


def describe(name, problem, dist):
    reform = build_reformulation(problem, dist, seed=7)
    spec = reform.spectrum
    lam = ", ".join(f"{v:.4f}" for v in spec.lambdas[:6])
    if len(spec.lambdas) > 6:
        lam += ", ..."
    print(f"{name}")
    print(f"  estimation      {reform.estimation.kind}")
    print(f"  eigenvalues     [{lam}]")
    print(f"  lambda_max      {spec.lambda_max:.6f}")
    print(f"  lambda_min_plus {spec.lambda_min_plus:.6f}")
    print(f"  zeta            {spec.zeta:.4f}")
    print(f"  exactness       {reform.exactness()}")
    print()


def main():
    # the classic 2x2 diagonal example: row sampling proportional to
    # squared row norms gives eigenvalues (0.8, 0.2) and zeta = 4
    problem = Problem(np.diag([1.0, 2.0]), [1.0, 2.0])
    describe("diag(1, 2), squared-row-norm sampling", problem, kaczmarz_distribution(problem.A))

    # sketching with the full identity solves in one step: zeta = 1
    describe("diag(1, 2), identity sketch", problem, FixedIdentity(2))

    # sampling only the first row of the identity system cannot see the
    # second unknown: the reformulation is not exact
    eye = Problem(np.eye(2), np.ones(2))
    describe("identity system, first row only", eye, Coordinate([1.0, 0.0]))

    # block sketches on a gossip (edge-incidence) system
    a, b, metric, _ = gossip_incidence(8, topology="cycle")
    describe("cycle-graph gossip, blocks of 2 edges", Problem(a, b, metric), Block(8, 2))

    # an SPD matrix used as its own weighting, Gaussian sketches
    # (continuous support, so E[Z] is a Monte Carlo estimate and
    # exactness is undecidable from samples alone)
    a, b, metric, _ = spd_with_matching_metric(6, condition=100.0, seed=3)
    describe("SPD system weighted by itself, Gaussian sketch", Problem(a, b, metric), Gaussian(6, 2))


if __name__ == "__main__":
    main()
