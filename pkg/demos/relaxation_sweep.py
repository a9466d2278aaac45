"""Relaxation parameter sweep: measured decay against the predicted factor.

For the diag(1, 2) reference problem under squared-row-norm sampling,
the squared norm of the expected error contracts per iteration by

    rho(w) = max((1 - w * 0.2)^2, (1 - w * 0.8)^2),

minimized at w* = 2/(lambda_min_plus + lambda_max) = 2. This script
estimates the decay of ||E[x_k - x*]||_B^2 by Monte Carlo across a grid
of stepsizes and prints measured versus predicted factors, including a
divergent stepsize beyond 2/lambda_max = 2.5.
"""

import numpy as np

from sketchsolve import (
    Problem,
    SolverConfig,
    build_reformulation,
    fit_rate,
    kaczmarz_distribution,
    monte_carlo_moments,
    rho_basic,
    stepsize_policy,
)


def main():
    problem = Problem(np.diag([1.0, 2.0]), [1.0, 2.0])
    reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
    spec = reform.spectrum
    print(f"eigenvalues {tuple(spec.lambdas)}, zeta = {spec.zeta:.1f}")
    for kind in ("unit", "inverse-lambda-max", "optimal"):
        w = stepsize_policy(spec, kind)
        print(f"  policy {kind:18s} w = {w:.4f}  rho = {rho_basic(spec, w):.4f}")
    print()

    print(" w      predicted  measured")
    for i, omega in enumerate(np.arange(0.4, 2.8, 0.4)):
        omega = round(float(omega), 1)
        cfg = SolverConfig(omega=omega, max_iters=6, master_seed=100 + i)
        moments = monte_carlo_moments(problem, reform.dist, cfg, 6000, 6, x0=np.zeros(2))
        fitted = fit_rate(np.maximum(moments.mean_error_norm_sq, 1e-300), burn_in=1)
        marker = "  <- diverges (w > 2/lambda_max)" if omega > 2.0 / spec.lambda_max else ""
        print(f"{omega:4.1f}   {rho_basic(spec, omega):9.4f}  {fitted.rate:8.4f}{marker}")


if __name__ == "__main__":
    main()
