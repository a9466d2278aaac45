import numpy as np
import pytest

from sketchsolve.linalg import Problem, SpdMatrix
from sketchsolve.oracles import (
    SmwInstance,
    psd_sandwich_residual,
    random_smw_instance,
    range_restricted_eigen_bound,
    smw_inverse,
)
from sketchsolve.reformulation import build_reformulation
from sketchsolve.sketching import kaczmarz_distribution, stream


class TestSmw:
    def test_zero_update_gives_plain_inverse(self):
        rng = stream(71, 0)
        m = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        inst = SmwInstance(M=m, C=np.zeros((4, 2)), N=np.eye(2), D=np.zeros((2, 4)))
        assert np.abs(smw_inverse(inst) - np.linalg.inv(m)).max() <= 1e-12

    def test_rank_one_update_of_identity(self):
        e1 = np.zeros((2, 1))
        e1[0, 0] = 1.0
        inst = SmwInstance(M=np.eye(2), C=e1, N=np.eye(1), D=e1.T)
        assert np.allclose(smw_inverse(inst), np.diag([0.5, 1.0]))

    def test_random_instances(self):
        rng = stream(72, 0)
        worst = 0.0
        for _ in range(200):
            inst = random_smw_instance(rng)
            direct = np.linalg.inv(inst.M + inst.C @ inst.N @ inst.D)
            gap = float(np.abs(smw_inverse(inst) - direct).max())
            worst = max(worst, gap / max(1.0, float(np.abs(direct).max())))
        assert worst <= 1e-9

    def test_rejects_ill_conditioned(self):
        with pytest.raises(ValueError):
            SmwInstance(M=np.diag([1.0, 1e-15]), C=np.eye(2), N=np.eye(2), D=np.eye(2))


class TestPsdSandwich:
    def test_identity(self):
        assert psd_sandwich_residual(np.eye(3), 1.0) <= 1e-15

    def test_rank_deficient_diagonal(self):
        # diag(4, 0) with mu = 3: both sides equal diag(3/16, 0)
        assert psd_sandwich_residual(np.diag([4.0, 0.0]), 3.0) <= 1e-12

    def test_random_psd(self):
        rng = stream(73, 0)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(2, 6))
            rank = int(rng.integers(1, n + 1))
            g = rng.standard_normal((n, rank))
            worst = max(worst, psd_sandwich_residual(g @ g.T, float(rng.uniform(0.1, 5.0))))
        assert worst <= 1e-9

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            psd_sandwich_residual(np.eye(2), 0.0)


class TestRangeBound:
    def test_zero_vector(self):
        assert range_restricted_eigen_bound(np.diag([0.2, 0.8]), SpdMatrix.identity(2), np.zeros(2))

    def test_reference_problem(self):
        problem = Problem(np.diag([1.0, 2.0]), [1.0, 2.0])
        reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
        rng = stream(74, 0)
        for _ in range(50):
            x = problem.metric.inv_sqrt @ problem.A.T @ rng.standard_normal(2)
            assert range_restricted_eigen_bound(
                reform.expected_Z, problem.metric, x, reform.spectrum.lambda_min_plus
            )

    def test_full_rank_holds_everywhere(self):
        rng = stream(75, 0)
        a = rng.standard_normal((5, 3))
        problem = Problem(a, a @ np.ones(3))
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        for _ in range(20):
            assert range_restricted_eigen_bound(
                reform.expected_Z, problem.metric, rng.standard_normal(3)
            )

    def test_random_rank_deficient(self):
        rng = stream(76, 0)
        for _ in range(100):
            m, n = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            a = rng.standard_normal((m, n))
            g = rng.standard_normal((n, n))
            metric = SpdMatrix(g @ g.T + 2 * np.eye(n))
            problem = Problem(a, a @ rng.standard_normal(n), metric)
            reform = build_reformulation(problem, kaczmarz_distribution(a))
            x = metric.inv_sqrt @ a.T @ rng.standard_normal(m)
            assert range_restricted_eigen_bound(
                reform.expected_Z, metric, x, reform.spectrum.lambda_min_plus
            )
