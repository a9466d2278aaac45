import numpy as np
import pytest

from sketchsolve.linalg import Problem, SpdMatrix
from sketchsolve.reformulation import (
    DegenerateSpectrumError,
    build_reformulation,
    check_exactness,
    expected_Z,
    sketched_projection,
    sketched_system,
    spectrum_of,
    stochastic_gradient,
    stochastic_value,
)
from sketchsolve.sketching import (
    Coordinate,
    FixedIdentity,
    Gaussian,
    SketchSample,
    kaczmarz_distribution,
    stream,
)


def column(m, i):
    s = np.zeros((m, 1))
    s[i, 0] = 1.0
    return SketchSample(s, cols=(i,))


def random_problem(rng, m=None, n=None, weighted=True):
    m = int(m if m is not None else rng.integers(2, 7))
    n = int(n if n is not None else rng.integers(2, 7))
    a = rng.standard_normal((m, n))
    if weighted:
        g = rng.standard_normal((n, n))
        metric = SpdMatrix(g @ g.T + 2 * np.eye(n))
    else:
        metric = SpdMatrix.identity(n)
    return Problem(a, a @ rng.standard_normal(n), metric)


class TestSketchedSystem:
    def test_full_identity_sketch(self):
        rng = stream(21, 0)
        a = rng.standard_normal((2, 4))  # full row rank a.s.
        problem = Problem(a, a @ rng.standard_normal(4))
        sys = sketched_system(a, problem.b, problem.metric, FixedIdentity(2).sample(rng))
        assert np.abs(sys.H - np.linalg.inv(a @ a.T)).max() <= 1e-9
        assert np.abs(sys.Z - a.T @ np.linalg.inv(a @ a.T) @ a).max() <= 1e-9

    def test_single_row_sketch(self):
        a = np.diag([1.0, 2.0])
        sys = sketched_system(a, np.array([1.0, 2.0]), SpdMatrix.identity(2), column(2, 0))
        assert np.allclose(sys.Z, np.diag([1.0, 0.0]))

    def test_sketch_orthogonal_to_rows(self):
        # S'A = 0 collapses both operators to zero
        a = np.array([[1.0, 0.0]])
        s = SketchSample(np.array([[0.0]]))
        sys = sketched_system(a, np.array([0.0]), SpdMatrix.identity(2), s)
        assert np.all(sys.Z == 0.0)
        binv = SpdMatrix.identity(2).inv
        assert np.abs(sys.H @ (a @ binv @ a.T) @ sys.H - sys.H).max() <= 1e-12

    def test_projector_identities(self):
        rng = stream(22, 0)
        for _ in range(40):
            problem = random_problem(rng)
            q = int(rng.integers(1, 4))
            s = SketchSample(rng.standard_normal((problem.m, q)))
            sys = sketched_system(problem.A, problem.b, problem.metric, s)
            binv_z = problem.metric.inv @ sys.Z
            scale = max(1.0, np.abs(sys.Z).max())
            assert np.abs(sys.Z @ problem.metric.inv @ sys.Z - sys.Z).max() <= 1e-9 * scale
            assert np.abs(binv_z @ binv_z - binv_z).max() <= 1e-9 * max(1.0, np.abs(binv_z).max())

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sketched_system(np.eye(2), np.ones(2), SpdMatrix.identity(2), SketchSample(np.ones((3, 1))))


class TestStochasticValue:
    def test_zero_on_solutions(self):
        rng = stream(23, 0)
        problem = random_problem(rng)
        x_sol = problem.min_norm_solution
        s = SketchSample(rng.standard_normal((problem.m, 2)))
        sys = sketched_system(problem.A, problem.b, problem.metric, s)
        assert stochastic_value(sys, x_sol) <= 1e-18

    def test_reference_value(self):
        # row 2 of diag(1, 2) at x = (1, 0): residual -2, row gram 4
        a = np.diag([1.0, 2.0])
        sys = sketched_system(a, np.array([1.0, 2.0]), SpdMatrix.identity(2), column(2, 1))
        assert stochastic_value(sys, np.array([1.0, 0.0])) == pytest.approx(0.5)

    def test_full_step_zeroes_value(self):
        rng = stream(24, 0)
        for _ in range(30):
            problem = random_problem(rng)
            s = SketchSample(rng.standard_normal((problem.m, 1)))
            sys = sketched_system(problem.A, problem.b, problem.metric, s)
            x = rng.standard_normal(problem.n)
            stepped = x - stochastic_gradient(sys, x)
            assert stochastic_value(sys, stepped) <= 1e-12


class TestStochasticGradient:
    def test_zero_on_solutions(self):
        rng = stream(25, 0)
        problem = random_problem(rng)
        s = SketchSample(rng.standard_normal((problem.m, 2)))
        sys = sketched_system(problem.A, problem.b, problem.metric, s)
        grad = stochastic_gradient(sys, problem.min_norm_solution)
        assert np.abs(grad).max() <= 1e-9

    def test_row_sampling_closed_form(self):
        a = np.diag([1.0, 2.0])
        b = np.array([1.0, 2.0])
        sys = sketched_system(a, b, SpdMatrix.identity(2), column(2, 1))
        x = np.array([0.0, 0.0])
        expected = (a[1] @ x - b[1]) / (a[1] @ a[1]) * a[1]
        assert np.allclose(stochastic_gradient(sys, x), expected)

    def test_gradient_is_hessian_fixed_point(self):
        rng = stream(26, 0)
        for _ in range(30):
            problem = random_problem(rng)
            s = SketchSample(rng.standard_normal((problem.m, 2)))
            sys = sketched_system(problem.A, problem.b, problem.metric, s)
            x = rng.standard_normal(problem.n)
            grad = stochastic_gradient(sys, x)
            hess_grad = problem.metric.inv @ sys.Z @ grad
            assert np.abs(hess_grad - grad).max() <= 1e-8 * max(1.0, np.abs(grad).max())

    def test_identity_suite(self):
        rng = stream(27, 0)
        for _ in range(60):
            problem = random_problem(rng)
            q = int(rng.integers(1, 4))
            s = SketchSample(rng.standard_normal((problem.m, q)))
            sys = sketched_system(problem.A, problem.b, problem.metric, s)
            x = rng.standard_normal(problem.n)
            grad = stochastic_gradient(sys, x)
            scale = max(1.0, float(np.linalg.norm(grad)))
            proj_gap = x - sketched_projection(sys, x)
            assert np.linalg.norm(proj_gap - grad) <= 1e-8 * scale
            value = stochastic_value(sys, x)
            assert abs(value - 0.5 * problem.metric.norm_sq(grad)) <= 1e-8 * max(1.0, value)


class TestExpectedZ:
    def test_kaczmarz_closed_form(self):
        rng = stream(28, 0)
        for _ in range(20):
            m, n = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            a = rng.standard_normal((m, n))
            ez, info = expected_Z(a, SpdMatrix.identity(n), kaczmarz_distribution(a))
            assert info.kind == "exact"
            target = a.T @ a / np.sum(a * a)
            assert np.abs(ez - target).max() <= 1e-12 * max(1.0, np.abs(target).max())

    def test_fixed_identity_single_atom(self):
        rng = stream(29, 0)
        a = rng.standard_normal((3, 4))
        ez, info = expected_Z(a, SpdMatrix.identity(4), FixedIdentity(3))
        sys = sketched_system(a, np.zeros(3), SpdMatrix.identity(4), FixedIdentity(3).sample(rng))
        assert info.kind == "exact"
        assert np.abs(ez - sys.Z).max() <= 1e-12

    def test_multiset_supports_match_ordered_enumeration(self):
        # count and block-with-replacement supports collapse ordered column
        # draws into multisets; the induced operators are invariant under
        # column order and signs, so the expectations must agree with brute
        # force over ordered tuples
        import itertools

        from sketchsolve.sketching import Block, CountMin, CountSketch

        rng = stream(30, 0)
        m, n = 3, 4
        a = rng.standard_normal((m, n))
        g = rng.standard_normal((n, n))
        metric = SpdMatrix(g @ g.T + 2 * np.eye(n))
        zeros = np.zeros(m)

        def z_of(cols, signs=None):
            s = np.zeros((m, len(cols)))
            for j, c in enumerate(cols):
                s[c, j] = 1.0 if signs is None else signs[j]
            return sketched_system(a, zeros, metric, SketchSample(s)).Z

        brute = sum(z_of(t) for t in itertools.product(range(m), repeat=2)) / m**2
        for dist in (CountMin(m, 2), Block(m, 2, with_replacement=True)):
            ez, info = expected_Z(a, metric, dist)
            assert info.kind == "exact"
            assert np.abs(ez - brute).max() <= 1e-12

        def z_signed(js):
            cols = [j % m for j in js]
            signs = [1 if j < m else -1 for j in js]
            return z_of(cols, signs)

        brute_signed = sum(
            z_signed(t) for t in itertools.product(range(2 * m), repeat=2)
        ) / (2 * m) ** 2
        ez, info = expected_Z(a, metric, CountSketch(m, 2))
        assert info.kind == "exact"
        assert np.abs(ez - brute_signed).max() <= 1e-12

    def test_gaussian_monte_carlo(self):
        # symmetry forces E[Z] = c I and the trace of each draw is 1, so c = 1/2
        ez, info = expected_Z(np.eye(2), SpdMatrix.identity(2), Gaussian(2, 1), seed=31)
        assert info.kind == "monte-carlo"
        assert info.n_samples == 10_000
        assert np.linalg.norm(ez - 0.5 * np.eye(2), 2) <= 3.0 * info.se_norm


class TestSpectrum:
    def test_identity_sketch_condition_one(self):
        rng = stream(32, 0)
        a = rng.standard_normal((3, 3))
        problem = Problem(a, a @ np.ones(3))
        reform = build_reformulation(problem, FixedIdentity(3))
        assert reform.spectrum.zeta == pytest.approx(1.0, abs=1e-9)

    def test_reference_spectrum(self):
        problem = Problem(np.diag([1.0, 2.0]), [1.0, 2.0])
        reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
        assert np.abs(reform.spectrum.lambdas - [0.8, 0.2]).max() <= 1e-12
        assert reform.spectrum.zeta == pytest.approx(4.0, abs=1e-12)

    def test_vector_sketch_trace_one(self):
        rng = stream(33, 0)
        for _ in range(10):
            m, n = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            a = rng.standard_normal((m, n))
            problem = Problem(a, a @ rng.standard_normal(n))
            reform = build_reformulation(problem, kaczmarz_distribution(a))
            assert abs(reform.spectrum.lambdas_raw.sum() - 1.0) <= 1e-9

    def test_unit_interval(self):
        rng = stream(34, 0)
        for _ in range(10):
            problem = random_problem(rng)
            reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
            lam = reform.spectrum.lambdas_raw
            assert lam[0] <= 1.0 + 1e-8
            assert lam[-1] >= -1e-8

    def test_degenerate_error(self):
        with pytest.raises(DegenerateSpectrumError):
            spectrum_of(np.zeros((2, 2)), SpdMatrix.identity(2))


class TestExactness:
    def test_kaczmarz_exact(self):
        rng = stream(35, 0)
        a = rng.standard_normal((4, 3))
        problem = Problem(a, a @ np.ones(3))
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        assert check_exactness(reform) == "exact"

    def test_single_atom_not_exact(self):
        problem = Problem(np.eye(2), np.ones(2))
        reform = build_reformulation(problem, Coordinate([1.0, 0.0]))
        assert check_exactness(reform) == "not-exact"
        assert np.allclose(reform.expected_Z, np.diag([1.0, 0.0]))

    def test_gaussian_undecidable(self):
        problem = Problem(np.eye(2), np.ones(2))
        reform = build_reformulation(problem, Gaussian(2, 1), n_samples=200)
        assert check_exactness(reform) == "undecidable"

    def test_rank_deficient_matrix_still_exact(self):
        # a null column: null(A) is nontrivial but matches null(E[Z])
        a = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        problem = Problem(a, np.array([1.0, 2.0]))
        reform = build_reformulation(problem, kaczmarz_distribution(a))
        assert check_exactness(reform) == "exact"


class TestAveragedLoss:
    def reference(self):
        problem = Problem(np.diag([1.0, 2.0]), [1.0, 2.0])
        return build_reformulation(problem, kaczmarz_distribution(problem.A))

    def test_zero_on_solutions(self):
        reform = self.reference()
        assert reform.f_value(np.array([1.0, 1.0])) <= 1e-15
        assert np.abs(reform.grad_f(np.array([1.0, 1.0]))).max() <= 1e-12

    def test_reference_value(self):
        reform = self.reference()
        assert reform.f_value(np.zeros(2)) == pytest.approx(0.5, abs=1e-12)

    def test_matches_expected_H_form(self):
        rng = stream(36, 0)
        problem = random_problem(rng, weighted=False)
        reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
        eh = reform.expected_H()
        for _ in range(10):
            x = rng.standard_normal(problem.n)
            residual = problem.A @ x - problem.b
            direct = 0.5 * residual @ eh @ residual
            assert abs(reform.f_value(x) - direct) <= 1e-10 * max(1.0, direct)

    def test_sandwich_bounds(self):
        rng = stream(37, 0)
        for _ in range(15):
            problem = random_problem(rng)
            reform = build_reformulation(problem, kaczmarz_distribution(problem.A))
            lmin, lmax = reform.spectrum.lambda_min_plus, reform.spectrum.lambda_max
            x = rng.standard_normal(problem.n)
            f_val = reform.f_value(x)
            half_grad = 0.5 * problem.metric.norm_sq(reform.grad_f(x))
            assert lmin * f_val <= half_grad + 1e-9 * max(1.0, f_val)
            assert half_grad <= lmax * f_val + 1e-9 * max(1.0, f_val)
            # norm bounds, the lower one under exactness with the projection anchor
            any_sol = reform.x_star
            assert f_val <= 0.5 * lmax * problem.metric.norm_sq(x - any_sol) + 1e-9
            proj = problem.project(x)
            assert 0.5 * lmin * problem.metric.norm_sq(x - proj) <= f_val + 1e-9

    def test_equivalent_zero_sets(self):
        # with finite support, grad f vanishes exactly where every atom's loss does
        a = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        problem = Problem(a, np.array([1.0, 2.0]))
        dist = kaczmarz_distribution(a)
        reform = build_reformulation(problem, dist)
        support = dist.support()
        inside = reform.x_star + np.array([0.0, 0.0, 3.0])
        outside = reform.x_star + np.array([0.5, -0.25, 3.0])
        for x, expect_zero in ((inside, True), (outside, False)):
            losses = [
                stochastic_value(sketched_system(a, problem.b, problem.metric, s), x)
                for s, _ in support
            ]
            grad_zero = np.linalg.norm(reform.grad_f(x)) <= 1e-12
            assert grad_zero == expect_zero
            assert (max(losses) <= 1e-18) == expect_zero
