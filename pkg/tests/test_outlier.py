import math

import numpy as np
import pytest

from halflearn.core import BandSpec, Provenance, SearchBall, practical_profile
from halflearn.dist import DistributionSpec, Kind, sample_band
from halflearn.outlier import (
    RemovalInfeasible,
    RemovalProblem,
    grid_points,
    separation_oracle,
    soft_outlier_removal,
    verify_weights,
)
from halflearn.rng import stream

PROFILE = practical_profile()


def e1(d):
    v = np.zeros(d)
    v[0] = 1.0
    return v


def banded_gaussian(d, n, halfwidth, seed, direction=None):
    u = e1(d) if direction is None else direction
    spec = DistributionSpec(Kind.GAUSSIAN, d)
    return sample_band(spec, BandSpec(u, halfwidth), n, seed)


def planted_problem(d, n_clean, n_dirty, magnitude, halfwidth, radius, outlier_frac, seed, moment_bound=4.0):
    """Banded clean cloud plus far outliers forced into the slab."""
    rng = stream(seed, "planted")
    u = e1(d)
    clean = banded_gaussian(d, n_clean, halfwidth, rng)
    dirty = []
    while len(dirty) < n_dirty:
        g = rng.standard_normal(d)
        perp = g - (g @ u) * u
        norm = np.linalg.norm(perp)
        if norm < 1e-9:
            continue
        x = magnitude * perp / norm + rng.uniform(-halfwidth, halfwidth) * u
        dirty.append(x)
    instances = np.vstack([clean] + [np.asarray(dirty)]) if n_dirty else clean
    dirty_mask = np.zeros(len(instances), dtype=bool)
    dirty_mask[n_clean:] = True
    problem = RemovalProblem(
        instances=instances,
        ball=SearchBall(u, radius),
        halfwidth=halfwidth,
        outlier_frac=outlier_frac,
        moment_bound=moment_bound,
    )
    return problem, dirty_mask


class TestSeparationOracle:
    def test_single_instance_along_center(self):
        # one point at 0.1 * e1: the quadratic peaks at the far end of the
        # ball where the first coordinate is 1, so the value is 0.01; any
        # feasible direction gives at least 0.9^2 * 0.01
        problem = RemovalProblem(
            instances=np.array([[0.1, 0.0]]),
            ball=SearchBall(e1(2), 0.1),
            halfwidth=0.1,
            outlier_frac=0.25,
            moment_bound=2.0,
        )
        found = separation_oracle(np.ones(1), problem, seed=0)
        assert 0.0081 <= found.value <= 0.01 + 1e-12
        assert problem.ball.contains(found.w, tol=1e-8)

    def test_zero_weights(self):
        problem = RemovalProblem(
            instances=np.array([[0.05, 1.0], [0.0, -2.0]]),
            ball=SearchBall(e1(2), 0.5),
            halfwidth=0.1,
            outlier_frac=0.25,
            moment_bound=2.0,
        )
        found = separation_oracle(np.zeros(2), problem, seed=1)
        assert found.value == pytest.approx(0.0, abs=1e-15)

    def test_monotone_in_weights(self):
        rng = stream(2, "monotone")
        for trial in range(100):
            d = int(rng.integers(2, 5))
            n = int(rng.integers(5, 30))
            x = banded_gaussian(d, n, 0.2, rng)
            problem = RemovalProblem(
                instances=x,
                ball=SearchBall(e1(d), 0.3),
                halfwidth=0.2,
                outlier_frac=0.25,
                moment_bound=2.0,
            )
            q = rng.uniform(0.0, 1.0, n)
            base = separation_oracle(q, problem, seed=trial)
            q_up = q.copy()
            bump = int(rng.integers(0, n))
            q_up[bump] = min(1.0, q_up[bump] + rng.uniform(0.0, 1.0))
            # warm start at the previous maximizer guarantees monotonicity
            up = separation_oracle(q_up, problem, seed=trial, warm_starts=[base.w])
            assert up.value >= base.value - 1e-12

    def test_rejects_bad_weights(self):
        problem = RemovalProblem(
            instances=np.array([[0.0, 1.0]]),
            ball=SearchBall(e1(2), 0.5),
            halfwidth=0.1,
            outlier_frac=0.25,
            moment_bound=2.0,
        )
        with pytest.raises(ValueError):
            separation_oracle(np.array([1.5]), problem, seed=0)


class TestSoftRemoval:
    def test_clean_data_keeps_unit_weights(self):
        # clean slab-conditioned data at the concentration sample size needs
        # no cuts at all
        ok = 0
        for d, trials in ((5, 25), (20, 25)):
            n = math.ceil(20 * d * math.log(d) ** 2)
            for trial in range(trials):
                x = banded_gaussian(d, n, 0.1, stream(trial, "clean", d))
                problem = RemovalProblem(
                    instances=x,
                    ball=SearchBall(e1(d), 0.1),
                    halfwidth=0.1,
                    outlier_frac=0.25,
                    moment_bound=PROFILE.moment_bound(),
                )
                result = soft_outlier_removal(problem, seed=trial)
                if result.cuts_used == 0 and float(result.q.min()) == 1.0:
                    ok += 1
        assert ok >= math.ceil(0.95 * 50)

    def test_mass_and_box_exact(self):
        problem, _ = planted_problem(3, 150, 10, 60.0, 0.1, 0.1, 0.3, seed=5)
        result = soft_outlier_removal(problem, seed=5)
        assert np.all(result.q >= 0.0) and np.all(result.q <= 1.0)
        assert result.q.sum() >= (1 - problem.outlier_frac) * problem.size
        assert result.p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_planted_outlier_downweighted(self):
        # single massive outlier in the slab: its final weight obeys the
        # budget left by the moment constraint along the cut direction
        problem, dirty = planted_problem(
            2, 99, 1, 100.0, 0.1, 0.1, 0.3, seed=6, moment_bound=4.0
        )
        result = soft_outlier_removal(problem, seed=6)
        q_out = float(result.q[dirty][0])
        x_out = problem.instances[dirty][0]
        limit = (
            problem.tolerance
            * problem.moment_threshold
            * problem.size
            / (problem.ball.radius**2 * float(x_out @ x_out) * 0.9)
        )
        assert q_out <= limit
        assert q_out <= 0.1
        assert verify_weights(result.q, problem)

    def test_zero_budget_with_violation_infeasible(self):
        problem, _ = planted_problem(2, 60, 2, 80.0, 0.1, 0.1, 0.0, seed=7)
        with pytest.raises(RemovalInfeasible) as info:
            soft_outlier_removal(problem, seed=7)
        assert info.value.reason == "mass"

    def test_deterministic(self):
        problem, _ = planted_problem(4, 120, 6, 50.0, 0.15, 0.15, 0.3, seed=8)
        a = soft_outlier_removal(problem, seed=8)
        b = soft_outlier_removal(problem, seed=8)
        assert np.array_equal(a.q, b.q)
        assert a.cuts_used == b.cuts_used

    def test_input_order_irrelevant(self):
        problem, _ = planted_problem(3, 80, 4, 60.0, 0.1, 0.1, 0.3, seed=9)
        perm = stream(9, "perm").permutation(problem.size)
        shuffled = RemovalProblem(
            instances=problem.instances[perm],
            ball=problem.ball,
            halfwidth=problem.halfwidth,
            outlier_frac=problem.outlier_frac,
            moment_bound=problem.moment_bound,
        )
        a = soft_outlier_removal(problem, seed=9)
        b = soft_outlier_removal(shuffled, seed=9)
        assert np.array_equal(a.q[perm], b.q)

    def test_dirty_mass_suppressed(self):
        # moment attack at the study scale: the weight landing on planted
        # outliers stays below the outlier budget
        frac = 0.2
        for d in (5, 20):
            n_clean = 100 * d
            n_dirty = int(frac / 2 * n_clean / (1 - frac / 2))
            problem, dirty = planted_problem(
                d, n_clean, n_dirty, 100.0 * math.sqrt(d), 0.1, 0.1, frac, seed=10 + d,
                moment_bound=PROFILE.moment_bound(batch_oracle=True),
            )
            result = soft_outlier_removal(problem, seed=10 + d)
            assert float(result.q[dirty].sum()) <= frac * problem.size
            assert float(result.q[~dirty].min()) >= 0.9

    def test_instances_must_sit_in_slab(self):
        with pytest.raises(ValueError):
            RemovalProblem(
                instances=np.array([[0.5, 0.0]]),
                ball=SearchBall(e1(2), 0.1),
                halfwidth=0.1,
                outlier_frac=0.2,
                moment_bound=2.0,
            )

    def test_result_csv(self, tmp_path):
        problem, dirty = planted_problem(2, 30, 2, 50.0, 0.1, 0.1, 0.3, seed=11)
        result = soft_outlier_removal(problem, seed=11)
        plain = tmp_path / "weights.csv"
        result.to_csv(plain)
        lines = plain.read_text().splitlines()
        assert lines[0] == "index,weight"
        assert len(lines) == problem.size + 1
        tagged = tmp_path / "weights_prov.csv"
        provs = [Provenance.DIRTY if flag else Provenance.CLEAN for flag in dirty]
        result.to_csv(tagged, provenance=provs)
        assert tagged.read_text().splitlines()[0] == "index,weight,provenance"


class TestVerifyWeights:
    def test_removal_outputs_verify(self):
        for trial in range(20):
            rng = stream(trial, "verify")
            n_dirty = int(rng.integers(0, 4))
            problem, _ = planted_problem(2, 60, n_dirty, 60.0, 0.1, 0.1, 0.3, seed=200 + trial)
            result = soft_outlier_removal(problem, seed=trial)
            outcome = verify_weights(result.q, problem)
            assert outcome.ok, f"witness={outcome.witness} value={outcome.value}"

    def test_unit_weights_with_planted_violator_fail(self):
        problem, _ = planted_problem(2, 60, 2, 80.0, 0.1, 0.1, 0.3, seed=12)
        outcome = verify_weights(np.ones(problem.size), problem)
        assert not outcome.ok
        assert outcome.witness is not None
        assert problem.ball.contains(outcome.witness, tol=1e-6)

    def test_tiny_instances_pass(self):
        x = stream(13, "tiny").uniform(-0.05, 0.05, size=(40, 2))
        x[:, 0] = np.clip(x[:, 0], -0.1, 0.1)
        problem = RemovalProblem(
            instances=x,
            ball=SearchBall(e1(2), 0.2),
            halfwidth=0.1,
            outlier_frac=0.2,
            moment_bound=2.0,
        )
        assert verify_weights(np.ones(40), problem)

    def test_dimension_guard(self):
        problem, _ = planted_problem(3, 30, 0, 10.0, 0.1, 0.1, 0.2, seed=14)
        with pytest.raises(ValueError):
            verify_weights(np.ones(problem.size), problem)


class TestChainInequality:
    def test_grid_sup_below_spectral_bound(self):
        # slab geometry: the grid supremum of the weighted quadratic never
        # beats radius^2 * lambda_max + halfwidth^2
        from halflearn.spectral import lambda_max as power_lambda

        rng = stream(15, "chain")
        for trial in range(100):
            b = float(rng.uniform(0.05, 0.5))
            r = float(rng.uniform(0.05, 0.8))
            n = int(rng.integers(50, 200))
            x = banded_gaussian(2, n, b, rng)
            q = rng.uniform(0.0, 1.0, n)
            ball = SearchBall(e1(2), r)
            pts = grid_points(ball, 4e-3)
            sup = float((((pts @ x.T) ** 2) * q).sum(axis=1).max() / n)
            # scaling rows by sqrt(q) turns the plain Gram mean into the
            # weighted one
            lam = power_lambda(x * np.sqrt(q)[:, None])
            assert sup <= r * r * lam + b * b + 1e-9
