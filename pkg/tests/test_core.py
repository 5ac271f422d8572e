import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halflearn.core import (
    ConstantsProfile,
    SearchBall,
    angle,
    build_schedule,
    named_profile,
    practical_profile,
    project_to_ball_pair,
    theory_profile,
    unit_vector,
)

PRACTICAL = practical_profile()
THEORY = theory_profile()


def e(i, d=3):
    v = np.zeros(d)
    v[i] = 1.0
    return v


class TestSchedule:
    def test_phase_count_example(self):
        # pi / (32 * 0.01) ~ 9.817, ceil(log2) = 4
        sched = build_schedule(0.01, 0.1, 5, PRACTICAL)
        assert sched.num_phases == 4

    def test_phase_count_floors_at_one(self):
        assert build_schedule(0.1, 0.1, 5, PRACTICAL).num_phases == 1

    def test_theory_radius_phase_two(self):
        sched = build_schedule(0.01, 0.1, 5, THEORY)
        assert sched.phases[1].radius == 2.0**-8

    def test_fail_prob_split(self):
        sched = build_schedule(0.01, 0.1, 5, PRACTICAL)
        assert sched.phases[0].fail_prob == pytest.approx(0.1 / 6.0)

    @pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (1.0, 0.1), (0.1, 0.0), (0.1, 1.5), (-0.2, 0.1)])
    def test_rejects_bad_rates(self, eps, delta):
        with pytest.raises(ValueError):
            build_schedule(eps, delta, 5, PRACTICAL)

    def test_rejects_low_dimension(self):
        with pytest.raises(ValueError):
            build_schedule(0.1, 0.1, 1, PRACTICAL)

    @pytest.mark.parametrize("profile", [PRACTICAL, THEORY], ids=["practical", "theory"])
    def test_monotone_and_ratio(self, profile):
        sched = build_schedule(0.003, 0.05, 8, profile)
        assert sched.num_phases >= 3
        phases = sched.phases
        for prev, cur in zip(phases[1:], phases[2:]):
            assert cur.halfwidth <= prev.halfwidth
            assert cur.radius <= prev.radius
            assert cur.margin <= prev.margin
        for p in phases:
            assert p.halfwidth / p.radius == pytest.approx(profile.band_ratio, rel=1e-12)

    @pytest.mark.parametrize("profile", [PRACTICAL, THEORY], ids=["practical", "theory"])
    def test_outlier_frac_band(self, profile):
        sched = build_schedule(0.01, 0.1, 6, profile)
        for p in sched.phases:
            assert profile.outlier_frac_floor <= p.outlier_frac <= 0.5

    @settings(max_examples=60, deadline=None)
    @given(
        eps=st.floats(1e-4, 0.5),
        delta=st.floats(1e-4, 0.5),
        d=st.integers(2, 64),
    )
    def test_schedule_well_formed(self, eps, delta, d):
        sched = build_schedule(eps, delta, d, PRACTICAL)
        assert sched.num_phases >= 1
        for p in sched.phases:
            assert p.n_draws >= 1
            assert p.margin > 0
            assert 0 < p.fail_prob < delta


class TestAngle:
    def test_identity(self):
        assert angle(e(0), e(0)) == 0.0

    def test_antipodal(self):
        assert angle(e(0), -e(0)) == pytest.approx(math.pi)

    def test_orthogonal(self):
        assert angle(e(0), e(1)) == pytest.approx(math.pi / 2)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            angle(np.zeros(3), e(0))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10_000))
    def test_symmetry_and_identity(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(4)
        u /= np.linalg.norm(u)
        v = rng.standard_normal(4)
        v /= np.linalg.norm(v)
        assert angle(u, v) == pytest.approx(angle(v, u), abs=1e-12)
        assert angle(u, u) <= 1e-9


class TestProjection:
    def test_along_axis(self):
        ball = SearchBall(e(0, 2), 0.5)
        out = project_to_ball_pair(np.array([2.0, 0.0]), ball)
        assert out == pytest.approx([1.0, 0.0], abs=1e-8)

    def test_idempotent_on_feasible(self):
        ball = SearchBall(e(0, 2), 0.5)
        p = np.array([0.9, 0.1])
        assert ball.contains(p)
        out = project_to_ball_pair(p, ball)
        assert out == pytest.approx(p, abs=1e-10)

    def test_off_axis_closed_form(self):
        # nearest point of ball(e1, 0.5) to (0, 2); the unit-ball constraint
        # stays inactive (norm of the result is about 0.896)
        ball = SearchBall(e(0, 2), 0.5)
        out = project_to_ball_pair(np.array([0.0, 2.0]), ball)
        assert out == pytest.approx([0.7763932, 0.4472136], abs=1e-6)
        assert np.linalg.norm(out) == pytest.approx(0.8962, abs=1e-3)

    def test_empty_intersection(self):
        ball = SearchBall(np.array([3.0, 0.0]), 0.5)
        with pytest.raises(ValueError):
            project_to_ball_pair(np.array([1.0, 1.0]), ball)

    def test_nonexpansive(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            d = int(rng.integers(2, 6))
            center = rng.standard_normal(d)
            center /= max(1.0, np.linalg.norm(center)) * rng.uniform(1.0, 2.0)
            ball = SearchBall(center, float(rng.uniform(0.1, 1.5)))
            a = rng.standard_normal(d) * 2
            b = rng.standard_normal(d) * 2
            pa = project_to_ball_pair(a, ball)
            pb = project_to_ball_pair(b, ball)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-7

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 10_000))
    def test_output_feasible(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 8))
        center = rng.standard_normal(d) * 0.6
        ball = SearchBall(center, float(rng.uniform(0.05, 1.5)))
        if ball.is_empty():
            return
        out = project_to_ball_pair(rng.standard_normal(d) * 3, ball)
        assert ball.contains(out, tol=1e-8)


class TestProfiles:
    def test_theory_slack_invariant(self):
        assert THEORY.slack == pytest.approx(math.exp(-THEORY.band_ratio), rel=1e-12)

    def test_moment_bound_choices(self):
        for profile in (PRACTICAL, THEORY):
            assert profile.moment_bound() == pytest.approx(2 * profile.second_moment_coef)
            assert profile.moment_bound(batch_oracle=True) == pytest.approx(
                4 * profile.second_moment_coef
            )

    def test_max_halfwidth_relation(self):
        for profile in (PRACTICAL, THEORY):
            assert profile.max_halfwidth == pytest.approx(profile.band_ratio / 16.0)

    def test_text_round_trip(self):
        text = PRACTICAL.to_text()
        back = ConstantsProfile.from_text(text)
        assert back == PRACTICAL

    def test_text_override(self):
        prof = ConstantsProfile.from_text("slack=0.1\nn_scale=2.0", base=PRACTICAL)
        assert prof.slack == 0.1
        assert prof.n_scale == 2.0
        assert prof.band_ratio == PRACTICAL.band_ratio

    def test_text_rejects_unknown_key(self):
        with pytest.raises(ValueError):
            ConstantsProfile.from_text("no_such_constant=1.0", base=PRACTICAL)

    def test_named_profiles(self):
        assert named_profile("practical").name == "practical"
        assert named_profile("theory").name == "theory"
        with pytest.raises(ValueError):
            named_profile("fancy")

    def test_rejects_nonpositive_constant(self):
        with pytest.raises(ValueError):
            ConstantsProfile.from_text("slack=-0.5", base=PRACTICAL)
