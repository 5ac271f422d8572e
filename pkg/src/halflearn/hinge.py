"""Reweighted margin-scaled hinge loss and its minimization over a ball pair.

The loss of a direction w on weighted samples is
sum_i p_i * max(0, 1 - y_i (w . x_i) / margin), with probability weights
summing to one. Minimization is projected subgradient descent on the
margin-rescaled objective with Polyak-style steps and best-iterate tracking;
the returned point is the best one evaluated, so the reported loss never
exceeds any iterate's loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import BandSpec, SearchBall, project_to_ball_pair, unit_vector
from .dist import DistributionSpec, MonteCarloEstimate, sample_band, sign_labels
from .rng import stream

POLYAK_SHRINK = 0.9


@dataclass(frozen=True)
class HingeProblem:
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    margin: float
    ball: SearchBall
    opt_slack: float

    def __post_init__(self):
        x = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        p = np.asarray(self.weights, dtype=float)
        if x.ndim != 2 or y.shape != (x.shape[0],) or p.shape != (x.shape[0],):
            raise ValueError("X must be (n, d) with matching labels and weights")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not self.margin > 0 or not self.opt_slack > 0:
            raise ValueError("margin and opt_slack must be positive")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weights", p)

    @property
    def size(self) -> int:
        return self.X.shape[0]


def hinge_loss(w, problem: HingeProblem) -> float:
    w = np.asarray(w, dtype=float)
    margins = (problem.X @ w) * problem.y / problem.margin
    return float(problem.weights @ np.maximum(0.0, 1.0 - margins))


def hinge_subgradient(w, problem: HingeProblem) -> np.ndarray:
    """A subgradient of the loss at w (active set: margin strictly below 1)."""
    w = np.asarray(w, dtype=float)
    margins = (problem.X @ w) * problem.y / problem.margin
    active = margins < 1.0
    coeff = np.where(active, problem.weights * problem.y, 0.0) / problem.margin
    return -(problem.X.T @ coeff)


class MinimizeResult(NamedTuple):
    w: np.ndarray
    loss: float
    iterations: int


def minimize_hinge(
    problem: HingeProblem,
    iter_budget: int = 2000,
    seed: int = 0,
    trajectory_path=None,
) -> MinimizeResult:
    """Approximate minimizer of the weighted hinge loss over the ball pair.

    Works on the margin-rescaled objective sum_i p_i max(0, margin - y w.x),
    whose subgradients stay bounded by the sample norms, with steps of Polyak
    type toward a shrinking floor estimate. Starts from the ball center;
    deterministic given the seed. The trailing-half average is evaluated as an
    extra candidate.
    """
    if iter_budget < 1:
        raise ValueError("iteration budget must be positive")
    if problem.ball.is_empty():
        raise ValueError("empty hypothesis ball")

    # Canonical evaluation order: the weighted sums are order-invariant, and
    # sorting makes that hold bitwise.
    order = np.lexsort(problem.X.T[::-1])
    x = problem.X[order]
    y = problem.y[order]
    p = problem.weights[order]
    tau = problem.margin
    ball = problem.ball

    xpy = x * (p * y)[:, None]
    w = project_to_ball_pair(ball.center, ball)
    best_w = w.copy()
    best_h = np.inf
    tail_sum = np.zeros_like(w)
    tail_count = 0
    trajectory = []
    iterations = 0
    for t in range(1, iter_budget + 1):
        iterations = t
        margins = (x @ w) * y
        active = margins < tau
        h = float(p[active] @ (tau - margins[active]))
        if trajectory_path is not None:
            trajectory.append((t, h / tau))
        if h < best_h:
            best_h = h
            best_w = w.copy()
        if t > iter_budget // 2:
            tail_sum += w
            tail_count += 1
        grad = -xpy[active].sum(axis=0)
        grad_sq = float(grad @ grad)
        if grad_sq < 1e-30:
            break
        step = (h - POLYAK_SHRINK * best_h) / grad_sq
        w = project_to_ball_pair(w - step * grad, ball)

    candidates = [best_w, project_to_ball_pair(ball.center, ball)]
    if tail_count:
        candidates.append(project_to_ball_pair(tail_sum / tail_count, ball))
    losses = [hinge_loss(c, problem) for c in candidates]
    pick = int(np.argmin(losses))
    if trajectory_path is not None:
        with open(trajectory_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "loss"])
            for it, loss in trajectory:
                writer.writerow([it, repr(loss)])
    return MinimizeResult(candidates[pick], losses[pick], iterations)


def expected_hinge_mc(
    spec: DistributionSpec,
    band: BandSpec,
    w_star,
    w,
    margin: float,
    n: int,
    seed,
) -> MonteCarloEstimate:
    """Monte Carlo estimate of the slab-conditioned clean-label hinge loss."""
    w_star = unit_vector(w_star)
    w = np.asarray(w, dtype=float)
    if margin <= 0:
        raise ValueError("margin must be positive")
    x = sample_band(spec, band, n, seed)
    labels = sign_labels(x @ w_star)
    vals = np.maximum(0.0, 1.0 - labels * (x @ w) / margin)
    return MonteCarloEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n)))
