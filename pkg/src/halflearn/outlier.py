"""Localized soft outlier removal.

Given slab-confined instances and a hypothesis ball, find per-sample weights
q in [0, 1] that keep at least a (1 - outlier_frac) fraction of the total mass
while capping the reweighted second moment over every direction in the ball.
Feasibility is found by a cutting-plane loop: an ascent-based separation
oracle proposes violating directions, and a greedy pass down-weights the
largest contributors to each violated cut. The accepted weights are certified
a posteriori by the same oracle (and, in two dimensions, by a dense grid).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SearchBall, project_to_ball_pair
from .rng import stream

ASCENT_STEPS = 200
CUT_MARGIN = 0.95


class RemovalInfeasible(RuntimeError):
    """No weight assignment satisfies the mass and moment constraints.

    ``reason`` is "mass" when silencing the discovered cuts would drop the
    kept mass below its floor (the empirical dirty fraction exceeds the
    budget), or "max_cuts" when the cut loop fails to converge.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"soft outlier removal infeasible ({reason}){': ' + detail if detail else ''}")
        self.reason = reason


@dataclass(frozen=True)
class RemovalProblem:
    instances: np.ndarray
    ball: SearchBall
    halfwidth: float
    outlier_frac: float
    moment_bound: float
    tolerance: float = 1.1

    def __post_init__(self):
        x = np.asarray(self.instances, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("instances must be a nonempty (n, d) array")
        object.__setattr__(self, "instances", x)
        if not (0.0 <= self.outlier_frac < 0.5):
            raise ValueError("outlier_frac must lie in [0, 1/2)")
        if self.halfwidth <= 0 or self.moment_bound <= 0 or self.tolerance < 1.0:
            raise ValueError("halfwidth and moment_bound must be positive, tolerance >= 1")
        proj = np.abs(x @ self.ball.center)
        if np.any(proj > self.halfwidth + 1e-9):
            raise ValueError("every instance must satisfy the slab predicate")

    @property
    def size(self) -> int:
        return self.instances.shape[0]

    @property
    def moment_threshold(self) -> float:
        return self.moment_bound * (self.halfwidth**2 + self.ball.radius**2)


@dataclass(frozen=True)
class RemovalResult:
    """Weight map over the instances: raw weights q and probabilities p."""

    q: np.ndarray
    p: np.ndarray
    cuts_used: int
    certified_bound: float

    def to_csv(self, path, provenance=None) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if provenance is None:
                writer.writerow(["index", "weight"])
                for i, w in enumerate(self.q):
                    writer.writerow([i, repr(float(w))])
            else:
                writer.writerow(["index", "weight", "provenance"])
                for i, (w, prov) in enumerate(zip(self.q, provenance)):
                    writer.writerow([i, repr(float(w)), getattr(prov, "value", prov)])


class OracleFinding(NamedTuple):
    w: np.ndarray
    value: float


def _weighted_gram(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    return (x * q[:, None]).T @ x / x.shape[0]


def _top_eigvec(m: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = m.shape[0]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(ASCENT_STEPS):
        u = m @ v
        norm = float(np.linalg.norm(u))
        if norm < 1e-300:
            return v
        u /= norm
        if np.linalg.norm(u - v) < 1e-12:
            return u
        v = u
    return v


def separation_oracle(
    q: np.ndarray,
    problem: RemovalProblem,
    restarts: int = 4,
    seed: int = 0,
    warm_starts=(),
) -> OracleFinding:
    """Approximately maximize the reweighted second moment over the ball.

    Projected gradient ascent from the top eigenvector of the weighted Gram
    matrix (both signs) plus random ball points plus any warm starts. The
    returned value is attained at a feasible point, hence a valid lower bound
    on the true supremum; a missed maximum only loosens the moment check by
    the problem's tolerance factor.
    """
    if restarts < 1:
        raise ValueError("need at least one restart")
    x = problem.instances
    n, d = x.shape
    q = np.asarray(q, dtype=float)
    if q.shape != (n,) or np.any(q < -1e-12) or np.any(q > 1.0 + 1e-12):
        raise ValueError("weights must lie in [0, 1] over the instances")
    rng = stream(seed, "separation")
    gram = _weighted_gram(x, q)
    top = _top_eigvec(gram, rng)
    lam = float(top @ gram @ top)
    step = 1.0 / (2.0 * lam + 1e-12)

    ball = problem.ball
    starts = [project_to_ball_pair(top, ball), project_to_ball_pair(-top, ball)]
    for _ in range(restarts - 1):
        g = rng.standard_normal(d)
        starts.append(project_to_ball_pair(ball.center + ball.radius * g / np.linalg.norm(g), ball))
    for w in warm_starts:
        starts.append(project_to_ball_pair(np.asarray(w, dtype=float), ball))

    best_w = starts[0]
    best_val = -1.0
    for w0 in starts:
        w = w0
        for _ in range(ASCENT_STEPS):
            w_next = project_to_ball_pair(w + step * 2.0 * (gram @ w), ball)
            if np.linalg.norm(w_next - w) < 1e-12:
                w = w_next
                break
            w = w_next
        val = float(w @ gram @ w)
        if val > best_val:
            best_val, best_w = val, w
    return OracleFinding(best_w, best_val)


def _canonical_order(x: np.ndarray) -> np.ndarray:
    return np.lexsort(x.T[::-1])


def soft_outlier_removal(
    problem: RemovalProblem,
    max_cuts: int | None = None,
    restarts: int = 4,
    seed: int = 0,
) -> RemovalResult:
    """Find slab weights feasible for the mass and moment constraints.

    Each discovered cut is silenced by reducing weights on its largest
    contributors (coefficients are nonnegative, so this is mass-optimal per
    cut) down to a 5% margin under the threshold; earlier cuts are re-checked
    after every pass. Deterministic given the seed.
    """
    x_user = problem.instances
    n, d = x_user.shape
    if max_cuts is None:
        max_cuts = 50 * d

    # Canonical evaluation order: results do not depend on how the adversary
    # ordered the batch.
    order = _canonical_order(x_user)
    x = x_user[order]
    canon = RemovalProblem(
        instances=x,
        ball=problem.ball,
        halfwidth=problem.halfwidth,
        outlier_frac=problem.outlier_frac,
        moment_bound=problem.moment_bound,
        tolerance=problem.tolerance,
    )

    q = np.ones(n)
    accept_at = problem.tolerance * problem.moment_threshold
    target = CUT_MARGIN * problem.moment_bound * (problem.halfwidth**2 + problem.ball.radius**2) * n
    mass_floor = (1.0 - problem.outlier_frac) * n

    cuts: list[np.ndarray] = []
    warm: list[np.ndarray] = []
    for round_idx in range(max_cuts):
        found = separation_oracle(q, canon, restarts=restarts, seed=seed + round_idx, warm_starts=warm)
        if found.value <= accept_at:
            q_user = np.empty(n)
            q_user[order] = q
            total = float(q_user.sum())
            return RemovalResult(
                q=q_user, p=q_user / total, cuts_used=round_idx, certified_bound=found.value
            )
        warm = [found.w]
        cuts.append((x @ found.w) ** 2)
        for coeffs in cuts:
            total = float(q @ coeffs)
            if total <= target:
                continue
            for i in np.argsort(-coeffs, kind="stable"):
                if total <= target:
                    break
                if q[i] <= 0.0 or coeffs[i] <= 0.0:
                    continue
                cut_by = min(q[i], (total - target) / coeffs[i])
                q[i] -= cut_by
                total -= cut_by * coeffs[i]
        if float(q.sum()) < mass_floor:
            raise RemovalInfeasible(
                "mass",
                f"kept mass {q.sum():.3f} fell below {(1 - problem.outlier_frac):.4f} * {n}",
            )
    raise RemovalInfeasible("max_cuts", f"no feasible weights after {max_cuts} cuts")


class VerifyOutcome(NamedTuple):
    ok: bool
    witness: np.ndarray | None
    value: float

    def __bool__(self) -> bool:  # type: ignore[override]
        return self.ok


def grid_points(ball: SearchBall, resolution: float) -> np.ndarray:
    """Dense grid over a 2-D ball pair (independent check helper)."""
    if ball.dim != 2:
        raise ValueError("grid enumeration is for dimension 2 only")
    lo = np.maximum(ball.center - ball.radius, -1.0)
    hi = np.minimum(ball.center + ball.radius, 1.0)
    xs = np.arange(lo[0], hi[0] + resolution, resolution)
    ys = np.arange(lo[1], hi[1] + resolution, resolution)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    keep = (np.linalg.norm(pts, axis=1) <= 1.0) & (
        np.linalg.norm(pts - ball.center, axis=1) <= ball.radius
    )
    pts = pts[keep]
    if pts.shape[0] == 0:
        pts = project_to_ball_pair(ball.center, ball)[None, :]
    return pts


def verify_weights(q: np.ndarray, problem: RemovalProblem, grid_resolution: float = 1e-3) -> VerifyOutcome:
    """Brute-force the moment constraint on a 2-D grid over the ball.

    Returns a falsy outcome with a witness direction when some grid point
    exceeds the tolerance-scaled threshold.
    """
    if problem.instances.shape[1] != 2:
        raise ValueError("verify_weights only supports dimension 2")
    q = np.asarray(q, dtype=float)
    pts = grid_points(problem.ball, grid_resolution)
    x = problem.instances
    limit = problem.tolerance * problem.moment_threshold + 1e-9
    worst_val = -1.0
    worst_w = None
    chunk = 200_000
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        vals = ((block @ x.T) ** 2 * q).sum(axis=1) / x.shape[0]
        idx = int(np.argmax(vals))
        if vals[idx] > worst_val:
            worst_val = float(vals[idx])
            worst_w = block[idx]
    if worst_val > limit:
        return VerifyOutcome(False, worst_w, worst_val)
    return VerifyOutcome(True, None, worst_val)
