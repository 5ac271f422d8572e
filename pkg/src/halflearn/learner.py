"""Phase drivers for the per-draw and batch noise models.

Each phase: gather instances, keep the ones in the current slab (phase one
keeps everything), soft-remove outliers, reveal every kept label, minimize the
reweighted hinge loss over the localized ball, and renormalize the minimizer
into the next direction. Diagnostics that depend on the hidden target are
assembled outside the decision path and only when a target is supplied.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .adversary import LearnerStateView, MaliciousOracle, NastyOracle
from .core import BandSpec, ConstantsProfile, Provenance, SearchBall, angle, build_schedule
from .dist import DistributionSpec, err_rate_mc, err_rate_rotational, Kind, sample, sample_band, sign_labels
from .hinge import HingeProblem, minimize_hinge
from .outlier import RemovalInfeasible, RemovalProblem, soft_outlier_removal
from .rng import derive_seed, stream


class Mode(enum.Enum):
    MALICIOUS = "malicious"
    NASTY = "nasty"


class LearnFailure(RuntimeError):
    """A phase could not complete; the run is aborted rather than patched."""

    def __init__(self, phase: int, reason: str):
        super().__init__(f"phase {phase}: {reason}")
        self.phase = phase
        self.reason = reason


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float
    delta: float
    dist: DistributionSpec
    profile: ConstantsProfile
    mode: Mode
    seed: int = 0
    diagnostics: bool = False
    iter_budget: int = 2000
    removal_restarts: int = 4
    diag_mc_draws: int = 20000

    def __post_init__(self):
        if not (0 < self.epsilon < 1) or not (0 < self.delta < 1):
            raise ValueError("epsilon and delta must lie in (0, 1)")


@dataclass
class PhaseStats:
    phase: int
    n_drawn: int
    band_accept_rate: float
    t_size: int
    removal_cuts: int
    removal_bound: float
    mass_ratio: float
    hinge_loss: float
    degenerate: bool
    halfwidth: float
    radius: float
    dirty_frac: float = math.nan
    angle_to_target: float = math.nan
    dist_to_target: float = math.nan
    in_band_err: float = math.nan


@dataclass
class RunReport:
    mode: str
    epsilon: float
    delta: float
    dim: int
    seed: int
    per_phase: list[PhaseStats] = field(default_factory=list)
    total_instance_calls: int = 0
    total_label_calls: int = 0
    oracle_batch_calls: int = 0
    final_err_estimate: float = math.nan
    diagnostics_enabled: bool = False

    def validate(self) -> None:
        if self.total_label_calls > self.total_instance_calls:
            raise ValueError("label calls cannot exceed instance calls")

    CSV_HEADER = (
        "phase",
        "n_drawn",
        "band_accept_rate",
        "t_size",
        "removal_cuts",
        "removal_bound",
        "mass_ratio",
        "hinge_loss",
        "degenerate",
        "halfwidth",
        "radius",
        "dirty_frac",
        "angle_to_target",
        "dist_to_target",
        "in_band_err",
    )

    def csv_rows(self):
        for s in self.per_phase:
            yield (
                s.phase,
                s.n_drawn,
                repr(s.band_accept_rate),
                s.t_size,
                s.removal_cuts,
                repr(s.removal_bound),
                repr(s.mass_ratio),
                repr(s.hinge_loss),
                int(s.degenerate),
                repr(s.halfwidth),
                repr(s.radius),
                repr(s.dirty_frac),
                repr(s.angle_to_target),
                repr(s.dist_to_target),
                repr(s.in_band_err),
            )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.CSV_HEADER)
            for row in self.csv_rows():
                writer.writerow(row)

    def summary_items(self) -> list[tuple[str, str]]:
        return [
            ("mode", self.mode),
            ("epsilon", repr(self.epsilon)),
            ("delta", repr(self.delta)),
            ("dim", str(self.dim)),
            ("seed", str(self.seed)),
            ("phases", str(len(self.per_phase))),
            ("total_instance_calls", str(self.total_instance_calls)),
            ("total_label_calls", str(self.total_label_calls)),
            ("oracle_batch_calls", str(self.oracle_batch_calls)),
            ("final_err_estimate", repr(self.final_err_estimate)),
        ]


@dataclass(frozen=True)
class LearnResult:
    w: np.ndarray
    report: RunReport


def run_malicious(config: LearnerConfig, oracle: MaliciousOracle, diag_target=None) -> LearnResult:
    """Run the per-draw learner: one oracle call per requested instance."""
    if config.mode is not Mode.MALICIOUS:
        raise ValueError("config mode must be malicious")

    def draw_phase(n: int, view: LearnerStateView):
        rows = []
        tokens = []
        for _ in range(n):
            x, token = oracle.draw(view)
            rows.append(x)
            tokens.append(token)
        return np.asarray(rows), np.asarray(tokens, dtype=np.int64)

    return _run_phases(config, oracle, draw_phase, batch_oracle=False, diag_target=diag_target)


def run_nasty(config: LearnerConfig, oracle: NastyOracle, diag_target=None) -> LearnResult:
    """Run the batch learner: exactly one oracle call per phase."""
    if config.mode is not Mode.NASTY:
        raise ValueError("config mode must be nasty")

    def draw_phase(n: int, view: LearnerStateView):
        return oracle.batch(n, view)

    return _run_phases(config, oracle, draw_phase, batch_oracle=True, diag_target=diag_target)


def _run_phases(config, oracle, draw_phase, batch_oracle: bool, diag_target) -> LearnResult:
    schedule = build_schedule(config.epsilon, config.delta, config.dist.dim, config.profile)
    d = config.dist.dim
    w_prev = np.zeros(d)
    report = RunReport(
        mode=config.mode.value,
        epsilon=config.epsilon,
        delta=config.delta,
        dim=d,
        seed=config.seed,
        diagnostics_enabled=config.diagnostics and diag_target is not None,
    )
    moment_bound = config.profile.moment_bound(batch_oracle=batch_oracle)

    for phase in schedule.phases:
        view = LearnerStateView(w_prev.copy(), phase.halfwidth, phase.index)
        X, tokens = draw_phase(phase.n_draws, view)
        if phase.index == 1:
            keep = np.ones(X.shape[0], dtype=bool)
        else:
            keep = np.abs(X @ w_prev) <= phase.halfwidth
        T = X[keep]
        t_tokens = tokens[keep]
        if T.shape[0] == 0:
            raise LearnFailure(phase.index, "no instances landed in the slab")

        # Phase one's center is the zero vector, so the slab predicate holds
        # for the unfiltered working set as well.
        ball = SearchBall(w_prev, phase.radius)
        problem = RemovalProblem(
            instances=T,
            ball=ball,
            halfwidth=phase.halfwidth,
            outlier_frac=phase.outlier_frac,
            moment_bound=moment_bound,
        )
        try:
            removal = soft_outlier_removal(
                problem,
                restarts=config.removal_restarts,
                seed=derive_seed(config.seed, "removal", phase.index),
            )
        except RemovalInfeasible as exc:
            raise LearnFailure(phase.index, str(exc)) from exc

        labels = oracle.reveal_many(t_tokens)
        hinge_problem = HingeProblem(
            X=T,
            y=labels,
            weights=removal.p,
            margin=phase.margin,
            ball=ball,
            opt_slack=config.profile.slack,
        )
        result = minimize_hinge(
            hinge_problem,
            iter_budget=config.iter_budget,
            seed=derive_seed(config.seed, "hinge", phase.index),
        )
        v = result.w
        v_norm = float(np.linalg.norm(v))
        degenerate = v_norm < 1e-12
        w_next = w_prev if degenerate else v / v_norm

        stats = PhaseStats(
            phase=phase.index,
            n_drawn=int(X.shape[0]),
            band_accept_rate=float(T.shape[0]) / X.shape[0],
            t_size=int(T.shape[0]),
            removal_cuts=removal.cuts_used,
            removal_bound=removal.certified_bound,
            mass_ratio=float(removal.q.sum()) / T.shape[0],
            hinge_loss=result.loss,
            degenerate=degenerate,
            halfwidth=phase.halfwidth,
            radius=phase.radius,
        )
        if report.diagnostics_enabled:
            _fill_phase_diagnostics(stats, config, phase, oracle, t_tokens, w_prev, w_next, v, diag_target)
        report.per_phase.append(stats)
        w_prev = w_next

    report.total_instance_calls = oracle.instance_calls
    report.total_label_calls = oracle.label_calls
    report.oracle_batch_calls = getattr(oracle, "batch_calls", 0)
    if diag_target is not None:
        report.final_err_estimate = _error_estimate(config, w_prev, diag_target)
    report.validate()
    return LearnResult(w=w_prev, report=report)


def _error_estimate(config: LearnerConfig, w: np.ndarray, target) -> float:
    if float(np.linalg.norm(w)) < 1e-12:
        return 1.0
    if config.dist.kind is Kind.GAUSSIAN:
        return err_rate_rotational(w, target)
    return err_rate_mc(
        config.dist, w, target, 200_000, stream(derive_seed(config.seed, "err-mc"))
    )


def _fill_phase_diagnostics(stats, config, phase, oracle, tokens, w_prev, w_next, v, target):
    provs = [oracle.provenance_of(int(t)) for t in tokens]
    stats.dirty_frac = sum(p is not Provenance.CLEAN for p in provs) / max(len(provs), 1)
    if target is None:
        return
    target = np.asarray(target, dtype=float)
    stats.angle_to_target = angle(w_next, target) if np.linalg.norm(w_next) > 1e-12 else math.nan
    stats.dist_to_target = float(np.linalg.norm(w_next - target))
    if np.linalg.norm(v) > 1e-12:
        rng = stream(derive_seed(config.seed, "diag", phase.index))
        norm_prev = float(np.linalg.norm(w_prev))
        if norm_prev > 1e-12:
            band = BandSpec(w_prev / norm_prev, phase.halfwidth)
            draws = sample_band(config.dist, band, config.diag_mc_draws, rng)
        else:
            draws = sample(config.dist, config.diag_mc_draws, rng)
        stats.in_band_err = float(
            np.mean(sign_labels(draws @ v) != sign_labels(draws @ target))
        )


def phase_diagnostics(report: RunReport) -> list[dict]:
    """Per-phase diagnostic table. Requires a run with diagnostics enabled."""
    if not report.diagnostics_enabled:
        raise ValueError("diagnostics were not enabled for this run")
    return [
        {
            "phase": s.phase,
            "angle_to_target": s.angle_to_target,
            "in_band_err": s.in_band_err,
            "dirty_frac": s.dirty_frac,
            "mass_ratio": s.mass_ratio,
        }
        for s in report.per_phase
    ]
