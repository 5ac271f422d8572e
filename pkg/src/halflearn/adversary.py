"""Corruption oracles: per-draw malicious and batch nasty adversaries.

Both oracles commit a label for every instance they hand out and reveal it
only when asked, so label accounting is exact. The adversary sees a snapshot
of the learner's state (current direction and slab width) but never the
target, which it uses only to commit labels. Provenance is tracked per token
strictly for diagnostics; nothing on the learner-facing path exposes it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import BandSpec, LabeledSample, Provenance, unit_vector
from .dist import DistributionSpec, sample, sample_band, sign_labels
from .rng import stream


@dataclass(frozen=True)
class LearnerStateView:
    """Read-only snapshot of the learner state shown to the adversary."""

    center: np.ndarray
    halfwidth: float
    phase: int

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")


class AttackKind(enum.Enum):
    RANDOM_FLIP = "randomflip"
    BAND_FLIP = "bandflip"
    FAR_OUTLIER = "faroutlier"
    BOUNDARY_ERASE = "boundaryerase"


@dataclass(frozen=True)
class AttackStrategy:
    kind: AttackKind
    magnitude: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.kind is AttackKind.FAR_OUTLIER and not self.magnitude > 0:
            raise ValueError("far-outlier magnitude must be positive")

    @classmethod
    def parse(cls, token: str, seed: int = 0) -> "AttackStrategy":
        """Parse tokens like ``bandflip`` or ``faroutlier:R=100``."""
        name, _, rest = token.strip().lower().partition(":")
        try:
            kind = AttackKind(name)
        except ValueError:
            raise ValueError(f"unknown attack strategy: {name!r}") from None
        magnitude = 100.0
        if rest:
            key, _, value = rest.partition("=")
            if key.strip() not in ("r", "magnitude"):
                raise ValueError(f"unknown strategy parameter: {rest!r}")
            magnitude = float(value)
        return cls(kind=kind, magnitude=magnitude, seed=seed)


class _TokenTable:
    """Committed labels, revealed-flags and provenance, keyed by token."""

    def __init__(self):
        self._records: dict[int, tuple[int, Provenance, bool]] = {}
        self._next = 0

    def commit(self, label: int, provenance: Provenance) -> int:
        token = self._next
        self._next += 1
        self._records[token] = (label, provenance, False)
        return token

    def reveal(self, token: int) -> int:
        if token not in self._records:
            raise ValueError(f"unknown label token: {token!r}")
        label, prov, revealed = self._records[token]
        if revealed:
            raise ValueError(f"label token already revealed: {token!r}")
        self._records[token] = (label, prov, True)
        return label

    def provenance(self, token: int) -> Provenance:
        if token not in self._records:
            raise ValueError(f"unknown label token: {token!r}")
        return self._records[token][1]


class _OracleBase:
    """Shared plumbing: clean stream, dirty generators, token table, counters.

    Not thread safe; callers must serialize access to a single oracle.
    """

    def __init__(self, dist: DistributionSpec, target, eta: float, strategy: AttackStrategy, seed: int):
        if not (0.0 <= eta < 0.5):
            raise ValueError(f"noise rate must lie in [0, 1/2), got {eta!r}")
        self.dist = dist
        self.eta = float(eta)
        self.strategy = strategy
        self._target = unit_vector(target)
        self._clean = stream(seed, "oracle", "clean")
        self._dirty = stream(seed, "oracle", "dirty", strategy.seed)
        self._coin = stream(seed, "oracle", "coin")
        self._tokens = _TokenTable()
        self.instance_calls = 0
        self.label_calls = 0

    # -- learner-facing ----------------------------------------------------

    def reveal_label(self, token: int) -> int:
        label = self._tokens.reveal(token)
        self.label_calls += 1
        return label

    def reveal_many(self, tokens) -> np.ndarray:
        return np.array([self.reveal_label(int(t)) for t in tokens], dtype=float)

    # -- diagnostics only (never consulted by the learner) ------------------

    def provenance_of(self, token: int) -> Provenance:
        return self._tokens.provenance(token)

    def diagnostic_target(self) -> np.ndarray:
        return self._target.copy()

    # -- internals -----------------------------------------------------------

    def _committed_label(self, x: np.ndarray) -> int:
        return int(sign_labels(float(self._target @ x)))

    def _band_flip_pair(self, view: LearnerStateView) -> tuple[np.ndarray, int]:
        # In-slab draw with the committed label flipped: the strongest
        # label-only attack that stays moment-typical inside the slab.
        norm = float(np.linalg.norm(view.center))
        if norm < 1e-12:
            x = sample(self.dist, 1, self._dirty)[0]
        else:
            band = BandSpec(view.center / norm, view.halfwidth / norm)
            x = sample_band(self.dist, band, 1, self._dirty)[0]
        return x, -self._committed_label(x)

    def _dirty_pair(self, view: LearnerStateView) -> tuple[np.ndarray, int]:
        kind = self.strategy.kind
        if kind is AttackKind.RANDOM_FLIP:
            x = sample(self.dist, 1, self._dirty)[0]
            return x, -self._committed_label(x)
        if kind is AttackKind.BAND_FLIP:
            return self._band_flip_pair(view)
        if kind is AttackKind.FAR_OUTLIER:
            g = sample(self.dist, 1, self._dirty)[0]
            x = self.strategy.magnitude * g / np.linalg.norm(g)
            return x, -self._committed_label(x)
        raise ValueError(f"strategy {kind.value!r} does not generate per-draw pairs")


class MaliciousOracle(_OracleBase):
    """Per-request oracle: each call is corrupted independently with rate eta."""

    def __init__(self, dist, target, eta, strategy: AttackStrategy, seed: int = 0):
        if strategy.kind is AttackKind.BOUNDARY_ERASE:
            raise ValueError("boundary erasure needs batch access; use the nasty oracle")
        super().__init__(dist, target, eta, strategy, seed)

    def draw(self, view: LearnerStateView) -> tuple[np.ndarray, int]:
        """One instance plus an opaque label token. The label stays hidden."""
        self.instance_calls += 1
        corrupted = self.eta > 0.0 and bool(self._coin.random() < self.eta)
        if corrupted:
            x, label = self._dirty_pair(view)
            token = self._tokens.commit(label, Provenance.DIRTY)
        else:
            x = sample(self.dist, 1, self._clean)[0]
            token = self._tokens.commit(self._committed_label(x), Provenance.CLEAN)
        return x.copy(), token


class NastyOracle(_OracleBase):
    """Batch oracle: inspects all clean draws, then replaces exactly
    floor(eta * N) of them."""

    def __init__(self, dist, target, eta, strategy: AttackStrategy, seed: int = 0):
        super().__init__(dist, target, eta, strategy, seed)
        self.batch_calls = 0
        self._last_erased: list[LabeledSample] = []
        self._last_clean_draw: np.ndarray | None = None

    def batch(self, n: int, view: LearnerStateView) -> tuple[np.ndarray, np.ndarray]:
        """N instances plus label tokens, shuffled, with floor(eta*N) replaced."""
        if n < 1:
            raise ValueError("batch size must be positive")
        self.batch_calls += 1
        self.instance_calls += n

        clean = sample(self.dist, n, self._clean)
        self._last_clean_draw = clean.copy()
        n_replace = math.floor(self.eta * n)
        erase_idx = self._select_erasures(clean, n_replace, view)

        x_rows = []
        labels = []
        provs = []
        erased = []
        erase_set = set(int(i) for i in erase_idx)
        for i in range(n):
            if i in erase_set:
                erased.append(
                    LabeledSample(clean[i].copy(), self._committed_label(clean[i]), Provenance.CLEAN)
                )
                x, label = self._replacement_pair(view)
                x_rows.append(x)
                labels.append(label)
                provs.append(Provenance.REPLACEMENT)
            else:
                x_rows.append(clean[i])
                labels.append(self._committed_label(clean[i]))
                provs.append(Provenance.CLEAN)
        self._last_erased = erased

        order = self._coin.permutation(n)
        X = np.asarray(x_rows)[order]
        tokens = np.array(
            [self._tokens.commit(labels[i], provs[i]) for i in order], dtype=np.int64
        )
        return X, tokens

    # -- diagnostics ---------------------------------------------------------

    def last_erased(self) -> list[LabeledSample]:
        return list(self._last_erased)

    def last_clean_draw(self) -> np.ndarray:
        if self._last_clean_draw is None:
            raise ValueError("no batch drawn yet")
        return self._last_clean_draw.copy()

    # -- internals -------------------------------------------------------------

    def _select_erasures(self, clean: np.ndarray, n_replace: int, view: LearnerStateView) -> np.ndarray:
        if n_replace == 0:
            return np.empty(0, dtype=np.int64)
        if self.strategy.kind is AttackKind.BOUNDARY_ERASE:
            # Erase the clean in-slab points nearest the true boundary; top up
            # with global minimizers when the slab holds too few.
            margin = np.abs(clean @ self._target)
            in_band = np.abs(clean @ view.center) <= view.halfwidth
            band_order = np.flatnonzero(in_band)[np.argsort(margin[in_band], kind="stable")]
            chosen = list(band_order[:n_replace])
            if len(chosen) < n_replace:
                rest = np.flatnonzero(~in_band)[np.argsort(margin[~in_band], kind="stable")]
                chosen.extend(rest[: n_replace - len(chosen)])
            return np.asarray(chosen, dtype=np.int64)
        return self._dirty.choice(clean.shape[0], size=n_replace, replace=False)

    def _replacement_pair(self, view: LearnerStateView) -> tuple[np.ndarray, int]:
        if self.strategy.kind is AttackKind.BOUNDARY_ERASE:
            return self._band_flip_pair(view)
        return self._dirty_pair(view)
