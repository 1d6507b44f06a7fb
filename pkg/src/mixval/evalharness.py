"""Toy-scale evaluation harness for valuation methods.

Ground truth is the test metric of a small model retrained to
convergence on each contributor's data (full-batch gradient descent on
the squared loss).  Valuation quality is the rank correlation between
scores and ground truth; runtime is wall-clock with a warmup run
excluded.  Fixtures inject a controlled feature shift into synthetic
samples so that distribution discrepancy, not initial loss, carries the
ranking signal.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from ._seeds import derive_seed, substream
from .errors import DegenerateDataError, DomainError
from .longtail import Contributor, MixtureSpec, make_contributors
from .ntk import MLPSpec, Model, ParamVector, gradients, init_params, ntk_gram, predict
from .valuation import ValuationScore, empirical_loss

log = logging.getLogger(__name__)

_METRICS = ("accuracy", "one_minus_loss")


@dataclass(frozen=True)
class TrainingConfig:
    """Full-batch gradient-descent budget for ground-truth retraining.

    The step size is lr_scale * n / lambda_max(Gram at init), capped at
    lr_cap; the n / lambda_max form is the stable-step bound for
    training in the kernel regime.  Training stops when the loss change
    drops below tol or at max_epochs.
    """

    lr_scale: float = 0.1
    lr_cap: float = 0.5
    tol: float = 1e-6
    max_epochs: int = 5000
    eigen_cap: int = 256
    metric: str = "accuracy"
    restarts: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.lr_scale <= 0 or self.lr_cap <= 0:
            raise DomainError("learning-rate scale and cap must be > 0")
        if self.tol <= 0 or self.max_epochs < 1 or self.eigen_cap < 1:
            raise DomainError("tol, max_epochs and eigen_cap must be positive")
        if self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts}")
        if self.metric not in _METRICS:
            raise DomainError(f"metric must be one of {_METRICS}, got {self.metric!r}")

    def digest(self) -> str:
        text = repr(
            (
                self.lr_scale,
                self.lr_cap,
                self.tol,
                self.max_epochs,
                self.eigen_cap,
                self.metric,
                self.restarts,
                self.seed,
            )
        )
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class GroundTruth:
    """Retraining outcome for one contributor."""

    contributor_id: str
    test_metric: float
    config_digest: str
    diverged: bool = False

    def __post_init__(self) -> None:
        if not self.diverged and not 0.0 <= self.test_metric <= 1.0:
            raise DomainError(
                f"test metric must be in [0, 1], got {self.test_metric}"
            )


@dataclass(frozen=True)
class TrainResult:
    model: Model
    epochs: int
    final_loss: float
    diverged: bool


def _learning_rate(
    spec: MLPSpec, params: ParamVector, x: np.ndarray, config: TrainingConfig
) -> float:
    n = len(x)
    if n <= config.eigen_cap:
        sub = x
    else:
        rng = substream(config.seed, "lr-probe")
        sub = x[np.sort(rng.choice(n, size=config.eigen_cap, replace=False))]
    gram = ntk_gram(spec, params, sub)
    # lambda_max grows about linearly with sample count
    lam = float(np.linalg.eigvalsh(gram.matrix)[-1]) * (n / len(sub))
    if lam <= 0:
        return config.lr_cap
    return min(config.lr_cap, config.lr_scale * n / lam)


def train_model(
    x: np.ndarray, y: np.ndarray, spec: MLPSpec, config: TrainingConfig
) -> TrainResult:
    """Train a fresh model by full-batch gradient descent on (f-y)^2/2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y) or len(y) == 0:
        raise DomainError("training needs matching nonempty inputs and labels")
    params = init_params(spec)
    values = params.values.copy()
    lr = _learning_rate(spec, params, x, config)
    n = len(y)
    prev = math.inf
    loss = math.inf
    epochs = 0
    for epochs in range(1, config.max_epochs + 1):
        pv = ParamVector(values, params.weight_shapes)
        f = predict(spec, pv, x)
        resid = f - y
        loss = float(np.mean(resid**2) / 2.0)
        if not math.isfinite(loss) or loss > 1e6:
            return TrainResult(Model(spec, pv), epochs, loss, diverged=True)
        if abs(prev - loss) < config.tol:
            break
        g = gradients(spec, pv, x)
        values = values - lr * (g.T @ resid) / n
        prev = loss
    final = ParamVector(values, params.weight_shapes)
    return TrainResult(Model(spec, final), epochs, loss, diverged=False)


def accuracy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of test points with |f(x) - y| < 0.5."""
    if len(y) == 0:
        raise DomainError("accuracy of an empty test set is undefined")
    return float(np.mean(np.abs(model.predict(x) - np.asarray(y).ravel()) < 0.5))


def _metric(model: Model, x, y, kind: str) -> float:
    if kind == "accuracy":
        return accuracy(model, x, y)
    # 1 - 2 * mean squared-gap loss, clipped into [0, 1]
    return float(np.clip(1.0 - 2.0 * empirical_loss(model, x, y), 0.0, 1.0))


def train_ground_truth(
    contributors: Sequence[Contributor],
    spec: MLPSpec,
    config: TrainingConfig,
    test_x: np.ndarray,
    test_y: np.ndarray,
    workers: int = 1,
) -> list[GroundTruth]:
    """Retrain per contributor and record its test metric.

    Each contributor gets its own derived init seed, so results depend
    only on (data, id, spec, config), not on list order or worker
    count; workers > 1 retrains on a thread pool.  Diverged runs are
    flagged and later excluded from correlations.
    """
    if not contributors:
        raise DomainError("need at least one contributor")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")
    digest = config.digest()

    def one(c: Contributor) -> GroundTruth:
        metrics = []
        for r in range(config.restarts):
            c_spec = replace(
                spec, init_seed=derive_seed(config.seed, "gt-init", c.id, r)
            )
            result = train_model(c.pooled_x(), c.pooled_y(), c_spec, config)
            if result.diverged:
                log.warning("training diverged for contributor %s", c.id)
                return GroundTruth(c.id, 0.0, digest, diverged=True)
            metrics.append(_metric(result.model, test_x, test_y, config.metric))
        return GroundTruth(c.id, float(np.mean(metrics)), digest)

    if workers == 1:
        return [one(c) for c in contributors]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, contributors))


# ---------------------------------------------------------------------------
# Correlations, implemented directly so the estimators are auditable.


def _validate_pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if len(x) != len(y):
        raise DomainError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise DomainError("correlation needs at least 2 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("correlation inputs must be finite")
    return x, y


def pearson(xs, ys) -> float:
    """Linear correlation coefficient."""
    x, y = _validate_pair(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise DegenerateDataError("constant input has no defined correlation")
    return float(dx @ dy) / denom


def average_ranks(xs) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    x = np.asarray(xs, dtype=float).ravel()
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Rank correlation: linear correlation of average ranks."""
    x, y = _validate_pair(xs, ys)
    return pearson(average_ranks(x), average_ranks(y))


def kendall(xs, ys) -> float:
    """Tie-corrected rank concordance (the tau-b form)."""
    x, y = _validate_pair(xs, ys)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(len(x), k=1)
    s = float(np.sum(dx[iu] * dy[iu]))
    n0 = len(x) * (len(x) - 1) / 2.0
    tx = n0 - float(np.sum(dx[iu] != 0))
    ty = n0 - float(np.sum(dy[iu] != 0))
    denom = math.sqrt((n0 - tx) * (n0 - ty))
    if denom == 0.0:
        raise DegenerateDataError("constant input has no defined concordance")
    return s / denom


@dataclass(frozen=True)
class CorrelationReport:
    """The three standard correlations over n aligned pairs."""

    pearson: float
    spearman: float
    kendall: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("a correlation report needs n >= 2")
        for name in ("pearson", "spearman", "kendall"):
            v = getattr(self, name)
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise DomainError(f"{name} = {v} outside [-1, 1]")

    def flipped(self) -> "CorrelationReport":
        return CorrelationReport(-self.pearson, -self.spearman, -self.kendall, self.n)


@dataclass(frozen=True)
class MethodEvaluation:
    """Correlations of a score against ground truth in both orientations.

    Higher scores may mean better or worse data depending on the fitted
    weights; best_orientation is the sign under which the rank
    correlation comes out nonnegative.
    """

    positive: CorrelationReport
    negative: CorrelationReport
    best_orientation: int

    @property
    def best(self) -> CorrelationReport:
        return self.positive if self.best_orientation == 1 else self.negative


def _as_score_map(scores) -> dict[str, float]:
    if isinstance(scores, Mapping):
        return {str(k): float(v) for k, v in scores.items()}
    out = {}
    for s in scores:
        if not isinstance(s, ValuationScore):
            raise DomainError(
                "scores must be a mapping id -> value or ValuationScore objects"
            )
        out[s.contributor_id] = s.total
    return out


def evaluate_method(
    scores, ground_truth: Sequence[GroundTruth]
) -> MethodEvaluation:
    """Correlate scores with ground truth over aligned contributor ids.

    Diverged ground-truth entries are excluded; fewer than 2 aligned
    pairs is an error.
    """
    score_map = _as_score_map(scores)
    aligned = [
        (score_map[g.contributor_id], g.test_metric)
        for g in ground_truth
        if not g.diverged and g.contributor_id in score_map
    ]
    if len(aligned) < 2:
        raise DomainError(f"only {len(aligned)} aligned pairs; need at least 2")
    v = np.array([a for a, _ in aligned])
    g = np.array([b for _, b in aligned])
    positive = CorrelationReport(pearson(v, g), spearman(v, g), kendall(v, g), len(v))
    orientation = 1 if positive.spearman >= 0 else -1
    return MethodEvaluation(
        positive=positive, negative=positive.flipped(), best_orientation=orientation
    )


def loss_only_scores(
    contributors: Sequence[Contributor], model: Model
) -> dict[str, float]:
    """Ablation baseline: the mixture-weighted initial loss term alone."""
    out = {}
    for c in contributors:
        parts = []
        for weight, x, y in (
            (c.pi, c.real_x, c.real_y),
            (1.0 - c.pi, c.synth_x, c.synth_y),
        ):
            if weight == 0.0 or len(y) == 0:
                continue
            parts.append(weight * empirical_loss(model, x, y))
        out[c.id] = math.fsum(parts)
    return out


# ---------------------------------------------------------------------------
# Timing.


@dataclass(frozen=True)
class RuntimeReport:
    """Wall-clock cost of one task run (after an optional warmup)."""

    total_seconds: float
    per_unit_seconds: float
    units: int


def time_method(
    task: Callable[[], object], units: int = 1, warmup: bool = True
) -> RuntimeReport:
    """Time one run of task on a monotonic clock; the warmup run is untimed."""
    if units < 1:
        raise DomainError(f"units must be >= 1, got {units}")
    if warmup:
        task()
    t0 = time.perf_counter()
    task()
    total = time.perf_counter() - t0
    return RuntimeReport(
        total_seconds=total, per_unit_seconds=total / units, units=units
    )


# ---------------------------------------------------------------------------
# Controlled fixtures: synthetic parts get a feature-space shift, so the
# discrepancy to the (unshifted) test sample grows with the synthetic
# proportion and with the per-contributor shift magnitude.


@dataclass(frozen=True)
class ShiftFixture:
    contributors: list[Contributor]
    test_x: np.ndarray
    test_y: np.ndarray
    shift_directions: np.ndarray  # one unit row per contributor


def _perturb_contributor(
    c: Contributor,
    magnitude: float,
    direction: np.ndarray,
    label_noise: float,
    noise_rng: np.random.Generator,
) -> Contributor:
    if c.n_synth == 0 or (magnitude == 0.0 and label_noise == 0.0):
        return c
    shifted = c.synth_x
    if magnitude != 0.0:
        shifted = shifted + magnitude * direction
        shifted = shifted / np.linalg.norm(shifted, axis=1, keepdims=True)
    labels = c.synth_y
    if label_noise != 0.0:
        # wrap into [0, 1) so noisy labels stay in the label range
        labels = (labels + label_noise * noise_rng.standard_normal(len(labels))) % 1.0
    return Contributor(
        id=c.id,
        real_x=c.real_x,
        real_y=c.real_y,
        real_idx=c.real_idx,
        synth_x=shifted,
        synth_y=labels,
        synth_idx=c.synth_idx,
    )


def make_shift_fixture(
    pis: Sequence[float],
    samples_each: int,
    feature_dim: int = 8,
    shift: float | Sequence[float] = 1.2,
    label_noise: float | Sequence[float] = 0.0,
    test_size: int = 200,
    beta: float = 1.5,
    cutoff: int = 20,
    support_max: int = 200,
    noise_scale: float = 0.1,
    per_contributor_directions: bool = False,
    paired: bool = False,
    seed: int = 0,
) -> ShiftFixture:
    """Contributors on a pi schedule whose synthetic parts are degraded.

    ``shift`` moves synthetic features along a bias direction (one
    magnitude for all contributors or one per contributor);
    ``label_noise`` wraps Gaussian noise onto synthetic labels, also
    scalar or per contributor.  With per_contributor_directions each
    contributor's synthetic pipeline gets its own bias direction, which
    keeps the shift visible to a discrepancy measure while scrambling
    any systematic effect of one fixed direction on model outputs.
    With ``paired`` every contributor slices prefixes of one shared
    real pool and one shared synthetic pool, so contributors differ
    only in mixture ratio and injected degradation, not in which
    knowledge they drew.  The test sample is an independent draw from
    the real distribution, so it shares the feature geometry of the
    real parts.
    """
    from .longtail import PowerLawSpec, TruncatedPowerLawSpec

    if samples_each < 2 or test_size < 2:
        raise DomainError("samples_each and test_size must be >= 2")

    def per_contributor(value, name: str) -> list[float]:
        out = (
            [float(value)] * len(pis)
            if np.isscalar(value)
            else [float(v) for v in value]
        )
        if len(out) != len(pis):
            raise DomainError(f"{len(out)} {name} values for {len(pis)} contributors")
        return out

    shifts = per_contributor(shift, "shift")
    noises = per_contributor(label_noise, "label_noise")
    mixture = MixtureSpec(
        pi=0.5,
        real_dist=PowerLawSpec(beta, support_max),
        synth_dist=TruncatedPowerLawSpec(beta, cutoff, support_max),
    )
    plan = []
    for pi in pis:
        if not 0.0 <= pi <= 1.0:
            raise DomainError(f"pi must be in [0, 1], got {pi}")
        n_real = int(round(pi * samples_each))
        plan.append((n_real, samples_each - n_real))
    if paired:
        pool = make_contributors(
            [(samples_each, samples_each)], mixture, feature_dim, seed, noise_scale
        )[0]
        raw = [
            Contributor(
                id=f"c{i:03d}",
                real_x=pool.real_x[:n_real],
                real_y=pool.real_y[:n_real],
                real_idx=pool.real_idx[:n_real],
                synth_x=pool.synth_x[: samples_each - n_real],
                synth_y=pool.synth_y[: samples_each - n_real],
                synth_idx=pool.synth_idx[: samples_each - n_real],
            )
            for i, (n_real, _) in enumerate(plan)
        ]
    else:
        raw = make_contributors(plan, mixture, feature_dim, seed, noise_scale)

    directions = np.empty((len(pis), feature_dim))
    for i in range(len(pis)):
        rng = substream(seed, "shift-dir", i if per_contributor_directions else 0)
        d = rng.standard_normal(feature_dim)
        directions[i] = d / np.linalg.norm(d)
    contributors = [
        _perturb_contributor(c, s, d, g, substream(seed, "label-noise", i))
        for i, (c, s, d, g) in enumerate(zip(raw, shifts, directions, noises))
    ]

    test = make_contributors(
        [(test_size, 0)],
        mixture,
        feature_dim,
        derive_seed(seed, "harness-test"),
        noise_scale,
    )[0]
    return ShiftFixture(
        contributors=contributors,
        test_x=test.real_x,
        test_y=test.real_y,
        shift_directions=directions,
    )
