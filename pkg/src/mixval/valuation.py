"""Bound-derived valuation of data contributors.

A contributor's score combines four measurable quantities at model
initialization: the mixture-weighted empirical loss, the mixture-
weighted kernel discrepancy to the test sample, the tangent-kernel
quadratic term, and a composition penalty sqrt(max(pi, 1-pi)/|S|).
Lower raw totals indicate better data when all weights are positive;
orientation is otherwise a fitting outcome, and the weights may take
any sign.  Marginal aggregation (Shapley / leave-one-out) treats the
score of pooled coalitions as the value function, with the empty
coalition worth 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._seeds import substream
from .errors import DomainError, MixvalError
from .longtail import Contributor, pool_contributors
from .mmd import MultiKernelSpec, mmd
from .ntk import Model, bound_term, ntk_gram

_EXACT_SHAPLEY_MAX = 12
_DEFAULT_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class ValuationWeights:
    """Coefficients of the four score terms; signs unrestricted."""

    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0

    def __post_init__(self) -> None:
        for name, w in self.as_dict().items():
            if not math.isfinite(w):
                raise DomainError(f"weight {name} must be finite, got {w}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4])

    def as_dict(self) -> dict[str, float]:
        return {"w1": self.w1, "w2": self.w2, "w3": self.w3, "w4": self.w4}


@dataclass(frozen=True)
class ValuationScore:
    """Four-term decomposition of one contributor's value.

    total = w1*loss_term + w2*discrepancy_term + w3*ntk_term
          + w4*composition_term, exactly as combined at construction.
    gradient_norm_bound is the diagnostic B of the capped Gram; it does
    not enter the total.
    """

    contributor_id: str
    loss_term: float
    discrepancy_term: float
    ntk_term: float
    composition_term: float
    total: float
    gradient_norm_bound: float = float("nan")

    def terms(self) -> np.ndarray:
        return np.array(
            [self.loss_term, self.discrepancy_term, self.ntk_term, self.composition_term]
        )

    @classmethod
    def from_terms(
        cls,
        contributor_id: str,
        loss_term: float,
        discrepancy_term: float,
        ntk_term: float,
        composition_term: float,
        weights: ValuationWeights,
        gradient_norm_bound: float = float("nan"),
    ) -> "ValuationScore":
        total = math.fsum(
            (
                weights.w1 * loss_term,
                weights.w2 * discrepancy_term,
                weights.w3 * ntk_term,
                weights.w4 * composition_term,
            )
        )
        return cls(
            contributor_id=contributor_id,
            loss_term=loss_term,
            discrepancy_term=discrepancy_term,
            ntk_term=ntk_term,
            composition_term=composition_term,
            total=total,
            gradient_norm_bound=gradient_norm_bound,
        )


@dataclass(frozen=True)
class ValuationConfig:
    """Knobs shared by every scoring call.

    Caps subsample a contributor's data before the quadratic-cost terms
    (tangent kernel, discrepancy); relative rankings are stable under
    such subsampling, which is what makes the caps admissible.  ``None``
    disables a cap.  All subsampling derives from ``seed`` and the
    contributor id, so scores do not depend on processing order.
    """

    weights: ValuationWeights = field(default_factory=ValuationWeights)
    estimator: str = "biased"
    kernel_scales: tuple[float, ...] = _DEFAULT_SCALES
    ntk_cap: int | None = 512
    mmd_cap: int | None = None
    test_cap: int | None = None
    ridge: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.estimator not in ("biased", "unbiased"):
            raise DomainError(f"estimator must be biased or unbiased, got {self.estimator!r}")
        for name, cap in (
            ("ntk_cap", self.ntk_cap),
            ("mmd_cap", self.mmd_cap),
            ("test_cap", self.test_cap),
        ):
            if cap is not None and cap < 2:
                raise DomainError(f"{name} must be >= 2 or None, got {cap}")
        if not self.kernel_scales or any(s <= 0 for s in self.kernel_scales):
            raise DomainError("kernel_scales must be positive and nonempty")
        if self.ridge is not None and self.ridge < 0:
            raise DomainError(f"ridge must be >= 0, got {self.ridge}")


def empirical_loss(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared-gap loss (f(x) - y)^2 / 2 over a sample set."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise DomainError("empirical loss of an empty dataset is undefined")
    if len(x) != len(y):
        raise DomainError(f"{len(x)} inputs vs {len(y)} labels")
    f = model.predict(x)
    return float(np.mean((f - y) ** 2) / 2.0)


def _capped(x: np.ndarray, cap: int | None, rng: np.random.Generator) -> np.ndarray:
    if cap is None or len(x) <= cap:
        return x
    idx = np.sort(rng.choice(len(x), size=cap, replace=False))
    return x[idx]


def _capped_xy(x, y, cap, rng):
    if cap is None or len(y) <= cap:
        return x, y
    idx = np.sort(rng.choice(len(y), size=cap, replace=False))
    return x[idx], y[idx]


def score(
    contributor: Contributor,
    test_x: np.ndarray,
    model: Model,
    config: ValuationConfig,
) -> ValuationScore:
    """Four-term value of one contributor against a test sample.

    The loss and discrepancy terms weight the real and synthetic parts
    by pi and 1-pi (an empty part has weight 0 and is skipped); the
    tangent-kernel term uses initialization residuals on the pooled
    set; |S| in the composition term is the full, uncapped size.
    """
    test_x = np.asarray(test_x, dtype=float)
    if test_x.ndim != 2 or len(test_x) < 1:
        raise DomainError("test set must be a nonempty 2-d array")
    cid = contributor.id
    pi = contributor.pi
    try:
        parts = []
        for weight, x, y, tag in (
            (pi, contributor.real_x, contributor.real_y, "real"),
            (1.0 - pi, contributor.synth_x, contributor.synth_y, "synth"),
        ):
            if weight == 0.0 or len(y) == 0:
                continue
            loss = empirical_loss(model, x, y)
            rng_m = substream(config.seed, "value", cid, "mmd-cap", tag)
            part_x = _capped(x, config.mmd_cap, rng_m)
            rng_t = substream(config.seed, "value", cid, "test-cap", tag)
            t_x = _capped(test_x, config.test_cap, rng_t)
            bank = MultiKernelSpec.median_bank(t_x, part_x, config.kernel_scales)
            dist = mmd(t_x, part_x, bank, config.estimator).value
            parts.append((weight, loss, dist))
        loss_term = math.fsum(w * l for w, l, _ in parts)
        discrepancy_term = math.fsum(w * d for w, _, d in parts)

        pooled_x, pooled_y = contributor.pooled_x(), contributor.pooled_y()
        rng_n = substream(config.seed, "value", cid, "ntk-cap")
        sub_x, sub_y = _capped_xy(pooled_x, pooled_y, config.ntk_cap, rng_n)
        gram = ntk_gram(model.spec, model.params, sub_x)
        residuals = sub_y - model.predict(sub_x)
        ntk_term = bound_term(gram, residuals, config.ridge)

        composition_term = math.sqrt(max(pi, 1.0 - pi) / contributor.n_total)
    except MixvalError as exc:
        raise type(exc)(f"contributor {cid!r}: {exc}") from exc
    return ValuationScore.from_terms(
        cid,
        loss_term,
        discrepancy_term,
        ntk_term,
        composition_term,
        config.weights,
        gradient_norm_bound=gram.gradient_norm_bound,
    )


def score_all(
    contributors: Sequence[Contributor],
    test_x: np.ndarray,
    model: Model,
    config: ValuationConfig,
    workers: int = 1,
) -> tuple[list[ValuationScore], dict[str, str]]:
    """Score every contributor; failures are collected, not fatal.

    Returns (scores, failures) where failures maps a contributor id to
    its error message.  Scores depend only on (data, id, config), never
    on list order or worker count: contributors are independent, so
    workers > 1 fans them out over a thread pool and collects results
    in the input order.
    """
    if not contributors:
        raise DomainError("need at least one contributor")
    ids = [c.id for c in contributors]
    if len(set(ids)) != len(ids):
        raise DomainError("contributor ids must be unique")
    if workers < 1:
        raise DomainError(f"workers must be >= 1, got {workers}")

    def one(c: Contributor) -> tuple[ValuationScore | None, str | None]:
        try:
            return score(c, test_x, model, config), None
        except MixvalError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if workers == 1:
        results = [one(c) for c in contributors]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, contributors))
    scores, failures = [], {}
    for c, (s, err) in zip(contributors, results):
        if s is not None:
            scores.append(s)
        else:
            failures[c.id] = err
    return scores, failures


# ---------------------------------------------------------------------------
# Weight fitting: least squares of the four term columns onto a target.


@dataclass(frozen=True)
class WeightFit:
    """Fitted combination weights with fit diagnostics."""

    weights: ValuationWeights
    residual_norm: float
    column_rank: int


def term_matrix(scores: Sequence[ValuationScore]) -> np.ndarray:
    """K x 4 matrix of term columns, contributor per row."""
    if not scores:
        raise DomainError("no scores to assemble")
    return np.vstack([s.terms() for s in scores])


def default_fit_targets(scores: Sequence[ValuationScore]) -> np.ndarray:
    """Per-contributor average of the loss and discrepancy terms.

    This is the default regression target for weight fitting; a
    held-out ground-truth metric can be passed instead when available.
    """
    return np.array([(s.loss_term + s.discrepancy_term) / 2.0 for s in scores])


def fit_weights(
    terms: np.ndarray, targets: np.ndarray, ridge: float = 1e-8
) -> WeightFit:
    """Least-squares weights mapping term columns onto targets.

    A small ridge keeps rank-deficient systems solvable; the realized
    column rank is reported so callers can see when it kicked in.
    """
    a = np.asarray(terms, dtype=float)
    t = np.asarray(targets, dtype=float).ravel()
    if a.ndim != 2 or a.shape[1] != 4:
        raise DomainError(f"term matrix must be K x 4, got {a.shape}")
    if len(a) != len(t):
        raise DomainError(f"{len(a)} term rows vs {len(t)} targets")
    if len(a) < 2:
        raise DomainError("weight fitting needs at least 2 contributors")
    if ridge < 0:
        raise DomainError(f"ridge must be >= 0, got {ridge}")
    scale = max(float(np.trace(a.T @ a)) / 4.0, 1.0)
    w = np.linalg.solve(a.T @ a + ridge * scale * np.eye(4), a.T @ t)
    return WeightFit(
        weights=ValuationWeights(*(float(v) for v in w)),
        residual_norm=float(np.linalg.norm(a @ w - t)),
        column_rank=int(np.linalg.matrix_rank(a)),
    )


def fit_score_weights(
    scores: Sequence[ValuationScore],
    targets: np.ndarray | None = None,
    ridge: float = 1e-8,
) -> WeightFit:
    """Fit weights from emitted scores (default target: loss/MMD average)."""
    if targets is None:
        targets = default_fit_targets(scores)
    return fit_weights(term_matrix(scores), targets, ridge)


def rescore(
    scores: Sequence[ValuationScore], weights: ValuationWeights
) -> list[ValuationScore]:
    """Recombine existing terms under new weights (no recomputation)."""
    return [
        ValuationScore.from_terms(
            s.contributor_id,
            s.loss_term,
            s.discrepancy_term,
            s.ntk_term,
            s.composition_term,
            weights,
            gradient_norm_bound=s.gradient_norm_bound,
        )
        for s in scores
    ]


# ---------------------------------------------------------------------------
# Marginal aggregation over coalitions of contributors.


@dataclass(frozen=True)
class CoalitionWeighting:
    """How marginal contributions are aggregated.

    kind 'shapley' with mc_permutations=0 enumerates exactly (K <= 12);
    a positive permutation budget switches to unbiased sampling.  kind
    'loo' needs no budget.
    """

    kind: str
    mc_permutations: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("shapley", "loo"):
            raise DomainError(f"kind must be 'shapley' or 'loo', got {self.kind!r}")
        if self.mc_permutations < 0:
            raise DomainError("mc_permutations must be >= 0")


ValueFn = Callable[[frozenset[int]], float]


def coalition_value_fn(
    contributors: Sequence[Contributor],
    test_x: np.ndarray,
    model: Model,
    config: ValuationConfig,
) -> ValueFn:
    """Memoized v(coalition) = score of the pooled coalition data.

    The empty coalition is worth 0 (the bound is vacuous on no data).
    Pooling recomputes pi and |S| from the combined counts.
    """
    cache: dict[frozenset[int], float] = {frozenset(): 0.0}

    def value(coalition: frozenset[int]) -> float:
        got = cache.get(coalition)
        if got is not None:
            return got
        members = sorted(coalition)
        pooled = pool_contributors(
            [contributors[i] for i in members],
            id="+".join(contributors[i].id for i in members),
        )
        v = score(pooled, test_x, model, config).total
        cache[coalition] = v
        return v

    return value


def exact_shapley(n: int, value_fn: ValueFn) -> np.ndarray:
    """Shapley values by full coalition enumeration (n <= 12)."""
    if n < 1:
        raise DomainError("need at least one contributor")
    if n > _EXACT_SHAPLEY_MAX:
        raise DomainError(
            f"exact enumeration capped at {_EXACT_SHAPLEY_MAX} contributors; "
            "use permutation sampling"
        )
    values = {}
    for mask in range(1 << n):
        coalition = frozenset(i for i in range(n) if mask >> i & 1)
        values[mask] = value_fn(coalition)
    fact = [math.factorial(k) for k in range(n + 1)]
    phi = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for mask in range(1 << n):
            if mask >> i & 1:
                continue
            size = bin(mask).count("1")
            w = fact[size] * fact[n - size - 1] / fact[n]
            acc += w * (values[mask | (1 << i)] - values[mask])
        phi[i] = acc
    return phi


def sampled_shapley(
    n: int, value_fn: ValueFn, permutations: int, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased permutation-sampling Shapley estimate with standard errors."""
    if n < 1:
        raise DomainError("need at least one contributor")
    if permutations < 1:
        raise DomainError("permutation sampling needs mc_permutations >= 1")
    rng = substream(seed, "shapley-perm")
    marginals = np.zeros((permutations, n))
    for p in range(permutations):
        order = rng.permutation(n)
        coalition: frozenset[int] = frozenset()
        prev = value_fn(coalition)
        for i in order:
            coalition = coalition | {int(i)}
            cur = value_fn(coalition)
            marginals[p, i] = cur - prev
            prev = cur
    phi = marginals.mean(axis=0)
    if permutations > 1:
        stderr = marginals.std(axis=0, ddof=1) / math.sqrt(permutations)
    else:
        stderr = np.zeros(n)
    return phi, stderr


def loo_values(n: int, value_fn: ValueFn) -> np.ndarray:
    """Leave-one-out values v(all) - v(all without i)."""
    if n < 1:
        raise DomainError("need at least one contributor")
    everyone = frozenset(range(n))
    v_all = value_fn(everyone)
    return np.array([v_all - value_fn(everyone - {i}) for i in range(n)])


@dataclass(frozen=True)
class MarginalReport:
    """Per-contributor marginal values with the aggregation used."""

    contributor_ids: tuple[str, ...]
    values: np.ndarray
    stderr: np.ndarray | None
    kind: str
    permutations: int  # 0 means exact enumeration

    def to_rows(self) -> list[dict]:
        rows = []
        for j, cid in enumerate(self.contributor_ids):
            row = {"id": cid, "value": float(self.values[j])}
            if self.stderr is not None:
                row["stderr"] = float(self.stderr[j])
            rows.append(row)
        return rows


def marginal_values(
    contributors: Sequence[Contributor],
    weighting: CoalitionWeighting,
    test_x: np.ndarray,
    model: Model,
    config: ValuationConfig,
) -> MarginalReport:
    """Aggregate coalition marginals of the pooled-score value function."""
    if not contributors:
        raise DomainError("need at least one contributor")
    n = len(contributors)
    value_fn = coalition_value_fn(contributors, test_x, model, config)
    ids = tuple(c.id for c in contributors)
    if weighting.kind == "loo":
        return MarginalReport(ids, loo_values(n, value_fn), None, "loo", 0)
    if weighting.mc_permutations == 0:
        if n > _EXACT_SHAPLEY_MAX:
            raise DomainError(
                f"{n} contributors exceed the exact-enumeration cap "
                f"{_EXACT_SHAPLEY_MAX}; set mc_permutations"
            )
        return MarginalReport(ids, exact_shapley(n, value_fn), None, "shapley", 0)
    phi, stderr = sampled_shapley(
        n, value_fn, weighting.mc_permutations, seed=config.seed
    )
    return MarginalReport(ids, phi, stderr, "shapley", weighting.mc_permutations)
