"""Long-tail knowledge distributions and contributor datasets.

Knowledge is indexed 1..support_max with power-law probabilities.  Real
data follows the full power law; synthetic data follows the same law
truncated at a cutoff (the head that a generator has mastered).  A
mixture blends the two with a real-data proportion pi.  Contributors
are datasets of (feature, label) samples tagged by knowledge index.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from ._seeds import substream
from .errors import DomainError

# substream tags under the root seed
_PROTO_STREAM = 0
_CONTRIB_STREAM = 1
_SAMPLE_STREAM = 2

_GOLDEN = 0.6180339887498949  # frac(golden ratio), spreads labels over [0, 1)


@dataclass(frozen=True)
class PowerLawSpec:
    """Zipf-like distribution p_i proportional to i**(-beta) on 1..support_max."""

    beta: float
    support_max: int

    def __post_init__(self) -> None:
        if not self.beta > 1:
            raise DomainError(f"beta must be > 1, got {self.beta}")
        if self.support_max < 1:
            raise DomainError(f"support_max must be >= 1, got {self.support_max}")

    def probabilities(self) -> np.ndarray:
        """Full pmf over indices 1..support_max (position 0 is index 1)."""
        raw = np.arange(1, self.support_max + 1, dtype=float) ** (-self.beta)
        return raw / raw.sum()


@dataclass(frozen=True)
class TruncatedPowerLawSpec:
    """Power law renormalized on the head 1..cutoff; zero beyond the cutoff."""

    beta: float
    cutoff: int
    support_max: int

    def __post_init__(self) -> None:
        if not self.beta > 1:
            raise DomainError(f"beta must be > 1, got {self.beta}")
        if self.cutoff < 1:
            raise DomainError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.support_max < self.cutoff:
            raise DomainError(
                f"support_max ({self.support_max}) must be >= cutoff ({self.cutoff})"
            )

    def probabilities(self) -> np.ndarray:
        idx = np.arange(1, self.support_max + 1, dtype=float)
        raw = np.where(idx <= self.cutoff, idx ** (-self.beta), 0.0)
        return raw / raw.sum()


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture q_i = pi * p_i + (1 - pi) * p'_i of real and synthetic laws."""

    pi: float
    real_dist: PowerLawSpec
    synth_dist: TruncatedPowerLawSpec

    def __post_init__(self) -> None:
        if not 0.0 <= self.pi <= 1.0:
            raise DomainError(f"pi must be in [0, 1], got {self.pi}")
        if self.real_dist.beta != self.synth_dist.beta:
            raise DomainError("real and synthetic distributions must share beta")
        if self.real_dist.support_max != self.synth_dist.support_max:
            raise DomainError("real and synthetic distributions must share support_max")

    @property
    def support_max(self) -> int:
        return self.real_dist.support_max

    def probabilities(self) -> np.ndarray:
        return (
            self.pi * self.real_dist.probabilities()
            + (1.0 - self.pi) * self.synth_dist.probabilities()
        )


Distribution = PowerLawSpec | TruncatedPowerLawSpec | MixtureSpec


def pmf(dist: Distribution, i: int) -> float:
    """Probability of knowledge index ``i`` (1-based) under ``dist``."""
    if not 1 <= i <= dist.support_max:
        raise DomainError(
            f"index {i} outside support 1..{dist.support_max}"
        )
    return float(dist.probabilities()[i - 1])


def sample_knowledge(dist: Distribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` knowledge indices (1-based) by inverse-CDF lookup."""
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    rng = substream(seed, _SAMPLE_STREAM)
    return _draw_indices(dist.probabilities(), n, rng)


def _draw_indices(probs: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0  # guard against rounding at the top end
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right").astype(np.int64) + 1


def knowledge_labels(indices: np.ndarray) -> np.ndarray:
    """Deterministic label in [0, 1) for each knowledge index."""
    return (np.asarray(indices, dtype=float) * _GOLDEN) % 1.0


def knowledge_prototype(index: int, feature_dim: int, seed: int) -> np.ndarray:
    """Unit-norm prototype feature vector for one knowledge index.

    Prototypes depend only on (seed, index, feature_dim), so every
    contributor in a run shares the same feature geometry.
    """
    rng = substream(seed, _PROTO_STREAM, int(index), feature_dim)
    v = rng.standard_normal(feature_dim)
    return v / np.linalg.norm(v)


def _features_for(
    indices: np.ndarray,
    feature_dim: int,
    noise_scale: float,
    seed: int,
    rng: np.random.Generator,
) -> np.ndarray:
    protos = {i: knowledge_prototype(i, feature_dim, seed) for i in np.unique(indices)}
    x = np.stack([protos[i] for i in indices]) if len(indices) else np.zeros((0, feature_dim))
    if len(indices):
        x = x + noise_scale * rng.standard_normal(x.shape)
        x = x / np.linalg.norm(x, axis=1, keepdims=True)
    return x


@dataclass(frozen=True)
class Contributor:
    """One data contributor: real and synthetic samples with knowledge tags."""

    id: str
    real_x: np.ndarray
    real_y: np.ndarray
    real_idx: np.ndarray
    synth_x: np.ndarray
    synth_y: np.ndarray
    synth_idx: np.ndarray

    def __post_init__(self) -> None:
        n1, n2 = len(self.real_y), len(self.synth_y)
        if n1 + n2 < 1:
            raise DomainError(f"contributor {self.id!r} has no samples")
        for name, x, y, idx in (
            ("real", self.real_x, self.real_y, self.real_idx),
            ("synth", self.synth_x, self.synth_y, self.synth_idx),
        ):
            if x.ndim != 2 or len(x) != len(y) or len(y) != len(idx):
                raise DomainError(f"contributor {self.id!r}: inconsistent {name} arrays")
        if self.real_x.shape[1] != self.synth_x.shape[1] and n1 and n2:
            raise DomainError(f"contributor {self.id!r}: feature dims differ")
        for y in (self.real_y, self.synth_y):
            if len(y) and (y.min() < 0.0 or y.max() > 1.0):
                raise DomainError(f"contributor {self.id!r}: labels outside [0, 1]")

    @property
    def n_real(self) -> int:
        return len(self.real_y)

    @property
    def n_synth(self) -> int:
        return len(self.synth_y)

    @property
    def n_total(self) -> int:
        return self.n_real + self.n_synth

    @property
    def pi(self) -> float:
        """Real-data proportion of this contributor."""
        return self.n_real / self.n_total

    def pooled_x(self) -> np.ndarray:
        return np.vstack([self.real_x, self.synth_x])

    def pooled_y(self) -> np.ndarray:
        return np.concatenate([self.real_y, self.synth_y])


def pool_contributors(contributors: list[Contributor], id: str = "pool") -> Contributor:
    """Merge several contributors into one (real with real, synth with synth)."""
    if not contributors:
        raise DomainError("cannot pool an empty contributor list")
    return Contributor(
        id=id,
        real_x=np.vstack([c.real_x for c in contributors]),
        real_y=np.concatenate([c.real_y for c in contributors]),
        real_idx=np.concatenate([c.real_idx for c in contributors]),
        synth_x=np.vstack([c.synth_x for c in contributors]),
        synth_y=np.concatenate([c.synth_y for c in contributors]),
        synth_idx=np.concatenate([c.synth_idx for c in contributors]),
    )


def plan_pi(plan: list[tuple[int, int]]) -> float:
    """Overall real proportion of a contributor plan [(n_real, n_synth), ...]."""
    total_real = sum(r for r, _ in plan)
    total = sum(r + s for r, s in plan)
    if total < 1:
        raise DomainError("plan has no samples")
    return total_real / total


def make_contributors(
    plan: list[tuple[int, int]],
    mixture: MixtureSpec,
    feature_dim: int,
    seed: int,
    noise_scale: float = 0.1,
) -> list[Contributor]:
    """Synthesize contributor datasets from a (n_real, n_synth) plan.

    Real samples draw knowledge indices from the full power law, synthetic
    samples from the truncated law.  Features are noisy unit-norm
    prototypes per index; labels are the deterministic per-index values.
    Each contributor uses its own derived substream, so output depends
    only on (plan, mixture, feature_dim, seed).
    """
    if feature_dim < 1:
        raise DomainError(f"feature_dim must be >= 1, got {feature_dim}")
    if noise_scale < 0:
        raise DomainError(f"noise_scale must be >= 0, got {noise_scale}")
    p_real = mixture.real_dist.probabilities()
    p_synth = mixture.synth_dist.probabilities()
    out = []
    for c, (n_real, n_synth) in enumerate(plan):
        if n_real < 0 or n_synth < 0 or n_real + n_synth < 1:
            raise DomainError(f"plan entry {c} must have n_real, n_synth >= 0 and >= 1 total")
        rng = substream(seed, _CONTRIB_STREAM, c)
        ridx = _draw_indices(p_real, n_real, rng)
        sidx = _draw_indices(p_synth, n_synth, rng)
        out.append(
            Contributor(
                id=f"c{c:03d}",
                real_x=_features_for(ridx, feature_dim, noise_scale, seed, rng),
                real_y=knowledge_labels(ridx),
                real_idx=ridx,
                synth_x=_features_for(sidx, feature_dim, noise_scale, seed, rng),
                synth_y=knowledge_labels(sidx),
                synth_idx=sidx,
            )
        )
    return out


# ---------------------------------------------------------------------------
# CSV serialization: one file per contributor, one row per sample.

_CSV_FIXED = ("id", "knowledge_index", "is_real", "label")


def write_contributors(contributors: list[Contributor], directory: str) -> list[str]:
    """Write each contributor to ``<directory>/<id>.csv``; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for c in contributors:
        path = os.path.join(directory, f"{c.id}.csv")
        dim = c.pooled_x().shape[1]
        header = list(_CSV_FIXED) + [f"f{j}" for j in range(dim)]
        rows = []
        for is_real, x, y, idx in ((1, c.real_x, c.real_y, c.real_idx),
                                   (0, c.synth_x, c.synth_y, c.synth_idx)):
            for xi, yi, ki in zip(x, y, idx):
                rows.append([c.id, int(ki), is_real, repr(float(yi))]
                            + [repr(float(v)) for v in xi])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        paths.append(path)
    return paths


def read_contributors(directory: str) -> list[Contributor]:
    """Load every ``*.csv`` in a directory written by :func:`write_contributors`."""
    names = sorted(f for f in os.listdir(directory) if f.endswith(".csv"))
    if not names:
        raise DomainError(f"no contributor CSV files in {directory!r}")
    out = []
    for name in names:
        path = os.path.join(directory, name)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[: len(_CSV_FIXED)] != list(_CSV_FIXED):
                raise DomainError(f"{path}: unexpected contributor CSV header")
            rows = list(reader)
        if not rows:
            raise DomainError(f"{path}: contributor file has no samples")
        cid = rows[0][0]
        idx = np.array([int(r[1]) for r in rows], dtype=np.int64)
        is_real = np.array([int(r[2]) for r in rows], dtype=bool)
        y = np.array([float(r[3]) for r in rows])
        x = np.array([[float(v) for v in r[4:]] for r in rows])
        out.append(
            Contributor(
                id=cid,
                real_x=x[is_real], real_y=y[is_real], real_idx=idx[is_real],
                synth_x=x[~is_real], synth_y=y[~is_real], synth_idx=idx[~is_real],
            )
        )
    return out
