"""Long-tail knowledge distributions and contributor synthesis."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from mixval.errors import DomainError
from mixval.longtail import (
    Contributor,
    MixtureSpec,
    PowerLawSpec,
    TruncatedPowerLawSpec,
    knowledge_labels,
    knowledge_prototype,
    make_contributors,
    plan_pi,
    pmf,
    pool_contributors,
    read_contributors,
    sample_knowledge,
    write_contributors,
)

from conftest import small_mixture


# ---------------------------------------------------------------------------
# Distribution specs.


def test_power_law_head_value():
    p = PowerLawSpec(beta=1.5, support_max=100_000).probabilities()
    # hand normalization: p_1 = 1 / sum(i^-1.5)
    z = np.sum(np.arange(1, 100_001, dtype=float) ** -1.5)
    assert math.isclose(p[0], 1.0 / z, rel_tol=1e-14)
    assert p[0] == pytest.approx(0.3837223727483637, abs=1e-15)


def test_power_law_normalized_and_decreasing():
    p = PowerLawSpec(beta=2.0, support_max=500).probabilities()
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(p) < 0)


def test_truncated_head_value_and_zero_tail():
    spec = TruncatedPowerLawSpec(beta=1.5, cutoff=100, support_max=100_000)
    q = spec.probabilities()
    assert q[0] == pytest.approx(0.4144435055841647, abs=1e-15)
    assert np.all(q[100:] == 0.0)
    assert math.fsum(q) == pytest.approx(1.0, abs=1e-12)
    # renormalized head: q_1 = 1 / sum_{i<=100}(i^-1.5)
    zk = np.sum(np.arange(1, 101, dtype=float) ** -1.5)
    assert math.isclose(q[0], 1.0 / zk, rel_tol=1e-14)


def test_mixture_combination():
    mix = MixtureSpec(
        pi=0.25,
        real_dist=PowerLawSpec(beta=1.5, support_max=100_000),
        synth_dist=TruncatedPowerLawSpec(beta=1.5, cutoff=100, support_max=100_000),
    )
    m = mix.probabilities()
    p = mix.real_dist.probabilities()
    q = mix.synth_dist.probabilities()
    assert np.allclose(m, 0.25 * p + 0.75 * q, rtol=0, atol=1e-15)
    assert m[0] == pytest.approx(0.40676322237521445, abs=1e-15)
    assert mix.support_max == 100_000


def test_spec_validation():
    with pytest.raises(DomainError):
        PowerLawSpec(beta=1.0, support_max=10)
    with pytest.raises(DomainError):
        PowerLawSpec(beta=1.5, support_max=0)
    with pytest.raises(DomainError):
        TruncatedPowerLawSpec(beta=1.5, cutoff=20, support_max=10)
    with pytest.raises(DomainError):
        MixtureSpec(
            pi=1.5,
            real_dist=PowerLawSpec(beta=1.5, support_max=10),
            synth_dist=TruncatedPowerLawSpec(beta=1.5, cutoff=5, support_max=10),
        )
    with pytest.raises(DomainError):
        MixtureSpec(
            pi=0.5,
            real_dist=PowerLawSpec(beta=1.5, support_max=10),
            synth_dist=TruncatedPowerLawSpec(beta=2.0, cutoff=5, support_max=10),
        )


def test_pmf_scalar_lookup():
    spec = PowerLawSpec(beta=1.5, support_max=50)
    p = spec.probabilities()
    assert pmf(spec, 1) == p[0]
    assert pmf(spec, 50) == p[49]
    with pytest.raises(DomainError):
        pmf(spec, 0)
    with pytest.raises(DomainError):
        pmf(spec, 51)


@settings(max_examples=25, deadline=None)
@given(
    beta=st.floats(min_value=1.01, max_value=4.0),
    support=st.integers(min_value=1, max_value=500),
)
def test_probabilities_normalized_property(beta, support):
    p = PowerLawSpec(beta=beta, support_max=support).probabilities()
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-9)
    assert np.all(p >= 0)


# ---------------------------------------------------------------------------
# Sampling and labels.


def test_sample_knowledge_range_and_determinism():
    spec = PowerLawSpec(beta=1.5, support_max=30)
    a = sample_knowledge(spec, 200, seed=5)
    b = sample_knowledge(spec, 200, seed=5)
    assert np.array_equal(a, b)
    assert a.min() >= 1 and a.max() <= 30
    assert not np.array_equal(a, sample_knowledge(spec, 200, seed=6))
    assert len(sample_knowledge(spec, 0, seed=1)) == 0
    with pytest.raises(DomainError):
        sample_knowledge(spec, -1, seed=1)


def test_sample_knowledge_goodness_of_fit():
    # chi-square against the exact pmf; all expected counts >= 5
    spec = PowerLawSpec(beta=1.5, support_max=20)
    n = 4000
    draws = sample_knowledge(spec, n, seed=123)
    observed = np.bincount(draws, minlength=21)[1:]
    expected = spec.probabilities() * n
    assert expected.min() > 5
    result = scipy.stats.chisquare(observed, expected)
    assert result.pvalue > 0.01


def test_knowledge_labels_golden_values():
    labels = knowledge_labels(np.array([1, 2, 3]))
    golden = (1 + math.sqrt(5)) / 2 - 1
    assert labels == pytest.approx([golden, (2 * golden) % 1, (3 * golden) % 1], abs=1e-15)
    assert labels == pytest.approx([0.61803399, 0.23606798, 0.85410197], abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=10**9), min_size=1, max_size=50))
def test_knowledge_labels_range_property(indices):
    labels = knowledge_labels(np.array(indices))
    assert np.all(labels >= 0.0) and np.all(labels < 1.0)


def test_prototypes_unit_norm_and_deterministic():
    a = knowledge_prototype(3, 8, seed=11)
    b = knowledge_prototype(3, 8, seed=11)
    assert np.array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
    assert not np.allclose(a, knowledge_prototype(4, 8, seed=11))
    assert not np.allclose(a, knowledge_prototype(3, 8, seed=12))


# ---------------------------------------------------------------------------
# Contributor synthesis.


def test_make_contributors_shapes_and_pi():
    plan = [(10, 5), (0, 7), (4, 0)]
    contributors = make_contributors(plan, small_mixture(), feature_dim=6, seed=3)
    assert [c.id for c in contributors] == ["c000", "c001", "c002"]
    for c, (nr, ns) in zip(contributors, plan):
        assert (c.n_real, c.n_synth) == (nr, ns)
        assert c.pi == nr / (nr + ns)
        assert c.real_x.shape == (nr, 6)
        assert c.synth_x.shape == (ns, 6)
    assert plan_pi(plan) == pytest.approx(14 / 26)


def test_make_contributors_deterministic():
    plan = [(8, 8)]
    [a] = make_contributors(plan, small_mixture(), feature_dim=4, seed=3)
    [b] = make_contributors(plan, small_mixture(), feature_dim=4, seed=3)
    assert np.array_equal(a.real_x, b.real_x)
    assert np.array_equal(a.synth_y, b.synth_y)
    [c] = make_contributors(plan, small_mixture(), feature_dim=4, seed=4)
    assert not np.array_equal(a.real_x, c.real_x)


def test_features_unit_norm_labels_match_indices():
    [c] = make_contributors([(20, 20)], small_mixture(), feature_dim=5, seed=2)
    norms = np.linalg.norm(c.pooled_x(), axis=1)
    assert norms == pytest.approx(np.ones(40), abs=1e-12)
    assert np.array_equal(c.real_y, knowledge_labels(c.real_idx))
    assert np.array_equal(c.synth_y, knowledge_labels(c.synth_idx))
    # synthetic indices obey the truncation
    assert c.synth_idx.max() <= 20


def test_contributor_validation():
    x = np.zeros((2, 3))
    y = np.array([0.2, 0.4])
    idx = np.array([1, 2])
    empty_x, empty_y, empty_idx = np.zeros((0, 3)), np.zeros(0), np.zeros(0, int)
    with pytest.raises(DomainError):
        Contributor("a", empty_x, empty_y, empty_idx, empty_x, empty_y, empty_idx)
    with pytest.raises(DomainError):
        Contributor("a", x, y[:1], idx, empty_x, empty_y, empty_idx)
    with pytest.raises(DomainError):
        Contributor("a", x, np.array([0.2, 1.4]), idx, empty_x, empty_y, empty_idx)


def test_pool_contributors_counts(contributors_small):
    pooled = pool_contributors(contributors_small, id="merged")
    assert pooled.id == "merged"
    assert pooled.n_real == sum(c.n_real for c in contributors_small)
    assert pooled.n_synth == sum(c.n_synth for c in contributors_small)
    assert pooled.pi == pytest.approx(36 / 60)
    stacked = np.vstack([c.real_x for c in contributors_small])
    assert np.array_equal(pooled.real_x, stacked)


def test_write_read_roundtrip(tmp_path, contributors_small):
    paths = write_contributors(contributors_small, str(tmp_path))
    assert len(paths) == 3
    back = read_contributors(str(tmp_path))
    assert [c.id for c in back] == [c.id for c in contributors_small]
    for a, b in zip(contributors_small, back):
        # repr round-trip is exact for float64
        assert np.array_equal(a.real_x, b.real_x)
        assert np.array_equal(a.real_y, b.real_y)
        assert np.array_equal(a.real_idx, b.real_idx)
        assert np.array_equal(a.synth_x, b.synth_x)
        assert np.array_equal(a.synth_y, b.synth_y)


def test_read_contributors_empty_dir(tmp_path):
    with pytest.raises(DomainError):
        read_contributors(str(tmp_path))
