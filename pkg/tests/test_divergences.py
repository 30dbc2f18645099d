import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttcbench import (
    CategoricalDist,
    Instance,
    InvalidM,
    PromptSpec,
    coverage,
    e_m_divergence,
    m_epsilon,
    regret_of_action,
    regret_of_dist,
    tv_distance,
)
from ttcbench.rng import child_stream
from ttcbench.verify import check_divergences, random_dist


P1 = CategoricalDist([1.0, 0.0])
P2 = CategoricalDist([0.25, 0.75])


class TestEMDivergence:
    def test_hand_value(self):
        assert e_m_divergence(P1, P2, 2.0) == pytest.approx(0.5, abs=1e-15)

    def test_identical_dists(self):
        assert e_m_divergence(P2, P2, 1.0) == 0.0

    def test_m_below_one(self):
        with pytest.raises(InvalidM):
            e_m_divergence(P1, P2, 0.5)

    def test_unsupported_mass_never_drains(self):
        p1 = CategoricalDist([0.6, 0.4, 0.0])
        p2 = CategoricalDist([0.0, 0.5, 0.5])
        assert e_m_divergence(p1, p2, 1e9) == pytest.approx(0.6, abs=1e-9)


class TestMEpsilon:
    def test_hand_value(self):
        # solve 1 - 0.25 M = 0.1
        assert m_epsilon(P1, P2, 0.1) == pytest.approx(3.6, abs=1e-12)

    def test_clamped_at_one(self):
        assert m_epsilon(P2, P2, 0.05) == 1.0

    def test_infinite_threshold(self):
        p1 = CategoricalDist([0.5, 0.5])
        p2 = CategoricalDist([1.0, 0.0])
        assert math.isinf(m_epsilon(p1, p2, 0.3))

    def test_unsupported_exactly_eps(self):
        p1 = CategoricalDist([0.9, 0.1])
        p2 = CategoricalDist([1.0, 0.0])
        m = m_epsilon(p1, p2, 0.1)
        assert math.isfinite(m)
        assert e_m_divergence(p1, p2, m) <= 0.1 + 1e-15


class TestCoverage:
    def test_hand_values(self):
        assert coverage(CategoricalDist([0.7, 0.3]),
                        CategoricalDist([0.5, 0.5])) == pytest.approx(1.16)
        assert coverage(P1, P2) == pytest.approx(4.0)

    def test_identical(self):
        assert coverage(P2, P2) == pytest.approx(1.0, abs=1e-15)

    def test_infinite(self):
        assert math.isinf(coverage(CategoricalDist([0.5, 0.5]),
                                   CategoricalDist([1.0, 0.0])))


class TestTvDistance:
    def test_hand_value(self):
        assert tv_distance(CategoricalDist([0.7, 0.3]),
                           CategoricalDist([0.5, 0.5])) == pytest.approx(0.4)

    def test_range(self):
        assert tv_distance(P1, CategoricalDist([0.0, 1.0])) == 2.0
        assert tv_distance(P1, P1) == 0.0


@pytest.fixture
def two_action_inst():
    return Instance(["a0", "a1"],
                    [PromptSpec("x0", [1.0, 0.3],
                                [CategoricalDist([0.5, 0.5])])],
                    CategoricalDist([1.0]))


class TestRegret:
    def test_zero_at_best(self, two_action_inst):
        assert regret_of_action(two_action_inst, 0, "a0") == 0.0

    def test_hand_value(self, two_action_inst):
        assert regret_of_action(two_action_inst, 0, "a1") == pytest.approx(0.7)

    def test_diffuse_comparator(self, two_action_inst):
        comp = CategoricalDist([0.5, 0.5])
        assert regret_of_action(two_action_inst, 0, "a0",
                                comp) == pytest.approx(-0.35)

    def test_dist_regret(self, two_action_inst):
        alg = CategoricalDist([0.84, 0.16])
        inst = Instance(["a0", "a1"],
                        [PromptSpec("x0", [1.0, 0.0],
                                    [CategoricalDist([0.5, 0.5])])],
                        CategoricalDist([1.0]))
        assert regret_of_dist(inst, 0, alg) == pytest.approx(0.16)
        comp = inst.prompts[0].comparator
        assert regret_of_dist(inst, 0, comp) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**6),
       st.floats(min_value=0.01, max_value=0.6))
def test_m_epsilon_consistency(seed, eps):
    rng = child_stream(seed, 3)
    size = int(rng.integers(2, 6))
    p1 = random_dist(rng, size)
    p2 = random_dist(rng, size)
    m = m_epsilon(p1, p2, eps)
    if math.isinf(m):
        assert float(p1.probs[p2.probs == 0].sum()) > eps
        return
    assert e_m_divergence(p1, p2, m) <= eps + 1e-12
    if m > 1.0:
        assert e_m_divergence(p1, p2, m - 1e-9) > eps - 1e-12
    cov = coverage(p1, p2)
    if math.isfinite(cov):
        assert m <= cov / eps + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_e_m_monotone_convex(seed):
    rng = child_stream(seed, 4)
    size = int(rng.integers(2, 6))
    p1 = random_dist(rng, size)
    p2 = random_dist(rng, size)
    m = float(rng.uniform(1.0, 10.0))
    d = float(rng.uniform(0.1, 5.0))
    e0, e1, e2 = (e_m_divergence(p1, p2, mm) for mm in (m, m + d, m + 2 * d))
    assert e0 >= e1 - 1e-15 >= e2 - 2e-15
    assert e1 <= (e0 + e2) / 2 + 1e-12  # convexity at equally spaced points
    assert e0 <= e_m_divergence(p1, p2, 1.0) + 1e-15 <= 1.0 + 1e-15


def test_divergence_property_suite():
    assert check_divergences(n_pairs=200) == []
