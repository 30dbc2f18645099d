import math

import numpy as np
import pytest

from ttcbench import (
    AlgorithmSpec,
    CategoricalDist,
    FixedPrompt,
    FullHistory,
    GeneratorConfig,
    Instance,
    PromptSpec,
    RewardFiltered,
    SweepRow,
    bootstrap_ci,
    generate_instance,
    run_seqbon,
    run_trials,
    sample_complexity,
    summarize,
    sweep_budget,
    validate_instance,
)
from ttcbench.errors import GenerationExhausted
from ttcbench.harness import resolve_workers
from ttcbench.rng import child_stream
from ttcbench.verify import canonical_two_ref, check_determinism


def deterministic_inst():
    return Instance(["a0", "a1"],
                    [PromptSpec("x0", [1.0, 0.0],
                                [CategoricalDist([1.0, 0.0])])],
                    CategoricalDist([1.0]))


class TestSweepRow:
    def test_ci_must_bracket_mean(self):
        with pytest.raises(ValueError):
            SweepRow("bon", 1, 10, 0.5, 0.1, 0.6, 0.7, 0.5, 0)

    def test_success_rate_range(self):
        with pytest.raises(ValueError):
            SweepRow("bon", 1, 10, 0.5, 0.1, 0.4, 0.6, 1.5, 0)


class TestRunTrials:
    def test_single_trial_matches_run_seqbon(self):
        inst = canonical_two_ref()
        spec = AlgorithmSpec(FullHistory(window=3), label="pureseq")
        [rec] = run_trials(inst, 0, spec, 4, 1, base_seed=21)
        direct = run_seqbon(inst, 0, spec.builder, 4, child_stream(21, 0),
                            seed=21)
        assert rec == direct

    def test_same_seed_identical(self):
        inst = canonical_two_ref()
        spec = AlgorithmSpec(RewardFiltered(gamma=0.5, window=3))
        a = run_trials(inst, 0, spec, 3, 40, base_seed=5)
        b = run_trials(inst, 0, spec, 3, 40, base_seed=5)
        assert a == b

    def test_deterministic_world_zero_regret(self):
        recs = run_trials(deterministic_inst(), 0,
                          AlgorithmSpec(FixedPrompt()), 2, 25, base_seed=1)
        assert all(r.regret == 0.0 for r in recs)

    def test_worker_count_independence(self):
        assert check_determinism() == []


class TestBootstrapCi:
    def test_brackets_mean(self):
        rng = child_stream(3, 0)
        values = rng.random(500)
        lo, hi = bootstrap_ci(values, child_stream(3, 1))
        assert lo <= values.mean() <= hi

    def test_constant_values(self):
        lo, hi = bootstrap_ci(np.full(100, 0.25), child_stream(3, 2))
        assert lo == hi == 0.25

    def test_shrinks_with_trials(self):
        rng = child_stream(4, 0)
        small = rng.random(100)
        big = rng.random(10_000)
        lo_s, hi_s = bootstrap_ci(small, child_stream(4, 1))
        lo_b, hi_b = bootstrap_ci(big, child_stream(4, 2))
        assert (hi_b - lo_b) < (hi_s - lo_s)


class TestSweepBudget:
    def test_cardinality(self):
        inst = canonical_two_ref()
        specs = [AlgorithmSpec(FixedPrompt(), label="bon"),
                 AlgorithmSpec(FullHistory(window=3), label="pureseq")]
        rows = sweep_budget(inst, 0, specs, [1, 2, 4], 50, base_seed=6)
        assert len(rows) == 6
        assert {r.algorithm for r in rows} == {"bon", "pureseq"}

    def test_budgets_must_increase(self):
        inst = canonical_two_ref()
        with pytest.raises(ValueError):
            sweep_budget(inst, 0, [AlgorithmSpec(FixedPrompt(), label="b")],
                         [2, 2], 10, base_seed=0)

    def test_bon_success_rate_hand_value(self):
        # single ref [0.6, 0.4]: success at n=2 is 1 - 0.4^2 = 0.84
        inst = Instance(["a0", "a1"],
                        [PromptSpec("x0", [1.0, 0.0],
                                    [CategoricalDist([0.6, 0.4])])],
                        CategoricalDist([1.0]))
        rows = sweep_budget(inst, 0, [AlgorithmSpec(FixedPrompt(), label="bon")],
                            [2], 10_000, base_seed=7)
        assert rows[0].success_rate == pytest.approx(0.84, abs=0.015)

    def test_bon_regret_nonincreasing_within_ci(self):
        inst = canonical_two_ref()
        rows = sweep_budget(inst, 0, [AlgorithmSpec(FixedPrompt(), label="bon")],
                            [1, 2, 4, 8], 2000, base_seed=8)
        for earlier, later in zip(rows, rows[1:]):
            assert later.mean_regret <= earlier.ci95_hi + 1e-12


class TestSampleComplexity:
    def test_deterministic_world(self):
        n = sample_complexity(deterministic_inst(), 0,
                              AlgorithmSpec(FixedPrompt()), 0.1, 50, 16,
                              base_seed=2)
        assert n == 1

    def test_geometric_oracle(self):
        # pi_LLM(a*) = p = 0.1, eps = 0.05: predicted ln(1/eps)/p ~ 30
        inst = Instance(["a0", "a1"],
                        [PromptSpec("x0", [1.0, -1.0],
                                    [CategoricalDist([0.1, 0.9])])],
                        CategoricalDist([1.0]))
        n = sample_complexity(inst, 0, AlgorithmSpec(FixedPrompt()), 0.05,
                              2000, 512, base_seed=3)
        predicted = math.log(1 / 0.05) / 0.1
        assert n is not None
        assert predicted / 3 <= n <= predicted * 3

    def test_not_reached(self):
        inst = canonical_two_ref()
        n = sample_complexity(inst, 0, AlgorithmSpec(FixedPrompt()), -0.5,
                              50, 8, base_seed=4)
        assert n is None


class TestGenerateInstance:
    def test_single_reference_always_easy(self):
        inst = generate_instance(GeneratorConfig(n_refs=1, seed=0))
        meta = inst.metadata["prompts"]["x0"]
        assert meta["regime"] == "Easy"
        assert math.isinf(meta["delta"])

    def test_hard_regime_certified(self):
        cfg = GeneratorConfig(n_actions=4, n_refs=3, regime="Hard",
                              p_ref_range=(0.05, 0.3), seed=1)
        inst = generate_instance(cfg)
        assert validate_instance(inst) == []
        meta = inst.metadata["prompts"]["x0"]
        assert meta["regime"] == "Hard"
        assert meta["m_eps_llm"] > meta["n_bar"]
        assert 0.05 <= meta["p_ref_star"] <= 0.3

    def test_requested_delta_range(self):
        cfg = GeneratorConfig(n_actions=4, n_refs=3,
                              p_ref_range=(0.05, 0.15),
                              delta_range=(1.0, 2.0), seed=2)
        inst = generate_instance(cfg)
        assert 1.0 <= inst.metadata["prompts"]["x0"]["delta"] <= 2.0

    def test_same_seed_identical(self):
        cfg = GeneratorConfig(n_actions=3, n_refs=2, seed=9)
        a = generate_instance(cfg)
        b = generate_instance(cfg)
        assert a == b

    def test_exhaustion(self):
        cfg = GeneratorConfig(n_refs=2, delta_range=(1e9, 2e9),
                              max_attempts=50, seed=0)
        with pytest.raises(GenerationExhausted):
            generate_instance(cfg)


class TestResolveWorkers:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv("TTCBENCH_THREADS", "7")
        assert resolve_workers(3) == 3

    def test_env_variable(self, monkeypatch):
        monkeypatch.setenv("TTCBENCH_THREADS", "5")
        assert resolve_workers() == 5

    def test_zero_means_auto(self, monkeypatch):
        monkeypatch.setenv("TTCBENCH_THREADS", "0")
        assert resolve_workers() >= 1

    def test_unset_means_one(self, monkeypatch):
        monkeypatch.delenv("TTCBENCH_THREADS", raising=False)
        assert resolve_workers() == 1


def test_summarize_fields():
    inst = canonical_two_ref()
    spec = AlgorithmSpec(FixedPrompt(), label="bon")
    recs = run_trials(inst, 0, spec, 2, 300, base_seed=11)
    row = summarize(recs, inst, 0, "bon", 2, 11)
    assert row.trials == 300
    assert row.ci95_lo <= row.mean_regret <= row.ci95_hi
    assert 0.0 <= row.success_rate <= 1.0
