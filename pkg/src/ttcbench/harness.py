"""Deterministic Monte Carlo experiment runner.

Trial ``t`` of any batch draws from the pure child stream ``(base_seed, t)``,
so results are bit-identical for any worker count or execution order.
Confidence intervals are percentile bootstrap with 10^4 resamples, which
behaves sensibly for the bounded, often bimodal regret distributions here.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .algorithms import (
    AlgorithmSpec,
    TrialRecord,
    adaptive_rejection_sampling,
    run_seqbon,
)
from .errors import GenerationExhausted
from .model import CategoricalDist, Instance, PromptSpec, mixture_dist, validate_instance
from .divergences import coverage, regret_of_action
from .rng import child_stream, mix
from . import theory

BOOTSTRAP_RESAMPLES = 10_000
_BOOTSTRAP_STREAM = 2**62  # child index disjoint from any trial index


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    n: int
    trials: int
    mean_regret: float
    std_regret: float
    ci95_lo: float
    ci95_hi: float
    success_rate: float
    seed: int

    def __post_init__(self):
        if not (self.ci95_lo <= self.mean_regret <= self.ci95_hi):
            raise ValueError(
                f"CI [{self.ci95_lo}, {self.ci95_hi}] does not bracket the "
                f"mean {self.mean_regret}")
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError(f"success_rate {self.success_rate} outside [0,1]")


@dataclass(frozen=True)
class GeneratorConfig:
    """Targets for the rejection-sampling instance generator.

    Ranges are inclusive; the generator draws random candidate worlds and
    keeps the first one whose measured margin, prior mass, coverage, and
    regime all land inside them.
    """

    n_actions: int = 3
    n_prompts: int = 1
    n_refs: int = 2
    delta_range: tuple[float, float] = (0.0, math.inf)
    p_ref_range: tuple[float, float] = (0.0, 1.0)
    coverage_range: tuple[float, float] = (1.0, math.inf)
    regime: str | None = None  # "Easy" | "Hard" | None
    eps: float = 0.1
    seed: int = 0
    max_attempts: int = 100_000


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else TTCBENCH_THREADS (0 = auto)."""
    if workers is None:
        env = os.environ.get("TTCBENCH_THREADS", "")
        workers = int(env) if env else 1
    if workers == 0:
        workers = os.cpu_count() or 1
    return max(1, workers)


def _trial(inst, prompt_index, spec, n, base_seed, t) -> TrialRecord:
    rng = child_stream(base_seed, t)
    if spec.kind == "seqbon":
        return run_seqbon(inst, prompt_index, spec.builder, n, rng, seed=base_seed)
    prompt = inst.prompts[prompt_index]
    action, accepted_at = adaptive_rejection_sampling(
        inst, prompt_index, prompt.comparator, spec.builder, n,
        spec.m_schedule, rng, epsilon=spec.epsilon)
    r = float(prompt.rewards[inst.action_index(action)])
    return TrialRecord(
        actions=(action,), rewards=(r,),
        accepted_flags=(accepted_at is not None,),
        chosen=action,
        regret=regret_of_action(inst, prompt_index, action),
        seed=base_seed,
    )


def _run_chunk(args) -> list[TrialRecord]:
    inst, prompt_index, spec, n, base_seed, start, stop = args
    return [_trial(inst, prompt_index, spec, n, base_seed, t)
            for t in range(start, stop)]


def run_trials(inst: Instance, prompt_index: int, spec: AlgorithmSpec, n: int,
               trials: int, base_seed: int,
               workers: int | None = None) -> list[TrialRecord]:
    """Independent trials; trial t uses the pure child stream (base_seed, t)."""
    workers = resolve_workers(workers)
    if workers == 1 or trials < 2 * workers:
        return [_trial(inst, prompt_index, spec, n, base_seed, t)
                for t in range(trials)]
    bounds = np.linspace(0, trials, workers + 1, dtype=int)
    jobs = [(inst, prompt_index, spec, n, base_seed, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(_run_chunk, jobs))
    return [rec for chunk in chunks for rec in chunk]


def bootstrap_ci(values: np.ndarray, rng: np.random.Generator,
                 resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[float, float]:
    """Percentile bootstrap CI for the mean.

    Resampling with replacement from the empirical distribution is realized
    through multinomial counts over the distinct values, which is exact and
    avoids materializing resamples x trials index matrices.
    """
    vals, counts = np.unique(values, return_counts=True)
    trials = values.size
    if vals.size == 1:
        v = float(vals[0])
        return v, v
    cnt = rng.multinomial(trials, counts / trials, size=resamples)
    means = cnt @ vals / trials
    lo, hi = np.percentile(means, [2.5, 97.5])
    m = float(values.mean())
    return min(float(lo), m), max(float(hi), m)


def summarize(records: list[TrialRecord], inst: Instance, prompt_index: int,
              label: str, n: int, seed: int) -> SweepRow:
    best = inst.actions[inst.prompts[prompt_index].best_action_index]
    regrets = np.array([r.regret for r in records])
    success = float(np.mean([r.chosen == best for r in records]))
    lo, hi = bootstrap_ci(regrets, child_stream(seed, _BOOTSTRAP_STREAM))
    return SweepRow(
        algorithm=label, n=n, trials=len(records),
        mean_regret=float(regrets.mean()),
        std_regret=float(regrets.std(ddof=1)) if len(records) > 1 else 0.0,
        ci95_lo=lo, ci95_hi=hi, success_rate=success, seed=seed,
    )


def sweep_budget(inst: Instance, prompt_index: int, specs: list[AlgorithmSpec],
                 budgets: list[int], trials: int, base_seed: int,
                 workers: int | None = None) -> list[SweepRow]:
    """One row per (algorithm, budget)."""
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly increasing")
    rows = []
    for si, spec in enumerate(specs):
        label = spec.label or f"spec{si}"
        for n in budgets:
            row_seed = mix(base_seed, si, n)
            recs = run_trials(inst, prompt_index, spec, n, trials, row_seed,
                              workers=workers)
            rows.append(summarize(recs, inst, prompt_index, label, n, row_seed))
    return rows


NOT_REACHED = None


def sample_complexity(inst: Instance, prompt_index: int, spec: AlgorithmSpec,
                      eps_target: float, trials: int, n_max: int,
                      base_seed: int = 0,
                      workers: int | None = None) -> int | None:
    """Smallest budget whose regret upper CI bound is <= eps_target.

    Doubling search then binary refinement; every evaluation uses fresh child
    seeds.  Returns None when n_max is not enough.
    """
    def ok(n: int) -> bool:
        row_seed = mix(base_seed, n)
        recs = run_trials(inst, prompt_index, spec, n, trials, row_seed,
                          workers=workers)
        regrets = np.array([r.regret for r in recs])
        _, hi = bootstrap_ci(regrets, child_stream(row_seed, _BOOTSTRAP_STREAM))
        return hi <= eps_target

    n = 1
    while n <= n_max and not ok(n):
        n *= 2
    if n > n_max:
        if n // 2 < n_max and ok(n_max):
            n = n_max
        else:
            return NOT_REACHED
    lo, hi = n // 2, n  # lo failed (or 0), hi succeeded
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def empirical_output_dist(inst: Instance, prompt_index: int,
                          spec: AlgorithmSpec, n: int, trials: int,
                          seed: int) -> np.ndarray:
    """Vectorized Monte Carlo estimate of the output law (counts / trials).

    Groups trials by their realized action prefix so each step costs one
    mixture evaluation per distinct prefix; intended for the small instances
    used in oracle cross-checks.
    """
    rng = child_stream(seed, 0)
    n_act = inst.n_actions
    prompt = inst.prompts[prompt_index]
    rewards = prompt.rewards
    comparator = prompt.comparator
    builder = spec.builder
    rejection = spec.kind == "rejection"

    actions = np.zeros((trials, n), dtype=np.int64)
    out = np.zeros(n_act)
    active = np.ones(trials, dtype=bool) if rejection else None

    for i in range(n):
        if rejection and not active.any():
            break
        idx = np.nonzero(active)[0] if rejection else np.arange(trials)
        # group by prefix
        codes = actions[idx, :i] @ (n_act ** np.arange(i)) if i else np.zeros(
            len(idx), dtype=np.int64)
        for code in np.unique(codes):
            members = idx[codes == code]
            past = list(actions[members[0], :i])
            past_rew = [float(rewards[a]) for a in past]
            dist = mixture_dist(inst, prompt_index,
                                builder.select(past, past_rew))
            c = np.cumsum(dist.probs)
            draws = np.searchsorted(c, rng.random(members.size) * c[-1],
                                    side="right")
            actions[members, i] = draws
            if rejection:
                m_i = spec.step_threshold(i, comparator, dist)
                if math.isfinite(m_i):
                    q = np.minimum(
                        np.divide(comparator.probs, m_i * dist.probs,
                                  out=np.zeros(n_act),
                                  where=dist.probs > 0), 1.0)
                else:
                    q = np.zeros(n_act)
                accept = rng.random(members.size) < q[draws]
                for a in range(n_act):
                    out[a] += np.count_nonzero(accept & (draws == a))
                active[members[accept]] = False

    if rejection:
        idx = np.nonzero(active)[0]
        if idx.size:
            codes = actions[idx, :n] @ (n_act ** np.arange(n))
            for code in np.unique(codes):
                members = idx[codes == code]
                past = list(actions[members[0], :n])
                past_rew = [float(rewards[a]) for a in past]
                dist = mixture_dist(inst, prompt_index,
                                    builder.select(past, past_rew))
                c = np.cumsum(dist.probs)
                draws = np.searchsorted(c, rng.random(members.size) * c[-1],
                                        side="right")
                for a in range(n_act):
                    out[a] += np.count_nonzero(draws == a)
    else:
        rew_mat = rewards[actions]
        best_step = np.argmax(rew_mat, axis=1)
        chosen = actions[np.arange(trials), best_step]
        out = np.bincount(chosen, minlength=n_act).astype(float)
    return out / trials


def _random_prompt(rng: np.random.Generator, n_actions: int, n_refs: int,
                   pid: str) -> PromptSpec:
    """One random prompt with a planted task structure.

    The best action pays 1; with high probability one distractor pays a
    mid-range reward (so reaching only the distractor still leaves real
    regret) and everything else pays little.  One reference policy
    concentrates on the rewarding actions, the others avoid them, which
    gives filtered histories something to reveal.
    """
    rewards = rng.uniform(-1.0, 0.2, size=n_actions)
    best = int(rng.integers(n_actions))
    if n_actions > 1 and rng.random() < 0.7:
        other = int(rng.choice([a for a in range(n_actions) if a != best]))
        rewards[other] = rng.uniform(0.4, 0.75)
    rewards[best] = 1.0
    tau_star = int(rng.integers(n_refs))
    high = rewards >= 0.4
    refs = []
    for tau in range(n_refs):
        alpha = np.where(high, 8.0, 0.4) if tau == tau_star else \
            np.where(high, 0.05, 4.0)
        probs = rng.dirichlet(alpha)
        probs = np.maximum(probs, 1e-6)
        refs.append(CategoricalDist(probs / probs.sum()))
    return PromptSpec(pid, rewards, refs)


def generate_instance(cfg: GeneratorConfig) -> Instance:
    """Rejection-sample random worlds until one certifies into the targets.

    Certification is post-hoc through the theory module: the accepted
    instance's measured margin, prior mass on the best reference policy,
    coverage, and budget regime all fall inside the configured ranges.
    The achieved values are recorded in the instance metadata.
    """
    for attempt in range(cfg.max_attempts):
        rng = child_stream(cfg.seed, attempt)
        prompts = [_random_prompt(rng, cfg.n_actions, cfg.n_refs, f"x{i}")
                   for i in range(cfg.n_prompts)]
        if cfg.n_refs == 1:
            prior = CategoricalDist([1.0])
        else:
            lo, hi = cfg.p_ref_range
            p_star = rng.uniform(max(lo, 1e-3), min(hi, 1 - 1e-3))
            rest = rng.dirichlet(np.ones(cfg.n_refs - 1)) * (1 - p_star)
            probs = np.empty(cfg.n_refs)
            # the generator pins tau* = the prior slot matching prompt 0
            tau_star = theory.find_tau_star(
                Instance([f"a{i}" for i in range(cfg.n_actions)], prompts,
                         CategoricalDist.uniform(cfg.n_refs)), 0)
            probs[tau_star] = p_star
            probs[[t for t in range(cfg.n_refs) if t != tau_star]] = rest
            prior = CategoricalDist(probs / probs.sum())
        inst = Instance([f"a{i}" for i in range(cfg.n_actions)], prompts, prior)
        if validate_instance(inst):
            continue
        ok = True
        meta = {"generator_seed": cfg.seed, "attempt": attempt, "prompts": {}}
        for pi in range(cfg.n_prompts):
            margin = theory.margin_report(inst, pi)
            if not margin.holds:
                ok = False
                break
            if not (cfg.delta_range[0] <= margin.delta <= cfg.delta_range[1]):
                ok = False
                break
            p_star = inst.ref_prior[margin.tau_star]
            if not (cfg.p_ref_range[0] <= p_star <= cfg.p_ref_range[1]):
                ok = False
                break
            if cfg.eps >= 1.0 - margin.gamma_star:
                ok = False
                break
            report = theory.budget_report(inst, pi, cfg.eps, margin)
            cov = coverage(inst.prompts[pi].comparator, mixture_dist(inst, pi, []))
            if not (cfg.coverage_range[0] <= cov <= cfg.coverage_range[1]):
                ok = False
                break
            if cfg.regime is not None and report.regime != cfg.regime:
                ok = False
                break
            meta["prompts"][inst.prompts[pi].id] = {
                "delta": margin.delta, "gamma_star": margin.gamma_star,
                "tau_star": margin.tau_star, "p_ref_star": p_star,
                "regime": report.regime, "coverage_llm": cov,
                "m_eps_llm": report.m_eps_llm, "n_bar": report.n_bar,
            }
        if ok:
            return replace(inst, metadata=meta)
    raise GenerationExhausted(
        f"no certified instance in {cfg.max_attempts} attempts")
