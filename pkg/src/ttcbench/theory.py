"""Theorem-level machinery: assumption checks, margins, budget formulas,
adversarial rewards, and numeric bound evaluators.

All bound evaluators work against the prompt's comparator policy and use the
exact breakpoint solver for rejection thresholds, so no tolerance leaks into
the inequalities being checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import AlgorithmSpec, HistoryBuilder
from .divergences import coverage, e_m_divergence, m_epsilon, tv_distance
from .errors import PreconditionFailed, TooLarge
from .model import (
    CategoricalDist,
    Instance,
    mixture_dist,
    sample_action,
)
from .rng import child_stream

INF = math.inf


@dataclass(frozen=True)
class AssumptionReport:
    prompt_id: str
    unique_argmax: bool
    max_reward_is_one: bool
    realizable: bool = True  # the simulator IS the infinite-data limit object
    messages: tuple[str, ...] = ()

    @property
    def all_pass(self) -> bool:
        return self.unique_argmax and self.max_reward_is_one


@dataclass(frozen=True)
class MarginReport:
    """Reward-threshold margin structure of one prompt.

    ``delta`` is the smallest log-likelihood gap of the best reference policy
    over its competitors across all actions with reward >= gamma_star;
    ``holds`` iff that gap is strictly positive.
    """

    tau_star: int
    gamma_star: float | None
    delta: float | None
    p_llm_above: float
    holds: bool


@dataclass(frozen=True)
class BudgetReport:
    m_burnin: float
    n_bar: float
    m_eps_llm: float
    m_eps_tau_star: float
    n_predicted: float
    regime: str  # "Easy" | "Hard"
    kappa_combo: float
    d_factor: float


def check_assumptions(inst: Instance) -> list[AssumptionReport]:
    """Per-prompt report on the reward-structure assumption."""
    out = []
    for p in inst.prompts:
        rmax = float(p.rewards.max())
        unique = int(np.sum(p.rewards == rmax)) == 1
        is_one = abs(rmax - 1.0) <= 1e-12
        msgs = []
        if not unique:
            msgs.append("argmax not unique")
        if not is_one:
            msgs.append("max reward != 1")
        out.append(AssumptionReport(p.id, unique, is_one, True, tuple(msgs)))
    return out


def find_tau_star(inst: Instance, prompt_index: int) -> int:
    """Smallest reference index maximizing the best action's probability."""
    p = inst.prompts[prompt_index]
    probs_at_star = p.ref_matrix()[:, p.best_action_index]
    return int(np.argmax(probs_at_star))


def _per_action_margins(inst: Instance, prompt_index: int, tau_star: int) -> np.ndarray:
    """log pi^{tau*}(a) - max_{tau != tau*} log pi^tau(a), per action."""
    mat = inst.prompts[prompt_index].ref_matrix()
    n_refs, n_act = mat.shape
    with np.errstate(divide="ignore"):
        logs = np.log(mat)
    own = logs[tau_star]
    if n_refs == 1:
        margins = np.full(n_act, INF)
    else:
        others = np.delete(logs, tau_star, axis=0).max(axis=0)
        margins = np.where(
            np.isneginf(own), -INF,
            np.where(np.isneginf(others), INF, own - others))
    return margins


def margin_report(inst: Instance, prompt_index: int,
                  gamma: float | None = None) -> MarginReport:
    """Margin structure at an explicit threshold, or at the auto-selected one.

    Auto mode scans the distinct reward values in descending order of the
    qualifying-set size and returns the smallest threshold < 1 whose
    qualifying set keeps a strictly positive margin.
    """
    prompt = inst.prompts[prompt_index]
    tau_star = find_tau_star(inst, prompt_index)
    margins = _per_action_margins(inst, prompt_index, tau_star)
    rewards = prompt.rewards

    def delta_at(threshold: float) -> float:
        mask = rewards >= threshold
        return float(margins[mask].min()) if mask.any() else INF

    def p_above(threshold: float) -> float:
        dist = mixture_dist(inst, prompt_index, [])
        return float(dist.probs[rewards >= threshold].sum())

    if gamma is not None:
        delta = delta_at(gamma)
        return MarginReport(tau_star, gamma, delta, p_above(gamma), delta > 0)

    values = sorted(set(float(r) for r in rewards), reverse=True)
    best = None
    for v in values:
        if delta_at(v) > 0:
            best = v
        else:
            break  # qualifying sets only grow; margin positivity is monotone
    if best is None:
        return MarginReport(tau_star, None, None, 0.0, False)
    if best >= 1.0:
        # Only the top singleton qualifies; pick a representative threshold
        # strictly below 1 that keeps the same qualifying set.
        second = values[1] if len(values) > 1 else -1.0
        best = (1.0 + second) / 2.0
    delta = delta_at(best)
    return MarginReport(tau_star, best, delta, p_above(best), True)


def budget_report(inst: Instance, prompt_index: int, eps: float,
                  margin: MarginReport | None = None) -> BudgetReport:
    """Burn-in / budget predictions for the reward-filtered sampler."""
    if margin is None:
        margin = margin_report(inst, prompt_index)
    if not margin.holds:
        raise PreconditionFailed("margin assumption does not hold")
    if eps >= 1.0 - margin.gamma_star:
        raise PreconditionFailed(
            f"eps={eps} must be < 1 - gamma_star = {1.0 - margin.gamma_star}")
    prompt = inst.prompts[prompt_index]
    p_star = inst.ref_prior[margin.tau_star]
    delta = margin.delta
    if math.isinf(delta):
        m_burnin = 0.0
        e_neg_delta = 0.0
    else:
        m_burnin = max(0.0, math.log(1.0 / (eps * p_star)) / delta)
        e_neg_delta = math.exp(-delta)
    n_bar = m_burnin / margin.p_llm_above if margin.p_llm_above > 0 else (
        0.0 if m_burnin == 0.0 else INF)
    comparator = prompt.comparator
    llm0 = mixture_dist(inst, prompt_index, [])
    tau_dist = prompt.ref_policies[margin.tau_star]
    m_llm = m_epsilon(comparator, llm0, eps)
    m_tau = m_epsilon(comparator, tau_dist, eps)
    polylog = math.log(1.0 / eps) if eps < 1 else 1.0
    if m_llm <= n_bar or m_llm <= m_tau:
        regime = "Easy"
        n_pred = polylog * m_llm
    else:
        regime = "Hard"
        if math.isinf(m_llm):
            n_pred = INF
        else:
            n_pred = polylog * (m_tau + math.sqrt(n_bar * (m_llm - m_tau)))
    kappa = p_star + (1.0 - p_star) * e_neg_delta
    d_factor = 1.0 + (e_neg_delta / p_star if p_star > 0 else INF)
    return BudgetReport(m_burnin, n_bar, m_llm, m_tau, n_pred, regime,
                        kappa, d_factor)


def adversarial_reward(inst: Instance, prompt_index: int,
                       alg_dist: CategoricalDist) -> np.ndarray:
    """Worst-case reward table: +1 where the comparator dominates, else -1.

    Under this table the expected regret of ``alg_dist`` equals the unhalved
    total variation to the comparator, exactly.
    """
    comparator = inst.prompts[prompt_index].comparator
    return np.where(comparator.probs >= alg_dist.probs, 1.0, -1.0)


def regret_under_table(reward_table: np.ndarray, comparator: CategoricalDist,
                       alg_dist: CategoricalDist) -> float:
    """E_{comparator}[r] - E_{alg}[r] for an arbitrary reward table.

    Computed as one elementwise product and one pairwise sum so that the
    regret = TV identity under the adversarial table is bit-exact.
    """
    return float(np.sum(reward_table * (comparator.probs - alg_dist.probs)))


def seqbon_regret_bound(inst: Instance, prompt_index: int, spec: AlgorithmSpec,
                        n: int, eps: float, trials: int,
                        base_seed: int = 0) -> float:
    """Monte Carlo estimate of the history-dependent regret bound:
    eps + E[exp(-n^2 / sum_i M_i)] with each M_i solved exactly per step.

    Returns inf if every trial hits an infinite per-step threshold.
    """
    prompt = inst.prompts[prompt_index]
    comparator = prompt.comparator
    rewards = prompt.rewards
    builder = spec.builder
    terms = np.empty(trials)
    any_finite = False
    for t in range(trials):
        rng = child_stream(base_seed, t)
        past_idx: list[int] = []
        past_rew: list[float] = []
        m_sum = 0.0
        for _ in range(n):
            dist = mixture_dist(inst, prompt_index,
                                builder.select(past_idx, past_rew))
            m_sum += m_epsilon(comparator, dist, eps)
            a = sample_action(dist, rng)
            past_idx.append(a)
            past_rew.append(float(rewards[a]))
        if math.isinf(m_sum):
            terms[t] = 1.0
        else:
            any_finite = True
            terms[t] = math.exp(-(n * n) / m_sum)
    if not any_finite:
        return INF
    return eps + float(terms.mean())


@dataclass(frozen=True)
class RejectionBoundResult:
    exact_tv: float
    bound: float
    bound_with_proof_factor: float
    alphas: tuple[float, ...]      # alpha_1..alpha_{n+1}
    e_means: tuple[float, ...]     # E[E_i] for i = 1..n


def rejection_tv_bound(inst: Instance, prompt_index: int,
                       builder: HistoryBuilder, n: int, eps: float,
                       path_cap: int = 10**6,
                       check: bool = True) -> RejectionBoundResult:
    """Exact output law of the adaptive rejection sampler and both sides of
    its total-variation guarantee, computed on the same enumeration tree.

    ``bound`` is sum_i alpha_i E[E_i] + 2 alpha_{n+1};
    ``bound_with_proof_factor`` doubles the per-step term, which is what the
    telescoping argument actually delivers.
    """
    n_act = inst.n_actions
    if n_act ** (n + 1) > path_cap:
        raise TooLarge(f"{n_act}^{n + 1} paths exceed cap {path_cap}")
    prompt = inst.prompts[prompt_index]
    comparator = prompt.comparator
    rewards = prompt.rewards
    out = np.zeros(n_act)
    alphas = np.zeros(n + 1)
    e_sums = np.zeros(n)

    def rec(past_idx, past_rew, p_uncond, p_noacc):
        i = len(past_idx)
        dist = mixture_dist(inst, prompt_index,
                            builder.select(past_idx, past_rew))
        if i == n:
            alphas[n] += p_noacc
            out[:] += p_noacc * dist.probs
            return
        m_i = m_epsilon(comparator, dist, eps)
        e_sums[i] += p_uncond * (
            e_m_divergence(comparator, dist, m_i) if math.isfinite(m_i)
            else float(comparator.probs[dist.probs == 0].sum()))
        for a in range(n_act):
            pa = dist[a]
            if pa == 0:
                continue
            if math.isfinite(m_i):
                q = min(comparator[a] / (m_i * pa), 1.0)
            else:
                q = 0.0
            alphas[i] += p_noacc * pa * q
            out[a] += p_noacc * pa * q
            past_idx.append(a)
            past_rew.append(float(rewards[a]))
            rec(past_idx, past_rew, p_uncond * pa, p_noacc * pa * (1.0 - q))
            past_idx.pop()
            past_rew.pop()

    rec([], [], 1.0, 1.0)
    pi_r = CategoricalDist(out / out.sum())
    exact_tv = tv_distance(comparator, pi_r)
    per_step = float(np.dot(alphas[:n], e_sums))
    bound = per_step + 2.0 * float(alphas[n])
    bound2 = 2.0 * per_step + 2.0 * float(alphas[n])
    if check and not exact_tv <= bound + 1e-10:
        raise AssertionError(
            f"rejection TV bound violated: tv={exact_tv} > bound={bound}")
    return RejectionBoundResult(exact_tv, bound, bound2,
                                tuple(alphas), tuple(e_sums))


def contraction_check(inst: Instance, prompt_index: int, gamma: float,
                      tol: float = 1e-9):
    """Coverage contraction: C(pi*, pi^{tau*}) <= kappa * C(pi*, pi_LLM)."""
    prompt = inst.prompts[prompt_index]
    margin = margin_report(inst, prompt_index, gamma)
    if not margin.holds:
        raise PreconditionFailed(f"margin does not hold at gamma={gamma}")
    support = prompt.comparator.probs > 0
    if np.any(prompt.rewards[support] < gamma):
        raise PreconditionFailed("comparator support leaks below gamma")
    p_star = inst.ref_prior[margin.tau_star]
    e_neg = 0.0 if math.isinf(margin.delta) else math.exp(-margin.delta)
    kappa = p_star + (1.0 - p_star) * e_neg
    lhs = coverage(prompt.comparator, prompt.ref_policies[margin.tau_star])
    cov_llm = coverage(prompt.comparator, mixture_dist(inst, prompt_index, []))
    rhs = kappa * cov_llm
    holds = (lhs <= rhs * (1.0 + tol) + tol) if math.isfinite(rhs) else True
    return lhs, kappa, holds


def lemma_posterior_bound(k: int, delta: float, p_ref_star: float) -> float:
    """Closed-form lower bound on the posterior weight of the best reference
    policy after k margin-qualifying actions: 1 / (1 + e^{-k delta} / p)."""
    if k < 0 or delta <= 0 or not (0 < p_ref_star <= 1):
        raise ValueError("need k >= 0, delta > 0, p_ref_star in (0, 1]")
    e_term = 0.0 if math.isinf(delta) else math.exp(-k * delta)
    return 1.0 / (1.0 + e_term / p_ref_star)


@dataclass(frozen=True)
class OrderingResult:
    holds: bool
    strict: bool
    refs_differ_at_best: bool
    m_eps_tau_star: float
    m_eps_llm: float


def ordering_check_m_thresholds(inst: Instance, prompt_index: int,
                                eps: float) -> OrderingResult:
    """Threshold ordering M_{tau*} <= M_LLM for a point-mass comparator."""
    prompt = inst.prompts[prompt_index]
    best = prompt.best_action_index
    if prompt.comparator.probs[best] != 1.0:
        raise PreconditionFailed("comparator must be the point mass on a*")
    tau_star = find_tau_star(inst, prompt_index)
    tau_dist = prompt.ref_policies[tau_star]
    llm0 = mixture_dist(inst, prompt_index, [])
    m_tau = m_epsilon(prompt.comparator, tau_dist, eps)
    m_llm = m_epsilon(prompt.comparator, llm0, eps)
    at_best = inst.prompts[prompt_index].ref_matrix()[:, best]
    differ = bool(np.ptp(at_best) > 0)
    # equality up to rounding counts as holding (mixture renormalization can
    # perturb the last ulp); strictness is only meaningful above the M >= 1
    # clamp, where the thresholds are genuinely reciprocal in the proposal.
    close = (math.isinf(m_tau) and math.isinf(m_llm)) or (
        math.isfinite(m_tau) and math.isfinite(m_llm)
        and math.isclose(m_tau, m_llm, rel_tol=1e-12))
    holds = m_tau <= m_llm or close
    strict = m_tau < m_llm and not close
    return OrderingResult(holds, strict, differ, m_tau, m_llm)
