"""Sampling algorithms: the sequential best-of-n meta-loop, its history
builders, the adaptive rejection sampler, and an exact brute-force oracle.

Every variant is the same loop with a different history rule:

* ``FixedPrompt``        -- vanilla best-of-n, history is always empty.
* ``FullHistory``        -- every past answer, FIFO-truncated to a window.
* ``RewardFiltered``     -- only answers with reward >= gamma enter.
* ``RewardFilteredBurnIn`` -- same filter, but the history stays off until
  m answers have been accepted.
* ``TopK``               -- the k best-rewarded past answers, in generation
  order.

The argmax-reward tie-break is always "earliest draw wins".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .divergences import m_epsilon
from .errors import TooLarge, UnsupportedComparator
from .model import (
    CategoricalDist,
    HistoryState,
    Instance,
    mixture_dist,
    sample_action,
)


@dataclass(frozen=True)
class HistoryBuilder:
    """Base history rule; subclasses override :meth:`select`."""

    window: int | None = None

    def select(self, past_actions: list[int], past_rewards: list[float]) -> list[int]:
        raise NotImplementedError

    def accepts(self, reward_value: float) -> bool:
        """Whether a draw with this reward enters the candidate context pool."""
        return True

    def _truncate(self, selected: list[int]) -> list[int]:
        if self.window is None:
            return selected
        return selected[-self.window:]


@dataclass(frozen=True)
class FixedPrompt(HistoryBuilder):
    def select(self, past_actions, past_rewards):
        return []

    def accepts(self, reward_value):
        return False


@dataclass(frozen=True)
class FullHistory(HistoryBuilder):
    def select(self, past_actions, past_rewards):
        return self._truncate(list(past_actions))


@dataclass(frozen=True)
class RewardFiltered(HistoryBuilder):
    gamma: float = 0.0

    def select(self, past_actions, past_rewards):
        kept = [a for a, r in zip(past_actions, past_rewards) if r >= self.gamma]
        return self._truncate(kept)

    def accepts(self, reward_value):
        return reward_value >= self.gamma


@dataclass(frozen=True)
class RewardFilteredBurnIn(HistoryBuilder):
    gamma: float = 0.0
    m: int = 0

    def select(self, past_actions, past_rewards):
        kept = [a for a, r in zip(past_actions, past_rewards) if r >= self.gamma]
        if len(kept) < self.m:
            return []
        return self._truncate(kept)

    def accepts(self, reward_value):
        return reward_value >= self.gamma


@dataclass(frozen=True)
class TopK(HistoryBuilder):
    k: int = 1

    def __post_init__(self):
        if self.window is not None and self.window < self.k:
            raise ValueError("window must be >= k for TopK")

    def select(self, past_actions, past_rewards):
        if not past_actions:
            return []
        order = sorted(range(len(past_actions)),
                       key=lambda i: (-past_rewards[i], i))[: self.k]
        kept = [past_actions[i] for i in sorted(order)]
        return self._truncate(kept)


@dataclass(frozen=True)
class AlgorithmSpec:
    """Which sampler to run: the seqbon meta-loop or the rejection sampler.

    ``epsilon`` only matters for the rejection sampler, where the per-step
    threshold defaults to the smallest M with overlap divergence <= epsilon
    against the current proposal; ``m_schedule`` overrides it.
    """

    builder: HistoryBuilder
    kind: str = "seqbon"  # "seqbon" | "rejection"
    epsilon: float = 0.1
    m_schedule: tuple[float, ...] | None = None
    label: str = ""

    def step_threshold(self, i: int, comparator: CategoricalDist,
                       proposal: CategoricalDist) -> float:
        if self.m_schedule is not None:
            return float(self.m_schedule[i])
        return m_epsilon(comparator, proposal, self.epsilon)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one run: all draws, the chosen answer, and its regret."""

    actions: tuple[str, ...]
    rewards: tuple[float, ...]
    accepted_flags: tuple[bool, ...]
    chosen: str
    regret: float
    seed: int = 0


def build_history(builder: HistoryBuilder, prompt_index: int,
                  past: list[tuple[str, float]], i: int, *,
                  inst: Instance | None = None) -> HistoryState:
    """History for step ``i`` given the ``i-1`` past (action, reward) pairs.

    Works on action ids; ``inst`` is only needed to map ids for index-based
    builders and may be omitted because builders treat actions opaquely.
    """
    if len(past) != i - 1:
        raise ValueError(f"step {i} needs {i - 1} past entries, got {len(past)}")
    actions = [a for a, _ in past]
    rewards = [r for _, r in past]
    kept = builder.select(actions, rewards)
    return HistoryState(prompt_index, kept)


def run_seqbon(inst: Instance, prompt_index: int, builder: HistoryBuilder,
               n: int, rng: np.random.Generator, seed: int = 0) -> TrialRecord:
    """One trial of the sequential best-of-n meta-loop."""
    prompt = inst.prompts[prompt_index]
    rewards_table = prompt.rewards
    past_idx: list[int] = []
    past_rew: list[float] = []
    flags: list[bool] = []
    for _ in range(n):
        hist = builder.select(past_idx, past_rew)
        dist = mixture_dist(inst, prompt_index, hist)
        a = sample_action(dist, rng)
        r = float(rewards_table[a])
        past_idx.append(a)
        past_rew.append(r)
        flags.append(builder.accepts(r))
    best = int(np.argmax(past_rew))  # argmax returns the earliest maximum
    chosen_idx = past_idx[best]
    base = float(prompt.comparator.probs @ rewards_table)
    regret = base - past_rew[best]
    return TrialRecord(
        actions=tuple(inst.actions[a] for a in past_idx),
        rewards=tuple(past_rew),
        accepted_flags=tuple(flags),
        chosen=inst.actions[chosen_idx],
        regret=regret,
        seed=seed,
    )


def adaptive_rejection_sampling(
    inst: Instance,
    prompt_index: int,
    comparator: CategoricalDist,
    builder: HistoryBuilder,
    n: int,
    m_schedule,
    rng: np.random.Generator,
    epsilon: float = 0.1,
) -> tuple[str, int | None]:
    """Draw up to n+1 candidates, accepting draw i with probability
    min{comparator(a_i) / (M_i * p_i(a_i)), 1}.

    Returns the first accepted action and its 1-based round index, or the
    final fallback draw with ``None``.
    """
    if m_schedule is not None and len(m_schedule) != n:
        raise ValueError("m_schedule must have length n")
    prompt = inst.prompts[prompt_index]
    past_idx: list[int] = []
    past_rew: list[float] = []
    for i in range(n):
        hist = builder.select(past_idx, past_rew)
        dist = mixture_dist(inst, prompt_index, hist)
        bad = (comparator.probs > 0) & (dist.probs == 0)
        if np.any(bad):
            culprit = inst.actions[int(np.argmax(bad))]
            raise UnsupportedComparator(
                f"comparator mass on action {culprit!r} "
                "with zero proposal probability")
        a = sample_action(dist, rng)
        pa = dist[a]
        wa = comparator[a]
        m_i = float(m_schedule[i]) if m_schedule is not None else m_epsilon(
            comparator, dist, epsilon)
        q = min(wa / (m_i * pa), 1.0) if np.isfinite(m_i) else 0.0
        if rng.random() < q:
            return inst.actions[a], i + 1
        past_idx.append(a)
        past_rew.append(float(prompt.rewards[a]))
    hist = builder.select(past_idx, past_rew)
    dist = mixture_dist(inst, prompt_index, hist)
    a = sample_action(dist, rng)
    return inst.actions[a], None


DEFAULT_PATH_CAP = 10**6


def exact_output_dist(inst: Instance, prompt_index: int, spec: AlgorithmSpec,
                      n: int, path_cap: int = DEFAULT_PATH_CAP) -> CategoricalDist:
    """Exact distribution of the returned answer by full path enumeration.

    Walks every action sequence, weighting by its probability under the
    history-dependent mixture, and applies the argmax (or acceptance) rule
    analytically at each node.
    """
    n_act = inst.n_actions
    depth = n + 1 if spec.kind == "rejection" else n
    if n_act ** depth > path_cap:
        raise TooLarge(f"{n_act}^{depth} paths exceed cap {path_cap}")
    prompt = inst.prompts[prompt_index]
    rewards = prompt.rewards
    comparator = prompt.comparator
    out = np.zeros(n_act)
    builder = spec.builder

    if spec.kind == "seqbon":
        def rec(past_idx, past_rew, prob):
            if len(past_idx) == n:
                best = int(np.argmax(past_rew))
                out[past_idx[best]] += prob
                return
            dist = mixture_dist(inst, prompt_index,
                                builder.select(past_idx, past_rew))
            for a in range(n_act):
                pa = dist[a]
                if pa == 0:
                    continue
                past_idx.append(a)
                past_rew.append(float(rewards[a]))
                rec(past_idx, past_rew, prob * pa)
                past_idx.pop()
                past_rew.pop()

        rec([], [], 1.0)
    elif spec.kind == "rejection":
        def rec(past_idx, past_rew, prob):
            i = len(past_idx)
            dist = mixture_dist(inst, prompt_index,
                                builder.select(past_idx, past_rew))
            if i == n:
                out[:] += prob * dist.probs
                return
            m_i = spec.step_threshold(i, comparator, dist)
            for a in range(n_act):
                pa = dist[a]
                if pa == 0:
                    continue
                if np.isfinite(m_i):
                    q = min(comparator[a] / (m_i * pa), 1.0)
                else:
                    q = 0.0
                out[a] += prob * pa * q
                if q < 1.0:
                    past_idx.append(a)
                    past_rew.append(float(rewards[a]))
                    rec(past_idx, past_rew, prob * pa * (1.0 - q))
                    past_idx.pop()
                    past_rew.pop()

        rec([], [], 1.0)
    else:
        raise ValueError(f"unknown algorithm kind {spec.kind!r}")
    return CategoricalDist(out / out.sum())
