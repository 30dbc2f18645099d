"""Exact mixture-of-reference-policies world model.

An :class:`Instance` is a finite synthetic world: a prompt set, a shared
action set, a reward table per prompt, and a finite family of categorical
reference policies with a prior over them.  The language-model policy is the
exact Bayes-posterior mixture of the reference policies given the actions
currently sitting in the context window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHistory, UnknownAction

SUM_TOL = 1e-12


@dataclass(frozen=True)
class CategoricalDist:
    """Probability vector over the action set (or over reference indices).

    Construction never raises on malformed vectors; structural problems are
    surfaced by :meth:`violations` so that invalid instances stay
    representable for validation.
    """

    probs: np.ndarray

    def __init__(self, probs) -> None:
        arr = np.asarray(probs, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])

    def violations(self) -> list[str]:
        out = []
        if self.probs.ndim != 1 or len(self) == 0:
            out.append("not a nonempty vector")
            return out
        if np.any(self.probs < 0):
            out.append("negative entry")
        if abs(float(self.probs.sum()) - 1.0) > SUM_TOL:
            out.append("not normalized")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def normalized(self) -> "CategoricalDist":
        return CategoricalDist(self.probs / self.probs.sum())

    @classmethod
    def point_mass(cls, index: int, size: int) -> "CategoricalDist":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, size: int) -> "CategoricalDist":
        return cls(np.full(size, 1.0 / size))

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoricalDist) and np.array_equal(
            self.probs, other.probs
        )


@dataclass(frozen=True)
class PromptSpec:
    """One prompt: reward table, per-reference answer policies, comparator.

    ``comparator`` defaults to the point mass on the argmax-reward action.
    """

    id: str
    rewards: np.ndarray
    ref_policies: tuple[CategoricalDist, ...]
    comparator: CategoricalDist = None

    def __init__(self, id, rewards, ref_policies, comparator=None) -> None:
        rew = np.asarray(rewards, dtype=np.float64)
        rew.setflags(write=False)
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "rewards", rew)
        object.__setattr__(self, "ref_policies", tuple(ref_policies))
        if comparator is None and rew.size:
            comparator = CategoricalDist.point_mass(int(np.argmax(rew)), rew.size)
        object.__setattr__(self, "comparator", comparator)

    def __eq__(self, other) -> bool:
        return (isinstance(other, PromptSpec)
                and self.id == other.id
                and np.array_equal(self.rewards, other.rewards)
                and self.ref_policies == other.ref_policies
                and self.comparator == other.comparator)

    @property
    def best_action_index(self) -> int:
        return int(np.argmax(self.rewards))

    def ref_matrix(self) -> np.ndarray:
        """(n_refs, n_actions) matrix of reference policy probabilities."""
        return np.stack([rp.probs for rp in self.ref_policies])


@dataclass(frozen=True)
class Instance:
    """The whole synthetic world: actions, prompts, reference prior."""

    actions: tuple[str, ...]
    prompts: tuple[PromptSpec, ...]
    ref_prior: CategoricalDist
    prompt_prior: CategoricalDist = None
    metadata: dict = field(default_factory=dict)

    def __init__(self, actions, prompts, ref_prior, prompt_prior=None, metadata=None):
        object.__setattr__(self, "actions", tuple(actions))
        object.__setattr__(self, "prompts", tuple(prompts))
        object.__setattr__(self, "ref_prior", ref_prior)
        if prompt_prior is None and prompts:
            prompt_prior = CategoricalDist.uniform(len(prompts))
        object.__setattr__(self, "prompt_prior", prompt_prior)
        object.__setattr__(self, "metadata", dict(metadata or {}))

    def __eq__(self, other) -> bool:
        return (isinstance(other, Instance)
                and self.actions == other.actions
                and self.prompts == other.prompts
                and self.ref_prior == other.ref_prior
                and self.prompt_prior == other.prompt_prior
                and self.metadata == other.metadata)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_refs(self) -> int:
        return len(self.ref_prior)

    def action_index(self, action_id: str) -> int:
        try:
            return self.actions.index(action_id)
        except ValueError:
            raise UnknownAction(f"unknown action id {action_id!r}") from None


@dataclass(frozen=True)
class HistoryState:
    """Prompt plus the ordered actions currently in the context window."""

    prompt_index: int
    accepted: tuple[str, ...] = ()

    def __init__(self, prompt_index: int, accepted=()) -> None:
        object.__setattr__(self, "prompt_index", int(prompt_index))
        object.__setattr__(self, "accepted", tuple(accepted))


@dataclass(frozen=True)
class PosteriorWeights:
    """Posterior over reference indices, kept in log space."""

    log_weights: np.ndarray
    weights: CategoricalDist


def validate_instance(inst: Instance) -> list[str]:
    """Return every violated structural invariant; empty list iff valid."""
    out: list[str] = []
    if inst.n_actions < 1:
        out.append("instance has no actions")
    if len(inst.prompts) < 1:
        out.append("instance has no prompts")
    if inst.n_refs < 1:
        out.append("instance has no reference policies")
    if len(set(inst.actions)) != inst.n_actions:
        out.append("duplicate action ids")
    for v in inst.ref_prior.violations():
        out.append(f"ref_prior {v}")
    if inst.prompt_prior is not None:
        if len(inst.prompt_prior) != len(inst.prompts):
            out.append("prompt_prior length mismatch")
        for v in inst.prompt_prior.violations():
            out.append(f"prompt_prior {v}")
    for p in inst.prompts:
        if p.rewards.shape != (inst.n_actions,):
            out.append(f"reward table at {p.id} has wrong length")
            continue
        if np.any(p.rewards < -1) or np.any(p.rewards > 1):
            out.append(f"reward outside [-1,1] at prompt {p.id}")
        rmax = float(p.rewards.max())
        if abs(rmax - 1.0) > SUM_TOL:
            out.append(f"max reward != 1 at prompt {p.id}")
        if int(np.sum(p.rewards == rmax)) != 1:
            out.append(f"non-unique argmax reward at prompt {p.id}")
        if len(p.ref_policies) != inst.n_refs:
            out.append(f"prompt {p.id} has {len(p.ref_policies)} ref policies, "
                       f"expected {inst.n_refs}")
        for j, rp in enumerate(p.ref_policies):
            if len(rp) != inst.n_actions:
                out.append(f"ref policy {j} at {p.id} has wrong length")
                continue
            for v in rp.violations():
                out.append(f"ref policy {j} at {p.id} {v}")
        if p.comparator is None or len(p.comparator) != inst.n_actions:
            out.append(f"comparator at {p.id} has wrong length")
        else:
            for v in p.comparator.violations():
                out.append(f"comparator at {p.id} {v}")
    return out


def posterior_log_weights(inst: Instance, prompt_index: int,
                          accepted_indices) -> np.ndarray:
    """Unnormalized log posterior over reference indices.

    log p_ref(tau) + sum_i log pi_ref^tau(a_i | x); -inf entries are fine as
    long as at least one component stays finite.
    """
    prompt = inst.prompts[prompt_index]
    with np.errstate(divide="ignore"):
        lw = np.log(inst.ref_prior.probs)
        if len(accepted_indices):
            mat = prompt.ref_matrix()  # (T, A)
            idx = np.asarray(accepted_indices, dtype=np.intp)
            lw = lw + np.log(mat[:, idx]).sum(axis=1)
    return lw


def _normalize_log_weights(log_w: np.ndarray) -> PosteriorWeights:
    m = np.max(log_w)
    if not np.isfinite(m):
        raise DegenerateHistory(
            "every reference policy assigns probability 0 to the history")
    w = np.exp(log_w - m)
    w /= w.sum()
    return PosteriorWeights(log_weights=log_w, weights=CategoricalDist(w))


def posterior_weights(inst: Instance, h: HistoryState) -> PosteriorWeights:
    """Exact Bayes posterior over reference indices given the history."""
    idx = [inst.action_index(a) for a in h.accepted]
    return _normalize_log_weights(posterior_log_weights(inst, h.prompt_index, idx))


def mixture_dist(inst: Instance, prompt_index: int,
                 accepted_indices) -> CategoricalDist:
    """Posterior-weighted mixture of reference policies (index-based fast path)."""
    pw = _normalize_log_weights(
        posterior_log_weights(inst, prompt_index, accepted_indices))
    mat = inst.prompts[prompt_index].ref_matrix()
    p = pw.weights.probs @ mat
    return CategoricalDist(p / p.sum())


def llm_next_dist(inst: Instance, h: HistoryState) -> CategoricalDist:
    """Next-action distribution of the simulated model given the history."""
    idx = [inst.action_index(a) for a in h.accepted]
    return mixture_dist(inst, h.prompt_index, idx)


def sample_action(dist: CategoricalDist, rng: np.random.Generator) -> int:
    """Draw one action index from ``dist``; deterministic given the stream."""
    c = np.cumsum(dist.probs)
    u = rng.random() * c[-1]
    return int(np.searchsorted(c, u, side="right"))


def reward(inst: Instance, prompt_index: int, action_id: str) -> float:
    """Reward table lookup for an action id."""
    return float(inst.prompts[prompt_index].rewards[inst.action_index(action_id)])
