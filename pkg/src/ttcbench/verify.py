"""Programmatic property suites.

Each check returns a list of human-readable violation strings (empty means
pass).  The same checks back both ``ttcbench verify`` and the pytest suite,
so a red check in CI and a nonzero exit from the CLI mean the same thing.
"""

from __future__ import annotations

import math

import numpy as np

from .algorithms import (
    AlgorithmSpec,
    FixedPrompt,
    FullHistory,
    RewardFiltered,
    RewardFilteredBurnIn,
    TopK,
    exact_output_dist,
)
from .divergences import (
    coverage,
    e_m_divergence,
    m_epsilon,
    tv_distance,
)
from .errors import PreconditionFailed
from .harness import empirical_output_dist, run_trials
from .model import (
    CategoricalDist,
    HistoryState,
    Instance,
    PromptSpec,
    mixture_dist,
    posterior_weights,
)
from .rng import child_stream, mix
from . import theory

_CHAIN_TOL = 1e-12


def canonical_two_ref() -> Instance:
    """The two-reference hand example used throughout the worked checks."""
    refs = [CategoricalDist([0.8, 0.2]), CategoricalDist([0.2, 0.8])]
    prompt = PromptSpec("x0", [1.0, 0.0], refs)
    return Instance(["a0", "a1"], [prompt], CategoricalDist([0.5, 0.5]))


def random_instance(rng: np.random.Generator, n_actions: int | None = None,
                    n_refs: int | None = None,
                    allow_zeros: bool = False) -> Instance:
    """Uncertified random world for property checks (valid by construction)."""
    if n_actions is None:
        n_actions = int(rng.integers(2, 5))
    if n_refs is None:
        n_refs = int(rng.integers(1, 5))
    rewards = rng.uniform(-1.0, 0.999, size=n_actions)
    rewards[int(rng.integers(n_actions))] = 1.0
    refs = []
    for _ in range(n_refs):
        p = rng.dirichlet(np.full(n_actions, 0.8))
        if allow_zeros and n_actions > 2 and rng.random() < 0.3:
            p[int(rng.integers(n_actions))] = 0.0
        if p.sum() == 0:
            p = np.full(n_actions, 1.0)
        refs.append(CategoricalDist(p / p.sum()))
    prior = CategoricalDist(rng.dirichlet(np.ones(n_refs)))
    prompt = PromptSpec("x0", rewards, refs)
    return Instance([f"a{i}" for i in range(n_actions)], [prompt], prior)


def random_dist(rng: np.random.Generator, size: int,
                allow_zeros: bool = True) -> CategoricalDist:
    p = rng.dirichlet(np.full(size, 0.7))
    if allow_zeros and size > 1 and rng.random() < 0.4:
        kill = rng.random(size) < 0.3
        if not kill.all():
            p = np.where(kill, 0.0, p)
    return CategoricalDist(p / p.sum())


def _sample_history(rng: np.random.Generator, inst: Instance,
                    max_len: int) -> list[int]:
    """Random history with positive probability under at least one reference."""
    mat = inst.prompts[0].ref_matrix()
    support = np.nonzero(mat.max(axis=0) > 0)[0]
    k = int(rng.integers(0, max_len + 1))
    return [int(a) for a in rng.choice(support, size=k)]


# ---------------------------------------------------------------------------
# check functions


def check_posterior(n_instances: int = 1000, max_hist: int = 50,
                    seed: int = 101) -> list[str]:
    """Bayes-posterior identities: empty history, order invariance,
    incremental-vs-batch agreement, convex-hull bounds, single-reference
    degeneracy."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, allow_zeros=True)
        hist = _sample_history(rng, inst, max_hist)

        w0 = posterior_weights(inst, HistoryState(0)).weights.probs
        if not np.allclose(w0, inst.ref_prior.probs, atol=_CHAIN_TOL, rtol=0):
            fails.append(f"[{k}] empty history posterior != prior")

        try:
            batch = mixture_dist(inst, 0, hist).probs
        except Exception:
            continue  # zero-probability history; nothing to compare
        perm = list(hist)
        rng.shuffle(perm)
        shuffled = mixture_dist(inst, 0, perm).probs
        if not np.allclose(batch, shuffled, atol=_CHAIN_TOL, rtol=0):
            fails.append(f"[{k}] posterior depends on history order")

        # incremental updates must agree with the batch computation
        lw = np.log(inst.ref_prior.probs, where=inst.ref_prior.probs > 0,
                    out=np.full(inst.n_refs, -np.inf))
        mat = inst.prompts[0].ref_matrix()
        with np.errstate(divide="ignore"):
            logmat = np.log(mat)
        for a in hist:
            lw = lw + logmat[:, a]
        m = lw.max()
        w_inc = np.exp(lw - m)
        w_inc /= w_inc.sum()
        mix_inc = w_inc @ mat
        mix_inc /= mix_inc.sum()
        if np.max(np.abs(mix_inc - batch)) > _CHAIN_TOL:
            fails.append(f"[{k}] incremental/batch posterior mismatch")

        lo = mat.min(axis=0) - _CHAIN_TOL
        hi = mat.max(axis=0) + _CHAIN_TOL
        if np.any(batch < lo) or np.any(batch > hi):
            fails.append(f"[{k}] mixture leaves the reference convex hull")

        if inst.n_refs == 1 and not np.allclose(batch, mat[0],
                                                atol=_CHAIN_TOL, rtol=0):
            fails.append(f"[{k}] single-reference mixture drifted")
    return fails


def check_divergences(n_pairs: int = 1000, seed: int = 202) -> list[str]:
    """E_M shape (monotone, convex), exact threshold minimality, coverage
    bound on the threshold, and the deterministic-comparator closed form."""
    fails: list[str] = []
    for k in range(n_pairs):
        rng = child_stream(seed, k)
        size = int(rng.integers(2, 7))
        p1 = random_dist(rng, size)
        p2 = random_dist(rng, size)
        ms = np.sort(rng.uniform(1.0, 20.0, size=3))
        es = [e_m_divergence(p1, p2, float(m)) for m in ms]
        if not (es[0] >= es[1] - 1e-15 and es[1] >= es[2] - 1e-15):
            fails.append(f"[{k}] E_M not nonincreasing in M")
        lam = rng.random()
        m_mid = lam * ms[0] + (1 - lam) * ms[2]
        e_mid = e_m_divergence(p1, p2, float(m_mid))
        chord = lam * es[0] + (1 - lam) * es[2]
        if e_mid > chord + 1e-12:
            fails.append(f"[{k}] E_M not convex in M")
        if not 0.0 <= es[0] <= e_m_divergence(p1, p2, 1.0) <= 1.0 + 1e-15:
            fails.append(f"[{k}] E_M outside [0, E_1] or E_1 > 1")

        eps = float(rng.uniform(0.01, 0.5))
        m_star = m_epsilon(p1, p2, eps)
        unsupported = float(p1.probs[p2.probs == 0].sum())
        if math.isinf(m_star):
            if unsupported <= eps:
                fails.append(f"[{k}] infinite threshold with reachable eps")
            continue
        if e_m_divergence(p1, p2, m_star) > eps + 1e-12:
            fails.append(f"[{k}] m_epsilon does not satisfy its own eps")
        if m_star > 1.0 and e_m_divergence(p1, p2, m_star * (1 - 1e-9)) \
                <= eps - 1e-12:
            fails.append(f"[{k}] m_epsilon not minimal")
        cov = coverage(p1, p2)
        if math.isfinite(cov) and m_star > cov / eps + 1e-9:
            fails.append(f"[{k}] threshold exceeds coverage/eps")

        # deterministic comparator: threshold is (1 - eps) / proposal(a)
        a = int(np.argmax(p2.probs))
        point = CategoricalDist.point_mass(a, size)
        want = max(1.0, (1.0 - eps) / p2[a])
        got = m_epsilon(point, p2, eps)
        if abs(got - want) > 1e-9 * want:
            fails.append(f"[{k}] point-mass closed form: {got} != {want}")

        if not 0.0 <= tv_distance(p1, p2) <= 2.0 + 1e-15:
            fails.append(f"[{k}] tv outside [0, 2]")
    return fails


def check_bon_equivalence(n_instances: int = 50, seed: int = 303) -> list[str]:
    """A reward filter above the maximum reward never admits anything, so the
    filtered sampler's exact output law must equal plain best-of-n."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_actions=3, n_refs=2)
        n = int(rng.integers(1, 4))
        base = exact_output_dist(inst, 0, AlgorithmSpec(FixedPrompt()), n)
        filt = exact_output_dist(
            inst, 0, AlgorithmSpec(RewardFiltered(gamma=1.5)), n)
        if np.max(np.abs(base.probs - filt.probs)) > 1e-14:
            fails.append(f"[{k}] gamma > max reward is not plain best-of-n")
    return fails


def check_classic_rejection(n_small: int = 25, seed: int = 404) -> list[str]:
    """Fixed-proposal rejection: closed-form output law against the path
    enumeration at small n, and the (1 - 1/M)^n total-variation decay at
    n = 200."""
    fails: list[str] = []
    for k in range(n_small):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_actions=3, n_refs=2)
        prompt = inst.prompts[0]
        comp = prompt.comparator
        p = mixture_dist(inst, 0, [])
        if np.any(p.probs <= 0):
            continue
        m_val = float(np.max(comp.probs / p.probs)) * (1 + rng.random())

        def closed_form(n: int) -> np.ndarray:
            accept = np.minimum(comp.probs / (m_val * p.probs), 1.0)
            step = p.probs * accept  # law of (draw, accepted) per round
            miss = 1.0 - step.sum()
            out = np.zeros(inst.n_actions)
            w = 1.0
            for _ in range(n):
                out += w * step
                w *= miss
            return out + w * p.probs

        n = 3
        exact = exact_output_dist(
            inst, 0, AlgorithmSpec(FixedPrompt(), kind="rejection",
                                   m_schedule=(m_val,) * n), n)
        if np.max(np.abs(exact.probs - closed_form(n))) > 1e-12:
            fails.append(f"[{k}] enumeration != closed form at n={n}")

        # M >= the max ratio makes each accepted draw exactly comparator-law
        n_big = 200
        out = closed_form(n_big)
        tv = float(np.abs(comp.probs - out).sum())
        bound = 2.0 * (1.0 - 1.0 / m_val) ** n_big
        if tv > bound + 1e-6:
            fails.append(f"[{k}] classic rejection tv {tv} > {bound}")
    return fails


def check_adversarial_identity(n_pairs: int = 1000,
                               seed: int = 505) -> list[str]:
    """Regret under the adversarial reward table equals the unhalved total
    variation, bit-exactly."""
    fails: list[str] = []
    for k in range(n_pairs):
        rng = child_stream(seed, k)
        inst = random_instance(rng, allow_zeros=True)
        alg = random_dist(rng, inst.n_actions)
        table = theory.adversarial_reward(inst, 0, alg)
        comp = inst.prompts[0].comparator
        got = theory.regret_under_table(table, comp, alg)
        want = tv_distance(comp, alg)
        if got != want:
            fails.append(f"[{k}] adversarial regret {got!r} != tv {want!r}")
    return fails


def check_ordering(n_instances: int = 1000, eps: float = 0.1,
                   seed: int = 606) -> list[str]:
    """Best-reference threshold never exceeds the mixture threshold; strict
    whenever the references actually disagree on the best action."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng)
        res = theory.ordering_check_m_thresholds(inst, 0, eps)
        if not res.holds:
            fails.append(f"[{k}] M_tau* > M_LLM")
        if res.refs_differ_at_best and math.isfinite(res.m_eps_llm) \
                and res.m_eps_llm > 1.0 and not res.strict:
            fails.append(f"[{k}] ordering not strict despite differing refs")
    return fails


def check_lemma_bound(n_instances: int = 200, k_max: int = 100,
                      seed: int = 707) -> list[str]:
    """Posterior mass on the best reference after k qualifying actions is at
    least 1 / (1 + e^{-k delta} / p): random qualifying sequences up to
    k_max, plus full enumeration on tiny qualifying sets."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_refs=int(rng.integers(2, 4)))
        margin = theory.margin_report(inst, 0)
        if not margin.holds or math.isinf(margin.delta):
            continue
        rewards = inst.prompts[0].rewards
        qualifying = np.nonzero(rewards >= margin.gamma_star)[0]
        p_star = inst.ref_prior[margin.tau_star]

        def posterior_star(seq) -> float:
            w = posterior_weights(
                inst, HistoryState(0, tuple(inst.actions[a] for a in seq)))
            return w.weights[margin.tau_star]

        for depth in (1, 2, k_max // 2, k_max):
            seq = [int(a) for a in rng.choice(qualifying, size=depth)]
            bound = theory.lemma_posterior_bound(depth, margin.delta, p_star)
            if posterior_star(seq) < bound - 1e-12:
                fails.append(f"[{k}] lemma bound fails at k={depth}")
                break
        if len(qualifying) <= 3:
            for depth in range(1, 5):
                bound = theory.lemma_posterior_bound(depth, margin.delta,
                                                     p_star)
                worst = min(posterior_star(list(s)) for s in
                            _all_sequences(qualifying, depth))
                if worst < bound - 1e-12:
                    fails.append(f"[{k}] lemma bound fails under enumeration")
                    break
    return fails


def _all_sequences(pool, depth):
    if depth == 0:
        yield ()
        return
    for rest in _all_sequences(pool, depth - 1):
        for a in pool:
            yield rest + (int(a),)


def check_contraction(n_instances: int = 1000, seed: int = 808) -> list[str]:
    """Coverage of the best reference is bounded by kappa times the coverage
    of the prior mixture whenever the margin holds."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_refs=int(rng.integers(1, 4)))
        margin = theory.margin_report(inst, 0)
        if not margin.holds:
            continue
        try:
            lhs, kappa, holds = theory.contraction_check(
                inst, 0, margin.gamma_star)
        except PreconditionFailed:
            continue
        if not holds:
            fails.append(f"[{k}] contraction violated (lhs={lhs}, "
                         f"kappa={kappa})")
    return fails


def check_rejection_bound(n_instances: int = 40, seed: int = 909) -> list[str]:
    """Adaptive rejection: exact output total variation against both forms of
    the telescoping bound on enumerable instances."""
    fails: list[str] = []
    builders = [FixedPrompt(), FullHistory(window=3),
                RewardFiltered(gamma=0.5, window=3)]
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_actions=3, n_refs=2)
        builder = builders[k % len(builders)]
        n = 2 + k % 3
        eps = float(rng.uniform(0.02, 0.2))
        try:
            res = theory.rejection_tv_bound(inst, 0, builder, n, eps,
                                            check=False)
        except Exception as exc:  # pragma: no cover - diagnostic path
            fails.append(f"[{k}] bound evaluator raised {exc!r}")
            continue
        if res.exact_tv > res.bound + 1e-10:
            fails.append(f"[{k}] tv {res.exact_tv} > stated bound {res.bound}")
        if res.exact_tv > res.bound_with_proof_factor + 1e-10:
            fails.append(f"[{k}] tv exceeds even the doubled per-step bound")
    return fails


def check_oracle_agreement(n_instances: int = 6, trials: int = 200_000,
                           seed: int = 111) -> list[str]:
    """Monte Carlo output frequencies against the exact enumeration within
    four binomial standard errors per action."""
    fails: list[str] = []
    specs = [
        AlgorithmSpec(FixedPrompt(), label="bon"),
        AlgorithmSpec(FullHistory(window=3), label="pureseq"),
        AlgorithmSpec(RewardFiltered(gamma=0.5, window=3), label="rf"),
        AlgorithmSpec(RewardFilteredBurnIn(gamma=0.5, m=1, window=3),
                      label="rf-burnin"),
        AlgorithmSpec(TopK(k=2, window=3), label="topk"),
        AlgorithmSpec(FixedPrompt(), kind="rejection", epsilon=0.15,
                      label="rejection"),
    ]
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_actions=3, n_refs=2)
        spec = specs[k % len(specs)]
        n = 2 + k % 3
        exact = exact_output_dist(inst, 0, spec, n).probs
        emp = empirical_output_dist(inst, 0, spec, n, trials,
                                    mix(seed, k, 1))
        sigma = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / trials)
        z = np.abs(emp - exact) / sigma
        if np.any(z > 4.0):
            fails.append(f"[{k}] {spec.label}: max z-score {z.max():.2f} > 4")
    return fails


def check_determinism(seed: int = 222) -> list[str]:
    """Worker-count independence of the trial runner."""
    fails: list[str] = []
    inst = random_instance(child_stream(seed, 0), n_actions=3, n_refs=2)
    spec = AlgorithmSpec(RewardFiltered(gamma=0.5, window=3), label="rf")
    solo = run_trials(inst, 0, spec, 4, 64, seed, workers=1)
    multi = run_trials(inst, 0, spec, 4, 64, seed, workers=4)
    if solo != multi:
        fails.append("trial records differ between 1 and 4 workers")
    return fails


def check_regret_bound(n_instances: int = 10, trials: int = 2000,
                       seed: int = 333) -> list[str]:
    """Empirical mean regret against the eps + E[exp(-n^2 / sum M_i)] bound,
    with a three-standard-error Monte Carlo cushion."""
    fails: list[str] = []
    for k in range(n_instances):
        rng = child_stream(seed, k)
        inst = random_instance(rng, n_actions=3, n_refs=2)
        spec = AlgorithmSpec(FullHistory(window=3), label="pureseq")
        n = 4
        bound = theory.seqbon_regret_bound(inst, 0, spec, n, eps=0.1,
                                           trials=200, base_seed=mix(seed, k))
        if math.isinf(bound):
            continue
        recs = run_trials(inst, 0, spec, n, trials, mix(seed, k, 7))
        regrets = np.array([r.regret for r in recs])
        cushion = 3.0 * regrets.std(ddof=1) / math.sqrt(trials)
        if regrets.mean() > bound + cushion:
            fails.append(f"[{k}] mean regret {regrets.mean():.4f} > "
                         f"bound {bound:.4f} + {cushion:.4f}")
    return fails


# ---------------------------------------------------------------------------
# suites

_FULL = {
    "posterior": lambda: check_posterior(),
    "divergences": lambda: check_divergences(),
    "bon-equivalence": lambda: check_bon_equivalence(),
    "classic-rejection": lambda: check_classic_rejection(),
    "adversarial-identity": lambda: check_adversarial_identity(),
    "ordering": lambda: check_ordering(),
    "lemma-bound": lambda: check_lemma_bound(),
    "contraction": lambda: check_contraction(),
    "rejection-bound": lambda: check_rejection_bound(),
    "oracle-agreement": lambda: check_oracle_agreement(),
    "determinism": lambda: check_determinism(),
    "regret-bound": lambda: check_regret_bound(),
}

_FAST = {
    "posterior": lambda: check_posterior(n_instances=100, max_hist=20),
    "divergences": lambda: check_divergences(n_pairs=100),
    "bon-equivalence": lambda: check_bon_equivalence(n_instances=10),
    "classic-rejection": lambda: check_classic_rejection(n_small=5),
    "adversarial-identity": lambda: check_adversarial_identity(n_pairs=100),
    "ordering": lambda: check_ordering(n_instances=100),
    "lemma-bound": lambda: check_lemma_bound(n_instances=25),
    "contraction": lambda: check_contraction(n_instances=100),
    "rejection-bound": lambda: check_rejection_bound(n_instances=9),
    "oracle-agreement": lambda: check_oracle_agreement(
        n_instances=3, trials=50_000),
    "determinism": lambda: check_determinism(),
    "regret-bound": lambda: check_regret_bound(n_instances=3, trials=500),
}

SUITES = {"all": _FULL, "fast": _FAST}


def run_suite(suite: str = "all") -> dict[str, list[str]]:
    """Run every check in the suite; returns {check name: violations}."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from "
                         f"{sorted(SUITES)}")
    return {name: fn() for name, fn in SUITES[suite].items()}
