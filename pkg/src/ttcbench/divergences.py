"""Overlap divergences, coverage, and the regret functional.

Conventions:

* Total variation is the UNHALVED sum |p1 - p2|, ranging over [0, 2].
* Infinite thresholds and infinite coverage are ordinary ``math.inf``
  values, never exceptions; they occur on legitimate hard instances.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidM
from .model import CategoricalDist, Instance

INF = math.inf


def e_m_divergence(p1: CategoricalDist, p2: CategoricalDist, M: float) -> float:
    """sum_a max{0, p1(a) - M p2(a)}; nonincreasing and convex in M."""
    if M < 1:
        raise InvalidM(f"rejection threshold must be >= 1, got {M}")
    return float(np.maximum(0.0, p1.probs - M * p2.probs).sum())


def m_epsilon(p1: CategoricalDist, p2: CategoricalDist, eps: float) -> float:
    """Smallest M >= 1 with e_m_divergence(p1, p2, M) <= eps.

    Solved exactly on the breakpoints of the piecewise-linear map
    M -> E_M(p1, p2); the breakpoints are the ratios p1(a)/p2(a).  Returns
    ``inf`` iff the p1-mass unsupported by p2 exceeds eps.
    """
    a1 = p1.probs
    a2 = p2.probs
    unsupported = float(a1[a2 == 0].sum())
    if unsupported > eps:
        return INF
    if e_m_divergence(p1, p2, 1.0) <= eps:
        return 1.0
    mask = (a2 > 0) & (a1 > 0)
    r1 = a1[mask]
    r2 = a2[mask]
    ratios = r1 / r2
    order = np.argsort(-ratios)
    r1, r2, ratios = r1[order], r2[order], ratios[order]
    s1 = np.cumsum(r1)
    s2 = np.cumsum(r2)
    # On the segment where exactly the first k terms are active,
    # E(M) = unsupported + s1[k-1] - M * s2[k-1].
    for k in range(len(ratios), 0, -1):
        m_cand = (unsupported + s1[k - 1] - eps) / s2[k - 1]
        lo = ratios[k] if k < len(ratios) else 1.0
        hi = ratios[k - 1]
        if lo <= m_cand <= hi:
            return float(max(m_cand, 1.0))
    # Numerical fallback: eps sits exactly on a breakpoint.
    for k in range(len(ratios)):
        m_cand = float(ratios[k])
        if m_cand >= 1.0 and e_m_divergence(p1, p2, m_cand) <= eps:
            return m_cand
    return 1.0


def coverage(p1: CategoricalDist, p2: CategoricalDist) -> float:
    """E_{a~p1}[p1(a)/p2(a)]; inf if p1 puts mass where p2 vanishes."""
    a1 = p1.probs
    a2 = p2.probs
    mask = a1 > 0
    if np.any(a2[mask] == 0):
        return INF
    return float((a1[mask] ** 2 / a2[mask]).sum())


def tv_distance(p1: CategoricalDist, p2: CategoricalDist) -> float:
    """Unhalved total variation: sum_a |p1(a) - p2(a)| in [0, 2]."""
    return float(np.abs(p1.probs - p2.probs).sum())


def regret_of_action(inst: Instance, prompt_index: int, action_id: str,
                     comparator: CategoricalDist | None = None) -> float:
    """E_{a~comparator}[r(a,x)] - r(action,x)."""
    prompt = inst.prompts[prompt_index]
    if comparator is None:
        comparator = prompt.comparator
    base = float(comparator.probs @ prompt.rewards)
    return base - float(prompt.rewards[inst.action_index(action_id)])


def regret_of_dist(inst: Instance, prompt_index: int, alg_dist: CategoricalDist,
                   comparator: CategoricalDist | None = None) -> float:
    """Expected regret of an output distribution."""
    prompt = inst.prompts[prompt_index]
    if comparator is None:
        comparator = prompt.comparator
    base = float(comparator.probs @ prompt.rewards)
    return base - float(alg_dist.probs @ prompt.rewards)
