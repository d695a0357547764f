"""Many-to-many deferred acceptance between channels and tenants.

Channels propose; a channel may hold up to q_ch tenants and a tenant up to
q_T channels. Preferences on both sides are ordered by single-connectivity
value with random keys strictifying the ties that arise because channels
of one BS are identical. The outcome is pairwise stable and, by the
deferred-acceptance lattice property, independent of the order in which
free channels are processed.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .connectivity import ConnectivityEvaluator, LinkModel
from .prealloc import Preallocation
from .rng import substream
from .scenario import Scenario


@dataclass
class Quotas:
    """q_t: channels a tenant may hold; q_ch: tenants a channel may serve."""

    q_t: int
    q_ch: int

    def __post_init__(self) -> None:
        if self.q_t < 1 or self.q_ch < 1:
            raise ValueError(f"quotas must be >= 1, got q_t={self.q_t}, q_ch={self.q_ch}")


@dataclass
class PreferenceProfile:
    """Strict complete preference orders for both sides.

    tenant_prefs[k] lists channel indices best-first; channel_prefs[j]
    lists tenant indices best-first. Rank arrays are the inverse
    permutations for O(1) comparisons.
    """

    tenant_prefs: np.ndarray  # (n_tenants, n_channels)
    channel_prefs: np.ndarray  # (n_channels, n_tenants)
    tenant_rank: np.ndarray  # tenant_rank[k, j] = position of channel j for tenant k
    channel_rank: np.ndarray  # channel_rank[j, k] = position of tenant k for channel j
    tie_keys: np.ndarray  # (n_tenants, n_channels)

    @property
    def n_tenants(self) -> int:
        return self.tenant_prefs.shape[0]

    @property
    def n_channels(self) -> int:
        return self.tenant_prefs.shape[1]


def build_preferences(
    scenario: Scenario,
    model: LinkModel | None = None,
    seed: int = 0,
    evaluator: ConnectivityEvaluator | None = None,
) -> PreferenceProfile:
    """Order both sides by (SCV descending, tie key ascending)."""
    ev = evaluator if evaluator is not None else ConnectivityEvaluator(scenario, model)
    scv = ev.scv_matrix()
    keys = substream(seed, "tiebreak-prefs").uniform(size=scv.shape)
    n_t, n_ch = scv.shape
    tenant_prefs = np.empty((n_t, n_ch), dtype=np.intp)
    for k in range(n_t):
        tenant_prefs[k] = np.lexsort((keys[k], -scv[k]))
    channel_prefs = np.empty((n_ch, n_t), dtype=np.intp)
    for j in range(n_ch):
        channel_prefs[j] = np.lexsort((keys[:, j], -scv[:, j]))
    tenant_rank = np.empty_like(tenant_prefs)
    np.put_along_axis(tenant_rank, tenant_prefs, np.arange(n_ch)[None, :], axis=1)
    channel_rank = np.empty_like(channel_prefs)
    np.put_along_axis(channel_rank, channel_prefs, np.arange(n_t)[None, :], axis=1)
    return PreferenceProfile(tenant_prefs, channel_prefs, tenant_rank, channel_rank, keys)


def m2m_gale_shapley(
    profile: PreferenceProfile,
    quotas: Quotas,
    initial_order: list[int] | None = None,
) -> Preallocation:
    """Channel-proposing deferred acceptance.

    Each free channel proposes down its list; a tenant keeps its q_t best
    proposers and rejects the displaced one, which resumes proposing from
    where it left off. Terminates after at most n_channels * n_tenants
    proposals. `initial_order` only permutes the processing queue; the
    final matching does not depend on it.
    """
    n_t, n_ch = profile.n_tenants, profile.n_channels
    ch_prefs = profile.channel_prefs.tolist()
    t_rank = profile.tenant_rank.tolist()
    ptr = [0] * n_ch
    free_slots = [quotas.q_ch] * n_ch
    held: list[list[int]] = [[] for _ in range(n_t)]  # channels held per tenant

    queue = deque(range(n_ch) if initial_order is None else initial_order)
    proposals = 0
    while queue:
        j = queue.popleft()
        while free_slots[j] > 0 and ptr[j] < n_t:
            k = ch_prefs[j][ptr[j]]
            ptr[j] += 1
            proposals += 1
            ranks = t_rank[k]
            if len(held[k]) < quotas.q_t:
                held[k].append(j)
                free_slots[j] -= 1
            else:
                worst = max(held[k], key=lambda c: ranks[c])
                if ranks[j] < ranks[worst]:
                    held[k].remove(worst)
                    held[k].append(j)
                    free_slots[j] -= 1
                    free_slots[worst] += 1
                    if ptr[worst] < n_t:
                        queue.append(worst)
    assert proposals <= n_ch * n_t

    assign = np.zeros((n_t, n_ch), dtype=np.int8)
    for k, channels in enumerate(held):
        assign[k, channels] = 1
    return Preallocation(assign, "M2MGS")


def verify_pairwise_stability(
    profile: PreferenceProfile, quotas: Quotas, prealloc: Preallocation
) -> tuple[bool, list[tuple[int, int]]]:
    """Check for blocking pairs; returns (stable, violating (tenant, channel) pairs).

    (k, j) blocks iff they are unmatched while k has a free slot or prefers
    j to its worst held channel, and j has a free slot or prefers k to its
    worst matched tenant.
    """
    matched = np.asarray(prealloc.assign, dtype=bool)
    if matched.shape != (profile.n_tenants, profile.n_channels):
        raise ValueError("matching dimensions do not match the profile")
    t_rank = profile.tenant_rank
    c_rank = profile.channel_rank.T  # (n_tenants, n_channels) view

    row_counts = matched.sum(axis=1)
    col_counts = matched.sum(axis=0)
    worst_t = np.where(matched, t_rank, -1).max(axis=1)  # worst held channel rank per tenant
    worst_c = np.where(matched, c_rank, -1).max(axis=0)  # worst matched tenant rank per channel

    tenant_side = (row_counts < quotas.q_t)[:, None] | (t_rank < worst_t[:, None])
    channel_side = (col_counts < quotas.q_ch)[None, :] | (c_rank < worst_c[None, :])
    blocking = ~matched & tenant_side & channel_side
    violations = [(int(k), int(j)) for k, j in np.argwhere(blocking)]
    return (len(violations) == 0, violations)
