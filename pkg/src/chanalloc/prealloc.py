"""The five simple preallocation heuristics.

Each method non-exclusively assigns at most `n_ch_max` channels to every
tenant (rows of the assignment matrix; columns are unconstrained). All
methods draw their per-tenant randomness from tenant-indexed substreams,
so rows are independent and could be computed in parallel with results
identical to sequential execution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import ConnectivityEvaluator, LinkModel
from .rng import substream
from .scenario import Scenario, distance_matrix

N_CH_MAX_DEFAULT = 8


@dataclass
class Preallocation:
    """Binary tenant x channel matrix plus the method that produced it."""

    assign: np.ndarray  # (n_tenants, n_channels), int8
    method_tag: str

    @property
    def n_tenants(self) -> int:
        return self.assign.shape[0]

    @property
    def n_channels(self) -> int:
        return self.assign.shape[1]

    def channels_of(self, tenant: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.assign[tenant])]

    def row_sums(self) -> np.ndarray:
        return self.assign.sum(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.assign.sum(axis=0)

    def validate(self, n_ch_max: int) -> None:
        if self.assign.min() < 0 or self.assign.max() > 1:
            raise ValueError("preallocation matrix must be binary")
        worst = int(self.row_sums().max(initial=0))
        if worst > n_ch_max:
            raise ValueError(f"a tenant has {worst} preallocated channels, budget is {n_ch_max}")


def _empty_assign(scenario: Scenario) -> np.ndarray:
    return np.zeros((scenario.n_tenants, scenario.n_channels), dtype=np.int8)


def random_prealloc(scenario: Scenario, n_ch_max: int = N_CH_MAX_DEFAULT, seed: int = 0) -> Preallocation:
    """Each tenant draws `n_ch_max` distinct channels uniformly at random.

    If fewer than `n_ch_max` channels exist, every tenant gets all of them
    (degenerate case, shared by all methods).
    """
    assign = _empty_assign(scenario)
    n = scenario.n_channels
    take = min(n_ch_max, n)
    for k in range(scenario.n_tenants):
        rng = substream(seed, "prealloc-r", k)
        assign[k, rng.choice(n, size=take, replace=False)] = 1
    return Preallocation(assign, "R")


def _bs_tie_keys(scenario: Scenario, seed: int) -> np.ndarray:
    """Per (tenant, BS) tie-break keys, drawn once from the tie-break stream."""
    return substream(seed, "tiebreak-bs").uniform(size=(scenario.n_tenants, scenario.n_bs))


def _take_by_bs_order(
    scenario: Scenario,
    order: np.ndarray,
    tenant: int,
    n_ch_max: int,
    rng: np.random.Generator,
    assign: np.ndarray,
) -> None:
    """Walk BSs in `order`; take all channels of a BS if they fit the
    remaining budget, otherwise a uniform random subset of exactly the
    remainder (the branch structure of the distance-based algorithm)."""
    remaining = min(n_ch_max, scenario.n_channels)
    for bs in order:
        if remaining <= 0:
            break
        channels = scenario.channels_of_bs(int(bs))
        if len(channels) <= remaining:
            assign[tenant, channels] = 1
            remaining -= len(channels)
        else:
            picked = rng.choice(len(channels), size=remaining, replace=False)
            assign[tenant, [channels[i] for i in picked]] = 1
            remaining = 0


def distance_based(scenario: Scenario, n_ch_max: int = N_CH_MAX_DEFAULT, seed: int = 0) -> Preallocation:
    """Visit BSs closest-first, collecting channels up to the budget."""
    assign = _empty_assign(scenario)
    dist = distance_matrix(scenario)
    ties = _bs_tie_keys(scenario, seed)
    for k in range(scenario.n_tenants):
        order = np.lexsort((ties[k], dist[k]))
        _take_by_bs_order(scenario, order, k, n_ch_max, substream(seed, "prealloc-db", k), assign)
    return Preallocation(assign, "DB")


def scvb(
    scenario: Scenario,
    model: LinkModel | None = None,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    seed: int = 0,
    evaluator: ConnectivityEvaluator | None = None,
) -> Preallocation:
    """Like `distance_based`, but BSs ranked by single-channel capacity."""
    assign = _empty_assign(scenario)
    ev = evaluator if evaluator is not None else ConnectivityEvaluator(scenario, model)
    scv = ev.scv_bs_matrix()
    ties = _bs_tie_keys(scenario, seed)
    for k in range(scenario.n_tenants):
        order = np.lexsort((ties[k], -scv[k]))
        _take_by_bs_order(scenario, order, k, n_ch_max, substream(seed, "prealloc-scvb", k), assign)
    return Preallocation(assign, "SCVB")


def _weighted_without_replacement(
    weights: np.ndarray, take: int, rng: np.random.Generator
) -> list[int]:
    """Draw `take` distinct indices by sequential renormalized weighted draws."""
    remaining = list(range(len(weights)))
    out = []
    for _ in range(take):
        w = weights[remaining]
        total = w.sum()
        if total <= 0.0:
            # All remaining weights zero: fall back to uniform.
            pick = int(rng.integers(len(remaining)))
        else:
            pick = int(rng.choice(len(remaining), p=w / total))
        out.append(remaining.pop(pick))
    return out


def dbsr(
    scenario: Scenario,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    seed: int = 0,
    min_distance_m: float = 1.0,
) -> Preallocation:
    """Weighted random channels, weight inversely proportional to distance."""
    assign = _empty_assign(scenario)
    dist = distance_matrix(scenario)
    owners = np.asarray(scenario.channel_owner, dtype=int)
    take = min(n_ch_max, scenario.n_channels)
    for k in range(scenario.n_tenants):
        weights = 1.0 / np.maximum(dist[k, owners], min_distance_m)
        rng = substream(seed, "prealloc-dbsr", k)
        assign[k, _weighted_without_replacement(weights, take, rng)] = 1
    return Preallocation(assign, "DBSR")


def scvbsr(
    scenario: Scenario,
    model: LinkModel | None = None,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    seed: int = 0,
    evaluator: ConnectivityEvaluator | None = None,
) -> Preallocation:
    """Weighted random channels, weight proportional to the SCV."""
    assign = _empty_assign(scenario)
    ev = evaluator if evaluator is not None else ConnectivityEvaluator(scenario, model)
    scv = ev.scv_matrix()
    take = min(n_ch_max, scenario.n_channels)
    for k in range(scenario.n_tenants):
        rng = substream(seed, "prealloc-scvbsr", k)
        assign[k, _weighted_without_replacement(scv[k], take, rng)] = 1
    return Preallocation(assign, "SCVBSR")
