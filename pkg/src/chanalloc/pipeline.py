"""Two-step allocation: preallocation, bid generation, channel auction.

`allocate` runs any preallocation method followed by the exact channel
auction, re-verifies every constraint with the independent checker, and
returns per-tenant capacities/utilities together with per-stage timings.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import auction, matching, prealloc as pa
from .auction import BidMatrix, RcaConfig, RcaInfeasible, WdpSolution
from .connectivity import ConnectivityEvaluator, LinkModel
from .matching import Quotas
from .prealloc import N_CH_MAX_DEFAULT, Preallocation
from .scenario import Scenario

METHODS = ("r", "db", "scvb", "dbsr", "scvbsr", "m2mgs", "rca")

METHOD_TAGS = {
    "r": "R",
    "db": "DB",
    "scvb": "SCVB",
    "dbsr": "DBSR",
    "scvbsr": "SCVBSR",
    "m2mgs": "M2MGS",
    "rca": "RCA",
}


@dataclass
class AllocationResult:
    """Final univalent assignment plus everything needed for the metrics."""

    method: str
    seed: int
    final_assign: np.ndarray  # (n_tenants, n_channels), column sums <= 1
    per_tenant_capacity: list[float]
    per_tenant_utility: list[float]
    prealloc_used: Preallocation
    timings: dict[str, float]  # t_prealloc, t_bidgen, t_solve (seconds)
    solver_optimal: bool
    infeasible: bool = False
    infeasible_note: str = ""
    max_bids_per_tenant: int = 0
    tenant_quota: int = N_CH_MAX_DEFAULT  # q_t for m2mgs, the bid budget otherwise

    @property
    def total_utility(self) -> float:
        total = 0.0
        for u in self.per_tenant_utility:
            total += u
        return total

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "assigned_channels": [
                [int(j) for j in np.flatnonzero(self.final_assign[k])]
                for k in range(self.final_assign.shape[0])
            ],
            "preallocated_channels": [
                self.prealloc_used.channels_of(k) for k in range(self.prealloc_used.n_tenants)
            ],
            "per_tenant_capacity": self.per_tenant_capacity,
            "per_tenant_utility": self.per_tenant_utility,
            "total_utility": self.total_utility,
            "timings": self.timings,
            "solver_optimal": self.solver_optimal,
            "infeasible": self.infeasible,
            "infeasible_note": self.infeasible_note,
            "max_bids_per_tenant": self.max_bids_per_tenant,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")


@dataclass
class Metrics:
    """Per-run measures mirroring the reported experiment tables."""

    total_utility: float
    n_unpreallocated_channels: int
    n_free_tenant_slots: int
    n_starved_tenants: int
    t_prealloc: float
    t_bidgen: float
    t_solve: float
    solver_optimal: bool = True
    infeasible: bool = False
    max_bids_per_tenant: int = 0


def run_preallocation(
    scenario: Scenario,
    evaluator: ConnectivityEvaluator,
    method: str,
    params: Quotas | RcaConfig | None,
    seed: int,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    solver_timeout_s: float = 10.0,
) -> Preallocation:
    """Dispatch one preallocation method; the RCA path runs its own auction."""
    if method == "r":
        return pa.random_prealloc(scenario, n_ch_max, seed)
    if method == "db":
        return pa.distance_based(scenario, n_ch_max, seed)
    if method == "scvb":
        return pa.scvb(scenario, n_ch_max=n_ch_max, seed=seed, evaluator=evaluator)
    if method == "dbsr":
        return pa.dbsr(scenario, n_ch_max, seed, min_distance_m=evaluator.model.min_distance_m)
    if method == "scvbsr":
        return pa.scvbsr(scenario, n_ch_max=n_ch_max, seed=seed, evaluator=evaluator)
    if method == "m2mgs":
        if not isinstance(params, Quotas):
            raise ValueError("m2mgs requires Quotas params")
        if params.q_t > n_ch_max:
            raise ValueError(f"q_t={params.q_t} exceeds the bid budget {n_ch_max}")
        if params.q_ch < 2:
            raise ValueError("preallocation use of m2mgs requires q_ch >= 2")
        profile = matching.build_preferences(scenario, seed=seed, evaluator=evaluator)
        return matching.m2m_gale_shapley(profile, params)
    if method == "rca":
        if not isinstance(params, RcaConfig):
            raise ValueError("rca requires RcaConfig params")
        bids = auction.generate_bs_bids(evaluator, params, seed)
        capped = auction.capped_channel_counts(scenario, params)
        solution = auction.solve_rca(bids, params, capped, timeout_s=solver_timeout_s)
        auction.verify_solution(
            bids,
            solution,
            item_quota=params.q_bs,
            require_all_bidders=solution.proven_optimal,
            min_channels=params.min_channels,
            channels_per_item=capped,
        )
        return auction.rca_to_preallocation(scenario, solution, bids, params, seed)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def allocate(
    scenario: Scenario,
    model: LinkModel | None = None,
    method: str = "r",
    params: Quotas | RcaConfig | None = None,
    seed: int | None = None,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    solver_timeout_s: float = 10.0,
    prune_dominated: bool = False,
    evaluator: ConnectivityEvaluator | None = None,
) -> AllocationResult:
    """Run the full two-step allocation for one scenario.

    Deterministic given (scenario, method, params, seed) except for the
    timing fields; `seed` defaults to the scenario seed. An infeasible RCA
    preallocation yields a recorded empty result rather than an exception,
    so parameter sweeps survive infeasible corners.
    """
    method = method.lower()
    seed = scenario.seed if seed is None else seed
    ev = evaluator if evaluator is not None else ConnectivityEvaluator(scenario, model)
    n_t, n_ch = scenario.n_tenants, scenario.n_channels
    quota = params.q_t if method == "m2mgs" and isinstance(params, Quotas) else n_ch_max

    t0 = time.perf_counter()
    try:
        prealloc = run_preallocation(scenario, ev, method, params, seed, n_ch_max, solver_timeout_s)
    except RcaInfeasible as exc:
        t1 = time.perf_counter()
        empty = Preallocation(np.zeros((n_t, n_ch), dtype=np.int8), METHOD_TAGS[method])
        return AllocationResult(
            method=method,
            seed=seed,
            final_assign=np.zeros((n_t, n_ch), dtype=np.int8),
            per_tenant_capacity=[0.0] * n_t,
            per_tenant_utility=[0.0] * n_t,
            prealloc_used=empty,
            timings={"t_prealloc": t1 - t0, "t_bidgen": 0.0, "t_solve": 0.0},
            solver_optimal=False,
            infeasible=True,
            infeasible_note=str(exc),
            tenant_quota=quota,
        )
    t1 = time.perf_counter()
    prealloc.validate(n_ch_max)

    bids = auction.generate_channel_bids(ev, prealloc, n_ch_max, prune_dominated)
    t2 = time.perf_counter()
    solution = auction.solve_ca(bids, timeout_s=solver_timeout_s)
    t3 = time.perf_counter()

    auction.verify_solution(bids, solution, item_quota=1)

    final = np.zeros((n_t, n_ch), dtype=np.int8)
    capacities = [0.0] * n_t
    utilities = [0.0] * n_t
    for row_idx in solution.accepted:
        bid = bids.rows[row_idx]
        k = bid.bidder
        mask = bid.bundle
        m = mask
        while m:
            final[k, (m & -m).bit_length() - 1] = 1
            m &= m - 1
        capacities[k] = ev.capacity_of_mask(k, mask)
        utilities[k] = ev.utility_of_mask(k, mask)

    _check_result_invariants(prealloc, final)
    bid_counts = bids.bids_per_bidder()
    return AllocationResult(
        method=method,
        seed=seed,
        final_assign=final,
        per_tenant_capacity=capacities,
        per_tenant_utility=utilities,
        prealloc_used=prealloc,
        timings={"t_prealloc": t1 - t0, "t_bidgen": t2 - t1, "t_solve": t3 - t2},
        solver_optimal=solution.proven_optimal,
        max_bids_per_tenant=max(bid_counts.values(), default=0),
        tenant_quota=quota,
    )


def _check_result_invariants(prealloc: Preallocation, final: np.ndarray) -> None:
    """Independent of the solver: univalence and containment in the prealloc."""
    if final.sum(axis=0).max(initial=0) > 1:
        raise AssertionError("a channel was assigned to more than one tenant")
    if np.any(final > prealloc.assign):
        raise AssertionError("a tenant was assigned a channel outside its preallocation")


def compute_metrics(
    result: AllocationResult,
    prealloc: Preallocation | None = None,
    tenant_quota: int | None = None,
) -> Metrics:
    """Extract the table measures from one allocation result (idempotent)."""
    ap = prealloc if prealloc is not None else result.prealloc_used
    quota = tenant_quota if tenant_quota is not None else result.tenant_quota
    if ap.assign.shape != result.final_assign.shape:
        raise ValueError("preallocation and assignment dimensions differ")
    row_sums = ap.row_sums()
    col_sums = ap.column_sums()
    free_slots = int(np.maximum(quota - row_sums, 0).sum())
    return Metrics(
        total_utility=result.total_utility,
        n_unpreallocated_channels=int((col_sums == 0).sum()),
        n_free_tenant_slots=free_slots,
        n_starved_tenants=int((row_sums == 0).sum()),
        t_prealloc=result.timings["t_prealloc"],
        t_bidgen=result.timings["t_bidgen"],
        t_solve=result.timings["t_solve"],
        solver_optimal=result.solver_optimal,
        infeasible=result.infeasible,
        max_bids_per_tenant=result.max_bids_per_tenant,
    )
