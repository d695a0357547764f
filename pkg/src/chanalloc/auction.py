"""Bid generation and exact winner determination for both auction stages.

The standard channel-level auction assigns disjoint channel bundles (item
quota 1, at most one bundle per bidder). The relaxed BS-level auction
allows each BS to serve up to q_bs tenants and forces every tenant to
receive a bundle worth at least a minimum number of channels. Both are
solved exactly by depth-first branch and bound over bidders with an
admissible per-bidder availability bound, sharpened by Lagrangian item
prices tuned once at the root; a brute-force enumerator serves as the
independent optimality oracle in tests.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .connectivity import ConnectivityEvaluator, capacity_batch, utility
from .prealloc import N_CH_MAX_DEFAULT, Preallocation
from .rng import substream
from .scenario import Scenario


class Bid(NamedTuple):
    bundle: int  # bitmask over items
    value: float
    bidder: int


@dataclass
class BidMatrix:
    """Rows of (bundle bitmask, value, bidder); items are channels or BSs."""

    rows: list[Bid]
    item_count: int
    bidder_count: int

    def __post_init__(self) -> None:
        seen = set()
        limit = 1 << self.item_count
        for r in self.rows:
            if not (0 < r.bundle < limit):
                raise ValueError(f"bundle {r.bundle:#x} out of range for {self.item_count} items")
            if r.value < 0:
                raise ValueError("bid values must be non-negative")
            if not (0 <= r.bidder < self.bidder_count):
                raise ValueError(f"bidder index {r.bidder} out of range")
            key = (r.bundle, r.bidder)
            if key in seen:
                raise ValueError(f"duplicate bid {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.rows)

    def bids_per_bidder(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for r in self.rows:
            counts[r.bidder] = counts.get(r.bidder, 0) + 1
        return counts

    def save(self, path) -> None:
        """Delimited text: one item column per item (0/1), value, bidder."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for r in self.rows:
                bits = ",".join(str((r.bundle >> i) & 1) for i in range(self.item_count))
                f.write(f"{bits},{r.value!r},{r.bidder}\n")

    @classmethod
    def load(cls, path, bidder_count: int | None = None) -> "BidMatrix":
        rows: list[Bid] = []
        item_count = 0
        with open(path, encoding="utf-8") as f:
            for line in f:
                parts = line.strip().split(",")
                if len(parts) < 3:
                    continue
                item_count = len(parts) - 2
                bundle = sum(1 << i for i, b in enumerate(parts[:item_count]) if b == "1")
                rows.append(Bid(bundle, float(parts[item_count]), int(parts[item_count + 1])))
        if bidder_count is None:
            bidder_count = max((r.bidder for r in rows), default=-1) + 1
        return cls(rows, item_count, bidder_count)


@dataclass
class WdpSolution:
    accepted: list[int]  # indices into BidMatrix.rows
    objective: float
    proven_optimal: bool


@dataclass(frozen=True)
class RcaConfig:
    """Parameters of the relaxed BS-level auction."""

    q_bs: int
    n_chpbs: int
    min_channels: int = 2
    max_channels: int = N_CH_MAX_DEFAULT
    max_bs_considered: int = N_CH_MAX_DEFAULT

    def __post_init__(self) -> None:
        if self.q_bs < 2:
            raise ValueError(f"q_bs must be >= 2, got {self.q_bs}")
        if self.n_chpbs < 1:
            raise ValueError(f"n_chpbs must be >= 1, got {self.n_chpbs}")
        if self.min_channels > self.max_channels:
            raise ValueError("min_channels must not exceed max_channels")


class RcaInfeasible(Exception):
    """Raised when no assignment satisfies the minimum-channel constraint."""

    def __init__(self, tenant: int, reason: str):
        super().__init__(f"tenant {tenant}: {reason}")
        self.tenant = tenant
        self.reason = reason


class InstanceTooLarge(Exception):
    pass


# ---------------------------------------------------------------------------
# Bid generation


def generate_channel_bids(
    evaluator: ConnectivityEvaluator,
    prealloc: Preallocation,
    n_ch_max: int = N_CH_MAX_DEFAULT,
    prune_dominated: bool = False,
) -> BidMatrix:
    """One bid per non-empty subset of each tenant's preallocated channels.

    Bid value is the tenant's utility of the subset's capacity. With
    `prune_dominated`, bids whose bundle strictly contains a same-value
    bundle are dropped (safe because values are monotone; the optimum is
    unchanged, only Pareto-relevant rows remain).
    """
    scenario = evaluator.scenario
    requests = []
    for k in range(prealloc.n_tenants):
        channels = prealloc.channels_of(k)
        if len(channels) > n_ch_max:
            raise ValueError(
                f"tenant {k} has {len(channels)} preallocated channels, "
                f"above the bid budget {n_ch_max}"
            )
        requests.append((k, channels))
    warmed = evaluator.warm_subsets_bulk(requests)

    rows: list[Bid] = []
    for (k, _), (masks, caps) in zip(requests, warmed):
        if not masks:
            continue
        c_min, c_max = scenario.utility_bounds[k]
        values = {g: utility(c, c_min, c_max) for g, c in zip(masks, caps)}
        for g in masks:
            if prune_dominated and _dominated(g, values):
                continue
            rows.append(Bid(g, values[g], k))
    return BidMatrix(rows, scenario.n_channels, scenario.n_tenants)


def _dominated(mask: int, values: dict[int, float]) -> bool:
    # With monotone values, a bundle is dominated iff removing some single
    # channel leaves the value unchanged.
    if mask & (mask - 1) == 0:
        return False
    v = values[mask]
    m = mask
    while m:
        bit = m & -m
        if values[mask ^ bit] >= v:
            return True
        m ^= bit
    return False


def capped_channel_counts(scenario: Scenario, cfg: RcaConfig) -> list[int]:
    return [min(n, cfg.n_chpbs) for n in scenario.channels_per_bs]


def generate_bs_bids(
    evaluator: ConnectivityEvaluator, cfg: RcaConfig, seed: int = 0
) -> BidMatrix:
    """BS-bundle bids for the relaxed auction.

    Per tenant: rank BSs by single-channel capacity (ties broken by the
    tie-break stream), keep the best `max_bs_considered`, cap per-BS
    channel counts at `n_chpbs`, and bid on every non-empty subset whose
    capped channel total fits the per-tenant budget. The bid value is the
    raw capacity of one representative channel per BS in the bundle.
    """
    scenario = evaluator.scenario
    scv = evaluator.scv_bs_matrix()
    ties = substream(seed, "tiebreak-rca-bs").uniform(size=scv.shape)
    capped = capped_channel_counts(scenario, cfg)
    snr = evaluator.profile.mean_snr_linear

    rows: list[Bid] = []
    pending: list[tuple[int, list[float]]] = []  # (row index, snr list)
    for k in range(scenario.n_tenants):
        order = np.lexsort((ties[k], -scv[k]))
        kept = [int(b) for b in order[: cfg.max_bs_considered]]
        m = len(kept)
        for s in range(1, 1 << m):
            bs_list = [kept[b] for b in range(m) if s >> b & 1]
            if sum(capped[b] for b in bs_list) > cfg.max_channels:
                continue
            bundle = 0
            for b in bs_list:
                bundle |= 1 << b
            pending.append((len(rows), [float(snr[k, b]) for b in bs_list]))
            rows.append(Bid(bundle, 0.0, k))
    if pending:
        values = capacity_batch([g for _, g in pending], evaluator.model)
        for (i, _), v in zip(pending, values):
            rows[i] = rows[i]._replace(value=float(v))
    return BidMatrix(rows, scenario.n_bs, scenario.n_tenants)


def rca_to_preallocation(
    scenario: Scenario,
    solution: WdpSolution,
    bids: BidMatrix,
    cfg: RcaConfig,
    seed: int = 0,
) -> Preallocation:
    """Translate accepted BS bundles back to channels.

    A BS contributes all of its channels when it offers at most `n_chpbs`,
    otherwise `n_chpbs` of them chosen uniformly at random.
    """
    assign = np.zeros((scenario.n_tenants, scenario.n_channels), dtype=np.int8)
    for row_idx in solution.accepted:
        bid = bids.rows[row_idx]
        k = bid.bidder
        rng = None
        m = bid.bundle
        while m:
            bs = (m & -m).bit_length() - 1
            m &= m - 1
            channels = scenario.channels_of_bs(bs)
            if len(channels) <= cfg.n_chpbs:
                assign[k, channels] = 1
            else:
                if rng is None:
                    rng = substream(seed, "rca-channels", k)
                picked = rng.choice(len(channels), size=cfg.n_chpbs, replace=False)
                assign[k, [channels[i] for i in picked]] = 1
    return Preallocation(assign, "RCA")


# ---------------------------------------------------------------------------
# Exact solvers

_TABLE_BITS_CAP = 16  # widest per-bidder union tabulated by subset-max
_PRICE_BITS_CAP = 12  # widest union admitted to the price optimization
_NEG = -1e300  # stands in for "no feasible choice" in mandatory tables

# Bound values are inflated by this relative/absolute slack before pruning
# so that float rounding inside the bound arithmetic can never cut off a
# solution that beats the incumbent by less than the rounding noise.
_REL_SLACK = 1e-12
_ABS_SLACK = 1e-15


def _slacked(x: float) -> float:
    return x + abs(x) * _REL_SLACK + _ABS_SLACK


def _group_by_bidder(bids: BidMatrix) -> dict[int, list[tuple[int, float, int]]]:
    groups: dict[int, list[tuple[int, float, int]]] = {}
    for i, r in enumerate(bids.rows):
        groups.setdefault(r.bidder, []).append((r.bundle, r.value, i))
    return groups


def _density_sorted(group: list[tuple[int, float, int]]) -> list[tuple[int, float, int]]:
    return sorted(group, key=lambda t: (-t[1] / t[0].bit_count(), -t[1], t[2]))


def _reduce_group(
    group: list[tuple[int, float, int]], others: int
) -> list[tuple[int, float, int]]:
    """Drop bids that cannot be needed for any optimal solution.

    Items outside `others` (the union of every other bidder's bundles) are
    private to this bidder and can never conflict, so only a bundle's
    projection onto `others` matters for joint feasibility. A bid is
    dropped when another bid of the same bidder has a projected bundle
    that is a subset and a value at least as large: swapping it in keeps
    feasibility and never lowers the objective. Exact (projection, value)
    duplicates collapse to the first row.
    """
    seen: dict[tuple[int, float], int] = {}
    uniq: list[tuple[int, int, float, int]] = []  # (popcount, proj, value, idx)
    for idx, (mask, value, _) in enumerate(group):
        proj = mask & others
        key = (proj, value)
        if key in seen:
            continue
        seen[key] = idx
        uniq.append((proj.bit_count(), proj, value, idx))
    if len(uniq) > 160:
        return [group[idx] for _, _, _, idx in sorted(uniq, key=lambda t: t[3])]
    uniq.sort(key=lambda t: (t[0], -t[2]))
    kept: list[tuple[int, float, int]] = []
    for _, proj, value, idx in uniq:
        dominated = False
        for kproj, kvalue, _ in kept:
            if kproj & proj == kproj and kvalue >= value:
                dominated = True
                break
        if not dominated:
            kept.append((proj, value, idx))
    return [group[idx] for _, _, idx in sorted(kept, key=lambda t: t[2])]


class _BidderTable:
    """Per-bidder data for the availability bound.

    `lookup` maps every submask of the bidder's item union to the best
    price-adjusted value the bidder can still realize within it (subset-max
    sweep over its bids); an empty choice contributes 0 for skippable
    bidders and -1e300 for mandatory ones.
    """

    __slots__ = ("union", "items", "exact", "static_max", "lookup")

    def __init__(self, group: list[tuple[int, float, int]], mandatory: bool):
        union = 0
        for mask, _, _ in group:
            union |= mask
        self.union = union
        base = _NEG if mandatory else 0.0
        self.static_max = max((v for _, v, _ in group), default=base)
        m = union.bit_count()
        if m > _TABLE_BITS_CAP:
            self.items = None
            self.exact = None
            self.lookup = None
            return
        self.items = [i for i in range(union.bit_length()) if union >> i & 1]
        pos = {item: b for b, item in enumerate(self.items)}
        exact = np.full(1 << m, _NEG)
        if not mandatory:
            exact[0] = 0.0
        for mask, value, _ in group:
            local = 0
            mm = mask
            while mm:
                b = (mm & -mm).bit_length() - 1
                local |= 1 << pos[b]
                mm &= mm - 1
            if value > exact[local]:
                exact[local] = value
        self.exact = exact
        self.lookup = None

    def adjusted_values(self, prices: np.ndarray) -> np.ndarray:
        """Price-adjusted exact values over local masks (no subset sweep)."""
        m = len(self.items)
        if m == 0:
            return self.exact.copy()
        bits = (np.arange(1 << m, dtype=np.int64)[:, None] >> np.arange(m)) & 1
        return self.exact - bits @ prices[self.items]

    def _globals(self) -> list[int]:
        m = len(self.items)
        locals_ = np.arange(1 << m, dtype=np.int64)
        globals_ = np.zeros(1 << m, dtype=np.int64)
        for b, item in enumerate(self.items):
            globals_ += ((locals_ >> b) & 1) * (1 << item)
        return globals_.tolist()

    def build_lookup(self, prices: np.ndarray) -> None:
        adj = self.adjusted_values(prices)
        m = len(self.items)
        for b in range(m):
            half = 1 << b
            view = adj.reshape(-1, 2, half)
            np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
        self.lookup = dict(zip(self._globals(), adj.tolist()))

    def argmax_table(self) -> dict[int, tuple[float, int]]:
        """availability submask -> (best raw value, best bundle local mask)."""
        m = len(self.items)
        vals = self.exact.copy()
        args = np.arange(1 << m, dtype=np.int64)
        for b in range(m):
            half = 1 << b
            vv = vals.reshape(-1, 2, half)
            aa = args.reshape(-1, 2, half)
            take = vv[:, 0, :] > vv[:, 1, :]
            vv[:, 1, :] = np.where(take, vv[:, 0, :], vv[:, 1, :])
            aa[:, 1, :] = np.where(take, aa[:, 0, :], aa[:, 1, :])
        globals_ = self._globals()
        arg_global = np.zeros(1 << m, dtype=np.int64)
        for b, item in enumerate(self.items):
            arg_global += ((args >> b) & 1) * (1 << item)
        return {
            int(g): (float(v), int(a))
            for g, v, a in zip(globals_, vals.tolist(), arg_global.tolist())
        }


def _lp_relaxation(
    groups: list[list[tuple[int, float, int]]],
    item_count: int,
    quota: int,
    mandatory: bool,
) -> tuple[np.ndarray, np.ndarray] | None:
    """LP relaxation via scipy/HiGHS: (item dual prices, primal x).

    Any non-negative prices give an admissible bound through the
    per-bidder tables, and the primal only seeds an incumbent, so the LP
    is purely a sharpener; None (caller falls back to subgradient prices
    and greedy incumbents) when the LP is unavailable or fails. x is
    aligned with the bidder-major traversal order of `groups`.
    """
    try:
        from scipy import sparse
        from scipy.optimize import linprog
    except ImportError:  # pragma: no cover - scipy is a declared dependency
        return None
    nv = sum(len(g) for g in groups)
    if nv == 0:
        return None
    n = len(groups)
    c = np.empty(nv)
    b_rows: list[int] = []
    b_cols: list[int] = []
    i_rows: list[int] = []
    i_cols: list[int] = []
    col = 0
    for t, g in enumerate(groups):
        for mask, value, _ in g:
            c[col] = -value
            b_rows.append(t)
            b_cols.append(col)
            m = mask
            while m:
                i_rows.append((m & -m).bit_length() - 1)
                i_cols.append(col)
                m &= m - 1
            col += 1
    item_mat = sparse.coo_matrix(
        (np.ones(len(i_rows)), (i_rows, i_cols)), shape=(item_count, nv)
    ).tocsc()
    bidder_mat = sparse.coo_matrix(
        (np.ones(len(b_rows)), (b_rows, b_cols)), shape=(n, nv)
    ).tocsc()
    try:
        if mandatory:
            res = linprog(
                c,
                A_ub=item_mat,
                b_ub=np.full(item_count, float(quota)),
                A_eq=bidder_mat,
                b_eq=np.ones(n),
                bounds=(0, None),
                method="highs",
            )
        else:
            res = linprog(
                c,
                A_ub=sparse.vstack([bidder_mat, item_mat]).tocsc(),
                b_ub=np.concatenate([np.ones(n), np.full(item_count, float(quota))]),
                bounds=(0, None),
                method="highs",
            )
    except Exception:  # pragma: no cover - defensive: pricing is optional
        return None
    if not res.success:
        return None
    marginals = res.ineqlin.marginals
    item_marginals = marginals if mandatory else marginals[n:]
    prices = np.maximum(0.0, -np.asarray(item_marginals, dtype=float))
    return prices, np.asarray(res.x, dtype=float)


def _optimize_prices(
    tables: list[_BidderTable],
    item_count: int,
    quota: int,
    lower_bound: float,
    rounds: int = 120,
) -> np.ndarray:
    """Projected subgradient descent on the Lagrangian dual of the item
    constraints.

    Minimizes L(p) = sum_t max_S (v_t(S) - p(S)) + quota * sum_j p_j over
    p >= 0; any p gives an admissible bound, so the best prices found are
    simply kept. The step halves whenever L stops improving; gradient
    components pushing an already-zero price further down are projected
    out. Returns zero prices when an instance is not priceable.
    """
    if len(tables) < 2:
        return np.zeros(item_count)
    for t in tables:
        if t.exact is None or len(t.items) > _PRICE_BITS_CAP:
            return np.zeros(item_count)
    bits_cache: dict[int, np.ndarray] = {}
    for t in tables:
        m = len(t.items)
        if m not in bits_cache:
            bits_cache[m] = ((np.arange(1 << m, dtype=np.int64)[:, None] >> np.arange(m)) & 1).astype(
                float
            )

    def evaluate(p: np.ndarray) -> tuple[float, np.ndarray]:
        usage = np.zeros(item_count)
        l_total = quota * float(p.sum())
        for t in tables:
            m = len(t.items)
            if m == 0:
                l_total += float(t.exact[0])
                continue
            adj = t.exact - bits_cache[m] @ p[t.items]
            idx = int(np.argmax(adj))
            l_total += float(adj[idx])
            for b in range(m):
                if idx >> b & 1:
                    usage[t.items[b]] += 1.0
        return l_total, usage

    # An infeasible mandatory instance has an unbounded dual; capping the
    # prices keeps the search able to walk to (and report) the blocked
    # bidder instead of being cut off at the root.
    price_cap = max(float(np.max(t.exact)) for t in tables)
    best_p = np.zeros(item_count)
    best_l, best_usage = evaluate(best_p)
    alpha = 0.5
    fails = 0
    for _ in range(rounds):
        gap = best_l - lower_bound
        if gap <= 1e-9 * max(1.0, abs(lower_bound)):
            break
        g = quota - best_usage
        g[(best_p <= 0.0) & (g > 0.0)] = 0.0  # projection at the boundary
        norm = float(g @ g)
        if norm == 0.0:
            break
        cand = np.minimum(np.maximum(0.0, best_p - alpha * gap / norm * g), price_cap)
        l_cand, usage_cand = evaluate(cand)
        if l_cand < best_l - 1e-12 * max(1.0, abs(best_l)):
            best_l, best_p, best_usage = l_cand, cand, usage_cand
            alpha = min(alpha * 1.2, 2.0)
            fails = 0
        else:
            alpha *= 0.5
            fails += 1
            if fails > 10 or alpha < 1e-4:
                break
    return _refine_prices_cd(tables, best_p, item_count, quota, price_cap)


def _refine_prices_cd(
    tables: list[_BidderTable],
    p0: np.ndarray,
    item_count: int,
    quota: int,
    price_cap: float = math.inf,
    sweeps: int = 12,
) -> np.ndarray:
    """Exact coordinate descent on the piecewise-linear dual.

    For one price x = p_j with the rest fixed, L(x) is q*x plus a sum of
    hinge terms max(a_t, c_t - x), so the minimizer is the (q+1)-th
    largest positive (c_t - a_t). Sweeping items until no coordinate moves
    typically lands within rounding of the LP dual optimum.
    """
    p = p0.copy()
    adjs: list[np.ndarray | None] = []
    by_item: dict[int, list[int]] = {}
    for ti, t in enumerate(tables):
        m = len(t.items)
        bits = (np.arange(1 << m, dtype=np.int64)[:, None] >> np.arange(m)) & 1
        adjs.append(t.exact - bits @ p[t.items])
        for b, item in enumerate(t.items):
            by_item.setdefault(item, []).append(ti)
    items = sorted(by_item)
    for _ in range(sweeps):
        moved = False
        for j in items:
            x_cur = float(p[j])
            deltas = []
            holders = by_item[j]
            for ti in holders:
                t = tables[ti]
                b = t.items.index(j)
                view = adjs[ti].reshape(-1, 2, 1 << b)
                a_t = float(view[:, 0, :].max())
                c_t = float(view[:, 1, :].max()) + x_cur
                deltas.append(c_t - a_t)
            deltas = sorted((d for d in deltas if d > 0.0), reverse=True)
            x_new = min(deltas[quota] if len(deltas) > quota else 0.0, price_cap)
            if abs(x_new - x_cur) > 1e-12 * max(1.0, x_cur):
                shift = x_cur - x_new
                for ti in holders:
                    b = tables[ti].items.index(j)
                    view = adjs[ti].reshape(-1, 2, 1 << b)
                    view[:, 1, :] += shift
                p[j] = x_new
                moved = True
        if not moved:
            break
    return p


def _greedy_ca_incumbent(
    per_bidder: list[list[tuple[int, float, int]]]
) -> tuple[float, list[int]]:
    """Density-greedy feasible solution used as the initial incumbent.

    Its value is recomputed in ascending bidder order so it is comparable
    bit for bit with search-path sums.
    """
    ranked = [
        (mask, value, row, t)
        for t, group in enumerate(per_bidder)
        for mask, value, row in group
    ]
    ranked.sort(key=lambda x: (-x[1] / x[0].bit_count(), -x[1], x[3], x[2]))
    used = 0
    taken: dict[int, tuple[int, float]] = {}
    for mask, value, row, t in ranked:
        if t not in taken and mask & used == 0:
            taken[t] = (row, value)
            used |= mask
    val = 0.0
    rows = []
    for t in sorted(taken):
        row, value = taken[t]
        val += value
        rows.append(row)
    return val, rows


def _greedy_rca_incumbent(
    per_bidder: list[list[tuple[int, float, int, list[int], float]]],
    q_bs: int,
    item_count: int,
    priced: bool = False,
) -> tuple[float, list[int]] | None:
    """Sequential feasible choice per bidder, by raw or price-adjusted
    value; None when stuck."""
    counts = [0] * item_count
    rows: list[int] = []
    val = 0.0
    for group in per_bidder:
        best = None
        for mask, value, row, items, pm in group:
            score = value - pm if priced else value
            if (best is None or score > best[0]) and all(counts[it] < q_bs for it in items):
                best = (score, value, row, items)
        if best is None:
            return None
        _, value, row, items = best
        for it in items:
            counts[it] += 1
        rows.append(row)
        val += value
    return val, rows


def _price_guided_incumbent_ca(
    work: list[list[tuple[int, float, int, float]]]
) -> tuple[float, list[int], list[int]]:
    """Feasible solution taking each bidder's best price-adjusted bid.

    Returns (ascending-order value, accepted rows, per-bidder masks).
    """
    used = 0
    masks = [0] * len(work)
    taken: list[tuple[int, float]] = []
    for t, group in enumerate(work):
        best = None
        for mask, value, row, pm in group:
            if mask & used == 0 and value - pm > (best[0] if best else 0.0):
                best = (value - pm, value, row, mask)
        if best is not None:
            used |= best[3]
            masks[t] = best[3]
            taken.append((best[2], best[1]))
    val = 0.0
    rows = []
    for row, value in taken:
        val += value
        rows.append(row)
    return val, rows, masks


def _lp_rounded_masks_rca(
    assignable: list[list[tuple[int, float, int]]],
    xs: np.ndarray,
    q_bs: int,
    item_count: int,
) -> list[int] | None:
    """Greedy LP-primal rounding with every bidder served; None when stuck."""
    order = []
    col = 0
    for t, g in enumerate(assignable):
        for mask, value, _ in g:
            order.append((float(xs[col]), value, t, mask))
            col += 1
    order.sort(key=lambda e: (-e[0], -e[1]))
    counts = [0] * item_count
    masks = [0] * len(assignable)

    def fits(mask: int) -> bool:
        m = mask
        while m:
            if counts[(m & -m).bit_length() - 1] >= q_bs:
                return False
            m &= m - 1
        return True

    def bump(mask: int, d: int) -> None:
        m = mask
        while m:
            counts[(m & -m).bit_length() - 1] += d
            m &= m - 1

    for x, _, t, mask in order:
        if masks[t] == 0 and fits(mask):
            masks[t] = mask
            bump(mask, 1)
    for t, g in enumerate(assignable):
        if masks[t] == 0:
            best = None
            for mask, value, _ in g:
                if fits(mask) and (best is None or value > best[0]):
                    best = (value, mask)
            if best is None:
                return None
            masks[t] = best[1]
            bump(best[1], 1)
    return masks


def _coordinate_ascent_rca(
    tables: list["_BidderTable"],
    assignable: list[list[tuple[int, float, int]]],
    masks: list[int] | None,
    q_bs: int,
    item_count: int,
    max_rounds: int = 30,
) -> tuple[float, list[int]] | None:
    """Polish a feasible all-bidders assignment by unilateral re-optimization."""
    if masks is None:
        return None
    argmax = [t.argmax_table() if t.exact is not None else None for t in tables]
    by_mask = [{m: (v, r) for m, v, r in g} for g in assignable]
    counts = [0] * item_count

    def bump(mask: int, d: int) -> None:
        m = mask
        while m:
            counts[(m & -m).bit_length() - 1] += d
            m &= m - 1

    for mask in masks:
        bump(mask, 1)
    for _ in range(max_rounds):
        improved = False
        for t, table in enumerate(argmax):
            if table is None:
                continue
            own = masks[t]
            avail = 0
            for j in range(item_count):
                if counts[j] - (1 if own >> j & 1 else 0) < q_bs:
                    avail |= 1 << j
            best_v, best_mask = table[avail & tables[t].union]
            if best_v > by_mask[t][own][0]:
                bump(own, -1)
                bump(best_mask, 1)
                masks[t] = best_mask
                improved = True
        if not improved:
            break
    val = 0.0
    rows = []
    for t, mask in enumerate(masks):
        value, row = by_mask[t][mask]
        val += value
        rows.append(row)
    return val, rows


def _lp_rounded_masks_ca(
    per_bidder: list[list[tuple[int, float, int]]], xs: np.ndarray
) -> list[int]:
    """Greedy rounding of the LP primal: accept bids by descending x."""
    order = []
    col = 0
    for t, g in enumerate(per_bidder):
        for mask, value, _ in g:
            order.append((float(xs[col]), value, t, mask))
            col += 1
    order.sort(key=lambda e: (-e[0], -e[1]))
    used = 0
    masks = [0] * len(per_bidder)
    for x, _, t, mask in order:
        if x <= 1e-9:
            break
        if masks[t] == 0 and mask & used == 0:
            masks[t] = mask
            used |= mask
    return masks


def _local_search_ca(
    tables: list["_BidderTable"],
    by_mask: list[dict[int, tuple[float, int]]],
    argmax: list[dict[int, tuple[float, int]] | None],
    masks: list[int],
    item_count: int,
    max_rounds: int = 30,
) -> tuple[float, list[int]]:
    """Polish an incumbent with unilateral and pairwise re-optimization.

    Single moves: a bidder takes the best bundle within the items the
    others leave free (one argmax-table lookup). Pair moves: two bidders
    with overlapping unions jointly re-split their shared free items,
    which untangles the alternating chains that single moves cannot. The
    returned value is accumulated in ascending bidder order.
    """
    n = len(tables)
    full = (1 << item_count) - 1
    used = 0
    for m in masks:
        used |= m

    def value_of(t: int) -> float:
        return by_mask[t][masks[t]][0] if masks[t] else 0.0

    pairs = [
        (s, t)
        for s in range(n)
        for t in range(s + 1, n)
        if tables[s].union & tables[t].union and argmax[s] and argmax[t]
    ]
    for _ in range(max_rounds):
        improved = False
        for t, table in enumerate(argmax):
            if table is None:
                continue
            cur_v = value_of(t)
            avail = (full ^ used) | masks[t]
            best_v, best_mask = table[avail & tables[t].union]
            if best_v > cur_v:
                used = (used ^ masks[t]) | best_mask
                masks[t] = best_mask
                improved = True
        for s, t in pairs:
            shared = tables[s].union & tables[t].union
            free = full ^ used
            pool = free | masks[s] | masks[t]
            sh = shared & pool
            if sh.bit_count() > 8:
                continue
            base_s = pool & tables[s].union & ~shared
            base_t = pool & tables[t].union & ~shared
            cur = value_of(s) + value_of(t)
            best = None
            sub = sh
            while True:
                vs, ms = argmax[s][base_s | sub]
                vt, mt = argmax[t][base_t | (sh ^ sub)]
                if vs + vt > cur and (best is None or vs + vt > best[0]):
                    best = (vs + vt, ms, mt)
                if sub == 0:
                    break
                sub = (sub - 1) & sh
            if best is not None:
                used ^= masks[s] | masks[t]
                masks[s], masks[t] = best[1], best[2]
                used |= best[1] | best[2]
                improved = True
        if not improved:
            break
    val = 0.0
    rows = []
    for t, m in enumerate(masks):
        if m:
            value, row = by_mask[t][m]
            val += value
            rows.append(row)
    return val, rows


def _item_branching_applicable(
    groups: dict[int, list[tuple[int, float, int]]], item_count: int
) -> bool:
    """The channel-branching engine needs every bidder to bid on all
    non-empty subsets of a small union (pipeline-generated instances do)
    and items wanted by few bidders."""
    mult = [0] * item_count
    for g in groups.values():
        union = 0
        for mask, _, _ in g:
            union |= mask
        m = union.bit_count()
        if m > 8 or len(g) != (1 << m) - 1:
            return False
        while union:
            mult[(union & -union).bit_length() - 1] += 1
            union &= union - 1
    return bool(mult) and max(mult) <= 3


def _solve_ca_items(
    bids: BidMatrix,
    groups: dict[int, list[tuple[int, float, int]]],
    prices: np.ndarray,
    incumbent_val: float,
    incumbent_rows: list[int],
    timeout_s: float,
) -> WdpSolution:
    """Exact search branching on channels instead of bidders.

    Each contested channel is given to one of its interested bidders (by
    value monotonicity some optimum assigns every channel, so there is no
    "nobody" branch); single-bidder channels are pre-assigned. The bound
    conditions each bidder's best completion on the channels already
    forced upon it, via lazily memoized tables
    t3(F, A) = max_{X subseteq A} (v(F | X) - p(X)), and adds the price
    mass of the undecided channels. Leaf objectives are accumulated in
    ascending bidder order.
    """
    bidders = sorted(groups)
    n = len(bidders)
    value_of: list[dict[int, float]] = []
    row_of: list[dict[int, int]] = []
    unions = []
    for b in bidders:
        vals = {0: 0.0}
        rows_d = {}
        union = 0
        for mask, v, r in groups[b]:
            vals[mask] = v
            rows_d[mask] = r
            union |= mask
        value_of.append(vals)
        row_of.append(rows_d)
        unions.append(union)
    plist = prices.tolist()

    interested: list[list[int]] = [[] for _ in range(bids.item_count)]
    for t, u in enumerate(unions):
        mm = u
        while mm:
            j = (mm & -mm).bit_length() - 1
            interested[j].append(t)
            mm &= mm - 1
    forced = [0] * n
    contested = []
    for j, lst in enumerate(interested):
        if len(lst) == 1:
            forced[lst[0]] |= 1 << j
        elif len(lst) >= 2:
            contested.append(j)
    contested.sort(key=lambda j: (-len(interested[j]), -plist[j], j))
    d0 = 0
    pmass0 = 0.0
    for j in contested:
        d0 |= 1 << j
        pmass0 += plist[j]

    t3_memo: list[dict[tuple[int, int], float]] = [dict() for _ in range(n)]

    def t3(t: int, f: int, a: int) -> float:
        memo = t3_memo[t]
        key = (f, a)
        got = memo.get(key)
        if got is not None:
            return got
        if a == 0:
            res = value_of[t][f]
        else:
            bit = a & -a
            res = t3(t, f, a ^ bit)
            alt = t3(t, f | bit, a ^ bit) - plist[bit.bit_length() - 1]
            if alt > res:
                res = alt
        memo[key] = res
        return res

    deadline = time.perf_counter() + timeout_s
    timed_out = time.perf_counter() > deadline
    best_val = incumbent_val
    best_forced: list[int] | None = None
    terms = [t3(t, forced[t], d0 & unions[t]) for t in range(n)]
    nodes = 0

    def dfs(idx: int, d: int, pmass: float, total: float) -> None:
        nonlocal best_val, best_forced, nodes, timed_out
        if timed_out:
            return
        nodes += 1
        if nodes % 4096 == 0 and time.perf_counter() > deadline:
            timed_out = True
            return
        if idx == len(contested):
            val = 0.0
            for t in range(n):
                val += value_of[t][forced[t]]
            if val > best_val:
                best_val = val
                best_forced = forced.copy()
            return
        j = contested[idx]
        bitj = 1 << j
        child_d = d ^ bitj
        child_p = pmass - plist[j]
        affected = interested[j]
        old = {t: terms[t] for t in affected}
        for winner in affected:
            child_total = total
            for t in affected:
                f = forced[t] | (bitj if t == winner else 0)
                new_term = t3(t, f, child_d & unions[t])
                child_total += new_term - old[t]
                terms[t] = new_term
            if _slacked(child_total + child_p) > best_val:
                forced[winner] |= bitj
                dfs(idx + 1, child_d, child_p, child_total)
                forced[winner] ^= bitj
        for t in affected:
            terms[t] = old[t]

    if _slacked(sum(terms) + pmass0) > best_val:
        dfs(0, d0, pmass0, sum(terms))
    if best_forced is None:
        return WdpSolution(incumbent_rows, incumbent_val, not timed_out)
    obj = 0.0
    rows = []
    for t, m in enumerate(best_forced):
        if m:
            obj += value_of[t][m]
            rows.append(row_of[t][m])
    return WdpSolution(rows, obj, not timed_out)


def solve_ca(
    bids: BidMatrix, timeout_s: float = 10.0, debug_check_bounds: bool = False
) -> WdpSolution:
    """Exact winner determination with item quota 1.

    Depth-first branch and bound over bidders; each bidder's bids are tried
    in value-density order, then the skip option. The admissible upper
    bound sums, over the remaining bidders, each bidder's best
    price-adjusted value still achievable within the unused items, plus the
    price mass of the unused items (Lagrangian bound; with zero prices this
    reduces to the plain item-relaxed per-bidder bound). States dominated
    by an earlier visit (same depth, same relevant used-item set, no higher
    accumulated value) are pruned. Returns the best incumbent with
    proven_optimal=False on timeout.
    """
    groups = _group_by_bidder(bids)
    bidders = sorted(groups)
    n = len(bidders)
    if n == 0:
        return WdpSolution([], 0.0, True)

    # Zero-value bids can never beat the skip option; dropping them keeps
    # the optimal objective (tie solutions may differ).
    per_bidder = [[t for t in groups[b] if t[1] > 0.0] for b in bidders]
    raw_unions = [0] * n
    for i, g in enumerate(per_bidder):
        for mask, _, _ in g:
            raw_unions[i] |= mask
    prefix_or = [0] * (n + 1)
    suffix_or = [0] * (n + 1)
    for i in range(n):
        prefix_or[i + 1] = prefix_or[i] | raw_unions[i]
    for i in range(n - 1, -1, -1):
        suffix_or[i] = suffix_or[i + 1] | raw_unions[i]
    per_bidder = [
        _density_sorted(_reduce_group(g, prefix_or[i] | suffix_or[i + 1]))
        for i, g in enumerate(per_bidder)
    ]
    tables = [_BidderTable(g, mandatory=False) for g in per_bidder]
    best_val, best_rows = _greedy_ca_incumbent(per_bidder)
    relax = _lp_relaxation(per_bidder, bids.item_count, 1, mandatory=False)
    if relax is None:
        prices = _optimize_prices(tables, bids.item_count, 1, best_val)
        xs = None
    else:
        prices, xs = relax
    plist = prices.tolist()

    def price_mass(mask: int) -> float:
        total = 0.0
        while mask:
            total += plist[(mask & -mask).bit_length() - 1]
            mask &= mask - 1
        return total

    work = [
        [(mask, value, row, price_mass(mask)) for mask, value, row in g] for g in per_bidder
    ]
    by_mask = [{mask: (value, row) for mask, value, row in g} for g in per_bidder]
    g_val, g_rows, g_masks = _price_guided_incumbent_ca(work)
    if g_val > best_val:
        best_val, best_rows = g_val, g_rows
    argmax = [t.argmax_table() if t.exact is not None else None for t in tables]
    seeds = [g_masks]
    if xs is not None:
        seeds.append(_lp_rounded_masks_ca(per_bidder, xs))
    best_masks = list(seeds[0])
    for seed_masks in seeds:
        polished = list(seed_masks)
        ca_val, ca_rows = _local_search_ca(tables, by_mask, argmax, polished, bids.item_count)
        if ca_val > best_val:
            best_val, best_rows = ca_val, ca_rows
            best_masks = polished
    # Deterministic perturbation restarts: clear a third of the bidders and
    # re-polish, keeping the best incumbent found.
    restart_rng = np.random.default_rng(len(bids.rows) * 1000003 + bids.item_count)
    for _ in range(3):
        masks = list(best_masks)
        for t in restart_rng.choice(n, size=max(1, n // 3), replace=False):
            masks[int(t)] = 0
        ca_val, ca_rows = _local_search_ca(tables, by_mask, argmax, masks, bids.item_count)
        if ca_val > best_val:
            best_val, best_rows = ca_val, ca_rows
            best_masks = masks
    if _item_branching_applicable(groups, bids.item_count):
        return _solve_ca_items(bids, groups, prices, best_val, best_rows, timeout_s)
    for t in tables:
        if t.exact is not None:
            t.build_lookup(prices)
    priced_max = [
        t.lookup[t.union] if t.lookup is not None else t.static_max for t in tables
    ]
    priced_suffix = [0.0] * (n + 1)
    relevant = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        priced_suffix[i] = priced_suffix[i + 1] + priced_max[i]
        relevant[i] = relevant[i + 1] | tables[i].union
    full_mask = (1 << bids.item_count) - 1
    # Price mass is tracked over items still relevant to remaining bidders;
    # departures[i] lists priced items whose last interested bidder is i.
    departures: list[list[tuple[int, float]]] = []
    for i in range(n):
        gone = relevant[i] & ~relevant[i + 1]
        dep = []
        while gone:
            j = (gone & -gone).bit_length() - 1
            gone &= gone - 1
            if plist[j] > 0.0:
                dep.append((1 << j, plist[j]))
        departures.append(dep)
    root_price_mass = 0.0
    rel0 = relevant[0]
    while rel0:
        root_price_mass += plist[(rel0 & -rel0).bit_length() - 1]
        rel0 &= rel0 - 1

    deadline = time.perf_counter() + timeout_s
    timed_out = False
    chosen: list[int] = []
    memo: dict[tuple[int, int], float] = {}
    nodes = 0

    def rest_bound(i: int, used: int) -> float:
        avail = full_mask ^ used
        total = 0.0
        for t in range(i, n):
            table = tables[t]
            if table.lookup is None:
                total += table.static_max
            else:
                total += table.lookup[avail & table.union]
        return total

    def exact_rest(i: int, used: int) -> float:
        if i == n:
            return 0.0
        best = exact_rest(i + 1, used)
        for mask, value, _, _ in work[i]:
            if mask & used == 0:
                cand = value + exact_rest(i + 1, used | mask)
                if cand > best:
                    best = cand
        return best

    def dfs(i: int, used: int, val: float, avail_p: float) -> None:
        nonlocal best_val, best_rows, nodes, timed_out
        if timed_out:
            return
        nodes += 1
        if nodes % 4096 == 0 and time.perf_counter() > deadline:
            timed_out = True
            return
        if i == n:
            if val > best_val:
                best_val = val
                best_rows = chosen.copy()
            return
        key = (i, used & relevant[i])
        prev = memo.get(key)
        if prev is not None and prev >= val:
            return
        if len(memo) < 4_000_000:
            memo[key] = val
        bound = _slacked(rest_bound(i, used) + avail_p)
        if debug_check_bounds and n - i <= 3:
            assert bound >= exact_rest(i, used) - 1e-9 * max(1.0, abs(bound))
        if val + bound <= best_val:
            return
        tail = priced_suffix[i + 1]
        dep = departures[i]
        for mask, value, row, pm in work[i]:
            if mask & used == 0:
                child_p = avail_p - pm
                for bit, pj in dep:
                    if bit & used == 0 and bit & mask == 0:
                        child_p -= pj
                if val + value + _slacked(tail + child_p) > best_val:
                    chosen.append(row)
                    dfs(i + 1, used | mask, val + value, child_p)
                    chosen.pop()
        child_p = avail_p
        for bit, pj in dep:
            if bit & used == 0:
                child_p -= pj
        if val + _slacked(tail + child_p) > best_val:
            dfs(i + 1, used, val, child_p)

    timed_out = time.perf_counter() > deadline
    dfs(0, 0, 0.0, root_price_mass)
    return WdpSolution(best_rows, best_val, not timed_out)


def solve_rca(
    bids: BidMatrix,
    cfg: RcaConfig,
    channels_per_bs_capped: Sequence[int],
    timeout_s: float = 10.0,
) -> WdpSolution:
    """Exact winner determination for the relaxed BS-level auction.

    Constraints: exactly one accepted bundle per tenant whose capped
    channel total reaches `min_channels` (the at-most-one and the minimum
    constraints jointly force exactly one), and each BS appears in at most
    `q_bs` accepted bundles. Same branch-and-bound engine with the item
    quota raised to q_bs and every bidder mandatory. Raises RcaInfeasible
    when the search proves no feasible assignment exists, naming the first
    blocked tenant.
    """
    groups = _group_by_bidder(bids)
    capped = list(channels_per_bs_capped)

    def channel_total(mask: int) -> int:
        total = 0
        while mask:
            total += capped[(mask & -mask).bit_length() - 1]
            mask &= mask - 1
        return total

    def item_list(mask: int) -> list[int]:
        return [i for i in range(bids.item_count) if mask >> i & 1]

    assignable: list[list[tuple[int, float, int]]] = []
    for b in range(bids.bidder_count):
        rows_b = [
            (mask, value, row)
            for mask, value, row in groups.get(b, [])
            if channel_total(mask) >= cfg.min_channels
        ]
        if not rows_b:
            raise RcaInfeasible(b, "no bundle satisfies the minimum channel requirement")
        assignable.append(_density_sorted(rows_b))

    n = bids.bidder_count
    tables = [_BidderTable(g, mandatory=True) for g in assignable]
    plain_work = [[(m, v, r, item_list(m), 0.0) for m, v, r in g] for g in assignable]
    greedy = _greedy_rca_incumbent(plain_work, cfg.q_bs, bids.item_count)
    lower = greedy[0] if greedy is not None else 0.0
    relax = _lp_relaxation(assignable, bids.item_count, cfg.q_bs, mandatory=True)
    if relax is None:
        prices = _optimize_prices(tables, bids.item_count, cfg.q_bs, lower)
        xs = None
    else:
        prices, xs = relax
    plist = prices.tolist()

    def price_mass(mask: int) -> float:
        total = 0.0
        while mask:
            total += plist[(mask & -mask).bit_length() - 1]
            mask &= mask - 1
        return total

    work = [
        [(m, v, r, items, price_mass(m)) for m, v, r, items, _ in g] for g in plain_work
    ]
    guided = _greedy_rca_incumbent(work, cfg.q_bs, bids.item_count, priced=True)
    if guided is not None and (greedy is None or guided[0] > greedy[0]):
        greedy = guided
    if xs is not None:
        rounded = _lp_rounded_masks_rca(assignable, xs, cfg.q_bs, bids.item_count)
        improved = _coordinate_ascent_rca(
            tables, assignable, rounded, cfg.q_bs, bids.item_count
        )
        if improved is not None and (greedy is None or improved[0] > greedy[0]):
            greedy = improved
    for t in tables:
        if t.exact is not None:
            t.build_lookup(prices)
    priced_max = [
        t.lookup[t.union] if t.lookup is not None else t.static_max for t in tables
    ]
    suffix = [0.0] * (n + 1)
    relevant = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + priced_max[i]
        relevant[i] = relevant[i + 1] | tables[i].union
    departures: list[list[tuple[int, int, float]]] = []
    for i in range(n):
        gone = relevant[i] & ~relevant[i + 1]
        dep = []
        while gone:
            j = (gone & -gone).bit_length() - 1
            gone &= gone - 1
            if plist[j] > 0.0:
                dep.append((1 << j, j, plist[j]))
        departures.append(dep)

    deadline = time.perf_counter() + timeout_s
    timed_out = False
    best_val, best_rows = greedy if greedy is not None else (-math.inf, [])
    chosen: list[int] = []
    counts = [0] * bids.item_count
    memo: dict[tuple[int, bytes], float] = {}
    first_blocked = n
    nodes = 0
    full_mask = (1 << bids.item_count) - 1
    root_price_mass = 0.0
    rel0 = relevant[0]
    while rel0:
        root_price_mass += cfg.q_bs * plist[(rel0 & -rel0).bit_length() - 1]
        rel0 &= rel0 - 1

    def rest_bound(i: int, avail: int) -> float:
        nonlocal first_blocked
        total = 0.0
        for t in range(i, n):
            table = tables[t]
            if table.lookup is None:
                total += table.static_max
                continue
            v = table.lookup[avail & table.union]
            if v < -1e200:
                if t < first_blocked:
                    first_blocked = t
                return _NEG
            total += v
        return total

    def dfs(i: int, avail: int, val: float, avail_p: float) -> None:
        nonlocal best_val, best_rows, nodes, timed_out, first_blocked
        if timed_out:
            return
        nodes += 1
        if nodes % 4096 == 0 and time.perf_counter() > deadline:
            timed_out = True
            return
        if i == n:
            if val > best_val:
                best_val = val
                best_rows = chosen.copy()
            return
        key = (i, bytes(counts))
        prev = memo.get(key)
        if prev is not None and prev >= val:
            return
        if len(memo) < 4_000_000:
            memo[key] = val
        rb = rest_bound(i, avail)
        if rb < -1e200 or val + _slacked(rb + avail_p) <= best_val:
            return
        tail = suffix[i + 1]
        dep = departures[i]
        any_feasible = False
        for mask, value, row, items, pm in work[i]:
            if mask & avail == mask:
                any_feasible = True
                child_p = avail_p - pm
                if dep:
                    for bit, j, pj in dep:
                        left = cfg.q_bs - counts[j] - (1 if bit & mask else 0)
                        if left > 0:
                            child_p -= pj * left
                if val + value + _slacked(tail + child_p) <= best_val:
                    continue
                child_avail = avail
                for it in items:
                    counts[it] += 1
                    if counts[it] >= cfg.q_bs:
                        child_avail &= ~(1 << it)
                chosen.append(row)
                dfs(i + 1, child_avail, val + value, child_p)
                chosen.pop()
                for it in items:
                    counts[it] -= 1
        if not any_feasible and i < first_blocked:
            first_blocked = i

    timed_out = time.perf_counter() > deadline
    dfs(0, full_mask, 0.0, root_price_mass)
    if best_val == -math.inf:
        if timed_out:
            return WdpSolution([], 0.0, False)
        raise RcaInfeasible(first_blocked, "no feasible joint assignment under the BS quota")
    return WdpSolution(best_rows, best_val, not timed_out)


def brute_force_wdp(
    bids: BidMatrix,
    item_quota: int = 1,
    require_all_bidders: bool = False,
    min_channels: int | None = None,
    channels_per_item: Sequence[int] | None = None,
    max_rows: int = 24,
) -> WdpSolution:
    """Independent exactness oracle: exhaustive enumeration, no bounds.

    Enumerates every acceptance vector respecting per-bidder exclusivity,
    filtering only by hard feasibility. Intended for tests on small
    instances; raises InstanceTooLarge above `max_rows` rows.
    """
    if len(bids.rows) > max_rows:
        raise InstanceTooLarge(f"{len(bids.rows)} rows exceeds the enumeration budget {max_rows}")
    groups = _group_by_bidder(bids)
    bidders = list(range(bids.bidder_count)) if require_all_bidders else sorted(groups)
    n = len(bidders)

    def assignable(mask: int) -> bool:
        if min_channels is None:
            return True
        total = 0
        m = mask
        while m:
            total += channels_per_item[(m & -m).bit_length() - 1]
            m &= m - 1
        return total >= min_channels

    options = []
    for b in bidders:
        opts = [(m, v, r) for m, v, r in groups.get(b, []) if assignable(m)]
        if require_all_bidders and not opts:
            raise RcaInfeasible(b, "no bundle satisfies the minimum channel requirement")
        options.append(opts)

    counts = [0] * bids.item_count
    best_val = -math.inf
    best_rows: list[int] = []
    chosen: list[int] = []

    def fits(mask: int) -> bool:
        m = mask
        while m:
            if counts[(m & -m).bit_length() - 1] >= item_quota:
                return False
            m &= m - 1
        return True

    def bump(mask: int, delta: int) -> None:
        m = mask
        while m:
            counts[(m & -m).bit_length() - 1] += delta
            m &= m - 1

    def recurse(i: int, val: float) -> None:
        nonlocal best_val, best_rows
        if i == n:
            if val > best_val:
                best_val = val
                best_rows = chosen.copy()
            return
        if not require_all_bidders:
            recurse(i + 1, val)
        for mask, value, row in options[i]:
            if fits(mask):
                bump(mask, 1)
                chosen.append(row)
                recurse(i + 1, val + value)
                chosen.pop()
                bump(mask, -1)

    recurse(0, 0.0)
    if best_val == -math.inf:
        if require_all_bidders:
            raise RcaInfeasible(-1, "no feasible joint assignment")
        best_val, best_rows = 0.0, []
    return WdpSolution(best_rows, best_val, True)


def verify_solution(
    bids: BidMatrix,
    solution: WdpSolution,
    item_quota: int = 1,
    require_all_bidders: bool = False,
    min_channels: int | None = None,
    channels_per_item: Sequence[int] | None = None,
) -> None:
    """Post-hoc constraint checker, independent of solver bookkeeping.

    Recomputes the objective (summing accepted values in ascending bidder
    order, the same order the solvers accumulate in) and re-verifies every
    constraint from the raw rows. Raises AssertionError on any violation.
    """
    rows = [bids.rows[i] for i in solution.accepted]
    by_bidder: dict[int, int] = {}
    counts = [0] * bids.item_count
    for r in rows:
        by_bidder[r.bidder] = by_bidder.get(r.bidder, 0) + 1
        m = r.bundle
        while m:
            counts[(m & -m).bit_length() - 1] += 1
            m &= m - 1
    assert all(c <= 1 for c in by_bidder.values()), "a bidder received more than one bundle"
    assert all(c <= item_quota for c in counts), "an item exceeded its quota"
    if require_all_bidders:
        assert set(by_bidder) == set(range(bids.bidder_count)), "a mandatory bidder is unassigned"
    if min_channels is not None:
        for r in rows:
            total = 0
            m = r.bundle
            while m:
                total += channels_per_item[(m & -m).bit_length() - 1]
                m &= m - 1
            assert total >= min_channels, "an accepted bundle misses the channel minimum"
    objective = 0.0
    for r in sorted(rows, key=lambda r: r.bidder):
        objective += r.value
    assert objective == solution.objective, "objective does not match accepted rows"
