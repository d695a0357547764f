"""Independent reference implementations used only to check the real code."""
import itertools

import numpy as np

from chanalloc.connectivity import ConnectivityEvaluator, utility


def assignment_optimum(scenario, evaluator: ConnectivityEvaluator, allowed=None):
    """Exhaustive optimum of the univalent channel assignment problem.

    Enumerates every channel -> (tenant or none) map, restricted to
    `allowed` (prealloc matrix) when given. Returns the best total utility,
    summing per-tenant utilities in ascending tenant order like the
    production pipeline does.
    """
    n_t = scenario.n_tenants
    n_ch = scenario.n_channels
    candidates = []
    for j in range(n_ch):
        opts = [None] + [k for k in range(n_t) if allowed is None or allowed[k][j]]
        candidates.append(opts)
    best = -1.0
    for combo in itertools.product(*candidates):
        masks = [0] * n_t
        for j, k in enumerate(combo):
            if k is not None:
                masks[k] |= 1 << j
        total = 0.0
        for k in range(n_t):
            c_min, c_max = scenario.utility_bounds[k]
            total += utility(evaluator.capacity_of_mask(k, masks[k]), c_min, c_max) if masks[k] else 0.0
        if total > best:
            best = total
    return best


def mc_outage_probability(gammas, threshold, n_samples, seed):
    """Monte-Carlo estimate of P(all Rayleigh channel SNRs < threshold)."""
    rng = np.random.default_rng(seed)
    count = 0
    chunk = 1_000_000
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        below = np.ones(size, dtype=bool)
        for g in gammas:
            below &= rng.exponential(g, size) < threshold
        count += int(below.sum())
        remaining -= size
    return count / n_samples


def naive_summary(samples):
    """Plain-python boxplot summary for cross-checking `summarize`."""
    xs = sorted(samples)
    n = len(xs)

    def interp_quantile(p):
        pos = (n - 1) * p
        lo = int(pos)
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        return xs[lo] * (1 - frac) + xs[hi] * frac

    median = xs[n // 2] if n % 2 else 0.5 * (xs[n // 2 - 1] + xs[n // 2])
    q25 = interp_quantile(0.25)
    q75 = interp_quantile(0.75)
    iqr = q75 - q25
    lo_f, hi_f = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    inside = [x for x in xs if lo_f <= x <= hi_f]
    outliers = [x for x in xs if x < lo_f or x > hi_f]
    return {
        "mean": sum(xs) / n,
        "median": median,
        "q25": q25,
        "q75": q75,
        "whisker_low": inside[0],
        "whisker_high": inside[-1],
        "outliers": outliers,
    }


def all_stable_matchings(profile, quotas):
    """Enumerate all pairwise-stable 0/1 matchings of a tiny instance."""
    from chanalloc.matching import verify_pairwise_stability
    from chanalloc.prealloc import Preallocation

    n_t, n_ch = profile.n_tenants, profile.n_channels
    stable = []
    for bits in itertools.product([0, 1], repeat=n_t * n_ch):
        assign = np.array(bits, dtype=np.int8).reshape(n_t, n_ch)
        if assign.sum(axis=1).max(initial=0) > quotas.q_t:
            continue
        if assign.sum(axis=0).max(initial=0) > quotas.q_ch:
            continue
        ok, _ = verify_pairwise_stability(profile, quotas, Preallocation(assign, "TEST"))
        if ok:
            stable.append(assign)
    return stable
