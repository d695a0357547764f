import numpy as np
import pytest

from chanalloc.connectivity import K_REF_DB
from chanalloc.scenario import Scenario


def make_scenario(
    tenant_positions,
    bs_positions,
    channels_per_bs,
    area=(100.0, 50.0),
    fading_db=None,
    utility_bounds=None,
    seed=0,
    setup="TEST",
):
    """Hand-built scenario with clear-LOS fading and generous bounds by default."""
    n_t = len(tenant_positions)
    n_bs = len(bs_positions)
    if fading_db is None:
        fading_db = [[K_REF_DB] * n_bs for _ in range(n_t)]
    if utility_bounds is None:
        utility_bounds = [(1e3, 1e9)] * n_t
    owner = [i for i, n in enumerate(channels_per_bs) for _ in range(n)]
    return Scenario(
        setup=setup,
        area=area,
        tenant_positions=[tuple(p) for p in tenant_positions],
        bs_positions=[tuple(p) for p in bs_positions],
        channels_per_bs=list(channels_per_bs),
        channel_owner=owner,
        fading_db=fading_db,
        utility_bounds=list(utility_bounds),
        seed=seed,
    )


def random_tiny_scenario(rng, n_tenants=None, n_bs=None, max_channels=8, area=(40.0, 20.0)):
    """Small random instance for oracle-based tests (n_T <= 3, channels <= 8)."""
    w, h = area
    n_t = int(n_tenants if n_tenants is not None else rng.integers(1, 4))
    n_b = int(n_bs if n_bs is not None else rng.integers(2, 5))
    tenants = [(float(x), float(y)) for x, y in zip(rng.uniform(1, w - 1, n_t), rng.uniform(1, h - 1, n_t))]
    bss = []
    for t in rng.uniform(0, 2 * (w + h), n_b):
        t = float(t)
        if t < w:
            bss.append((t, 0.0))
        elif t < w + h:
            bss.append((w, t - w))
        elif t < 2 * w + h:
            bss.append((2 * w + h - t, h))
        else:
            bss.append((0.0, 2 * (w + h) - t))
    counts = []
    remaining = int(rng.integers(n_b, max_channels + 1))
    for i in range(n_b):
        hi = remaining - (n_b - i - 1)
        c = int(rng.integers(1, max(2, hi + 1))) if i < n_b - 1 else remaining
        c = max(1, min(c, hi))
        counts.append(c)
        remaining -= c
    k = np.full((n_t, n_b), K_REF_DB)
    n_red = int(rng.integers(0, n_t * n_b + 1)) // 3
    if n_red:
        flat = rng.choice(n_t * n_b, size=n_red, replace=False)
        k.flat[flat] = K_REF_DB * rng.uniform(0.2, 0.8, n_red)
    bounds = [(float(a), float(a * rng.uniform(3.0, 8.0))) for a in rng.uniform(2e5, 2e6, n_t)]
    return make_scenario(tenants, bss, counts, area, [list(r) for r in k], bounds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
