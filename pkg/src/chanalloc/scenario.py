"""Randomized simulation instances: geometry, channels, fading, bounds.

Three setup classes of increasing size are supported; all randomness is
drawn from labeled substreams of one master seed, so a (setup, seed) pair
always reproduces the same instance bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .connectivity import K_REF_DB, LinkModel, typical_dual_rate
from .rng import substream

# Tenant utility bounds are drawn as Uniform[lo, hi] * R_ref with R_ref the
# dual-channel reference rate of the setup (see connectivity module).
C_MIN_RANGE = (0.25, 0.5)
C_MAX_RANGE = (1.5, 3.0)

OBSTACLE_FRACTION = 0.30
OBSTACLE_FACTOR_RANGE = (0.20, 0.80)


@dataclass(frozen=True)
class SetupClass:
    """Size parameters of one simulation setup."""

    name: str
    area: tuple[float, float]
    n_tenants: int
    n_bs: int
    channels_per_bs: tuple[int, int]  # inclusive range
    max_total_channels: int


SS = SetupClass("SS", (100.0, 50.0), 6, 8, (1, 3), 20)
MS = SetupClass("MS", (120.0, 70.0), 12, 12, (2, 5), 45)
LS = SetupClass("LS", (150.0, 100.0), 20, 16, (3, 6), 60)

SETUP_CLASSES = {"SS": SS, "MS": MS, "LS": LS}


def setup_class(name: str | SetupClass) -> SetupClass:
    if isinstance(name, SetupClass):
        return name
    try:
        return SETUP_CLASSES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown setup class {name!r}; expected one of SS, MS, LS") from None


@dataclass
class Scenario:
    """One immutable simulation instance.

    Arrays are fixed after construction; treat instances as read-only and
    share them freely across threads.
    """

    setup: str
    area: tuple[float, float]
    tenant_positions: list[tuple[float, float]]
    bs_positions: list[tuple[float, float]]
    channels_per_bs: list[int]
    channel_owner: list[int]
    fading_db: list[list[float]]
    utility_bounds: list[tuple[float, float]]
    seed: int

    def __post_init__(self) -> None:
        w, h = self.area
        for x, y in self.tenant_positions:
            if not (0.0 < x < w and 0.0 < y < h):
                raise ValueError(f"tenant at ({x}, {y}) not strictly inside {w}x{h} area")
        for x, y in self.bs_positions:
            on_edge = x in (0.0, w) or y in (0.0, h)
            if not (on_edge and 0.0 <= x <= w and 0.0 <= y <= h):
                raise ValueError(f"BS at ({x}, {y}) not on the area boundary")
        if len(self.channel_owner) != sum(self.channels_per_bs):
            raise ValueError("channel_owner length does not match channels_per_bs")
        for i, n in enumerate(self.channels_per_bs):
            if n <= 0:
                raise ValueError(f"BS {i} offers {n} channels; counts must be positive")
            if sum(1 for o in self.channel_owner if o == i) != n:
                raise ValueError(f"channel_owner inconsistent for BS {i}")
        for row in self.fading_db:
            for k in row:
                if k > K_REF_DB:
                    raise ValueError(f"fading entry {k} dB exceeds K_ref = {K_REF_DB} dB")
        for c_min, c_max in self.utility_bounds:
            if not (0.0 < c_min < c_max):
                raise ValueError(f"utility bounds ({c_min}, {c_max}) must satisfy 0 < min < max")

    @property
    def n_tenants(self) -> int:
        return len(self.tenant_positions)

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_channels(self) -> int:
        return len(self.channel_owner)

    def channels_of_bs(self, bs: int) -> list[int]:
        return [j for j, o in enumerate(self.channel_owner) if o == bs]

    def to_dict(self) -> dict:
        return {
            "setup": self.setup,
            "area": list(self.area),
            "tenant_positions": [list(p) for p in self.tenant_positions],
            "bs_positions": [list(p) for p in self.bs_positions],
            "channels_per_bs": list(self.channels_per_bs),
            "channel_owner": list(self.channel_owner),
            "fading_db": [list(r) for r in self.fading_db],
            "utility_c_min": [b[0] for b in self.utility_bounds],
            "utility_c_max": [b[1] for b in self.utility_bounds],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            setup=d["setup"],
            area=tuple(d["area"]),
            tenant_positions=[tuple(p) for p in d["tenant_positions"]],
            bs_positions=[tuple(p) for p in d["bs_positions"]],
            channels_per_bs=list(d["channels_per_bs"]),
            channel_owner=list(d["channel_owner"]),
            fading_db=[list(r) for r in d["fading_db"]],
            utility_bounds=list(zip(d["utility_c_min"], d["utility_c_max"])),
            seed=d["seed"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _perimeter_point(t: float, w: float, h: float) -> tuple[float, float]:
    """Map arc length t in [0, 2(w+h)) to a point on the rectangle boundary."""
    if t < w:
        return (t, 0.0)
    t -= w
    if t < h:
        return (w, t)
    t -= h
    if t < w:
        return (w - t, h)
    t -= w
    return (0.0, h - t)


def _draw_channel_counts(cls: SetupClass, rng: np.random.Generator) -> list[int]:
    lo, hi = cls.channels_per_bs
    if cls.n_bs * lo > cls.max_total_channels:
        raise ValueError(f"setup {cls.name}: per-BS lower bound exceeds the total channel cap")
    counts = [int(c) for c in rng.integers(lo, hi + 1, size=cls.n_bs)]
    # Enforce the setup-class total cap by trimming from the last BS,
    # round-robin, never going below the per-BS lower bound.
    i = cls.n_bs - 1
    while sum(counts) > cls.max_total_channels:
        if counts[i] > lo:
            counts[i] -= 1
        i = i - 1 if i > 0 else cls.n_bs - 1
    return counts


def obstacle_fading_matrix(
    n_tenants: int,
    n_bs: int,
    rng: np.random.Generator,
    fraction: float = OBSTACLE_FRACTION,
    k_ref_db: float = K_REF_DB,
) -> np.ndarray:
    """Fading matrix K: exactly round(fraction * n_T * n_BS) entries reduced.

    Reduced entries are chosen uniformly without replacement; each becomes
    k_ref * u with u ~ Uniform[0.2, 0.8], applied to the dB value.
    """
    k = np.full((n_tenants, n_bs), k_ref_db)
    n_entries = n_tenants * n_bs
    n_reduced = int(math.floor(fraction * n_entries + 0.5))
    if n_reduced > 0:
        flat = rng.choice(n_entries, size=n_reduced, replace=False)
        lo, hi = OBSTACLE_FACTOR_RANGE
        factors = rng.uniform(lo, hi, size=n_reduced)
        k.flat[flat] = k_ref_db * factors
    return k


def generate_scenario(
    setup: str | SetupClass,
    seed: int,
    model: LinkModel | None = None,
    obstacle_fraction: float = OBSTACLE_FRACTION,
    c_min_range: tuple[float, float] = C_MIN_RANGE,
    c_max_range: tuple[float, float] = C_MAX_RANGE,
) -> Scenario:
    """Generate one randomized instance of the given setup class.

    Pure function of its arguments: identical inputs yield bit-identical
    scenarios. Tenants are uniform in the interior, BSs uniform on the
    boundary perimeter, channel counts uniform per BS (capped as described
    in `_draw_channel_counts`), and utility bounds are scaled from the
    setup's dual-channel reference rate under `model` (default LinkModel).
    """
    cls = setup_class(setup)
    w, h = cls.area
    model = model if model is not None else LinkModel()

    rng_t = substream(seed, "tenant-pos")
    tenants = [
        (float(x), float(y))
        for x, y in zip(rng_t.uniform(0.0, w, cls.n_tenants), rng_t.uniform(0.0, h, cls.n_tenants))
    ]
    rng_b = substream(seed, "bs-pos")
    perim = 2.0 * (w + h)
    bss = [_perimeter_point(float(t), w, h) for t in rng_b.uniform(0.0, perim, cls.n_bs)]

    counts = _draw_channel_counts(cls, substream(seed, "channel-counts"))
    owner = [i for i, n in enumerate(counts) for _ in range(n)]

    k = obstacle_fading_matrix(cls.n_tenants, cls.n_bs, substream(seed, "fading"), obstacle_fraction)

    r_ref = typical_dual_rate(cls.area, cls.n_bs, model)
    rng_u = substream(seed, "utility-bounds")
    c_min = rng_u.uniform(c_min_range[0], c_min_range[1], cls.n_tenants) * r_ref
    c_max = rng_u.uniform(c_max_range[0], c_max_range[1], cls.n_tenants) * r_ref
    bounds = [(float(a), float(b)) for a, b in zip(c_min, c_max)]

    return Scenario(
        setup=cls.name,
        area=cls.area,
        tenant_positions=tenants,
        bs_positions=bss,
        channels_per_bs=counts,
        channel_owner=owner,
        fading_db=[[float(v) for v in row] for row in k],
        utility_bounds=bounds,
        seed=int(seed),
    )


def distance(scenario: Scenario, tenant: int, bs: int) -> float:
    """Euclidean tenant-BS distance in meters."""
    tx, ty = scenario.tenant_positions[tenant]
    bx, by = scenario.bs_positions[bs]
    return math.hypot(tx - bx, ty - by)


def distance_matrix(scenario: Scenario) -> np.ndarray:
    tp = np.asarray(scenario.tenant_positions, dtype=float)
    bp = np.asarray(scenario.bs_positions, dtype=float)
    return np.hypot(tp[:, None, 0] - bp[None, :, 0], tp[:, None, 1] - bp[None, :, 1])
