"""Cost, wage, timing, and grid-recommendation arithmetic.

Two cost conventions coexist deliberately.  Researcher cost of grid
screens spreads the HIT price over its usable screens only (the catch
overhead is baked into the rate).  One-at-a-time collection prices each
triplet individually and additionally pays the catch-trial share and
the platform fee.  Worker wage spreads the HIT price over *all* screens
in the HIT, catch trials included, because the worker answers those too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConstraintError


@dataclass(frozen=True)
class HitPricing:
    """Per-HIT price structure and overhead fractions."""

    hit_price: float = 0.10
    usable_screens_per_hit: int = 8
    catch_screens_per_hit: int = 2
    per_triplet_price: float = 0.01
    platform_fee_fraction: float = 0.10
    catch_fraction: float = 0.20

    def __post_init__(self):
        if min(self.hit_price, self.per_triplet_price) < 0:
            raise ConstraintError("prices must be >= 0")
        if not (0 <= self.platform_fee_fraction < 1 and 0 <= self.catch_fraction < 1):
            raise ConstraintError("fee fractions must lie in [0, 1)")
        if self.usable_screens_per_hit + self.catch_screens_per_hit < 1:
            raise ConstraintError("a HIT must contain at least one screen")
        if self.usable_screens_per_hit < 1:
            raise ConstraintError("a HIT must contain at least one usable screen")


# Median seconds per screen for each measured (n, k), from live collection.
DEFAULT_TIMING_ENTRIES = {
    (4, 1): 3.57,
    (4, 2): 3.45,
    (8, 1): 3.04,
    (8, 2): 5.79,
    (8, 4): 7.65,
    (12, 1): 4.17,
    (12, 2): 6.78,
    (12, 4): 8.67,
    (16, 1): 6.72,
    (16, 2): 8.84,
    (16, 4): 9.59,
}


@dataclass(frozen=True)
class TimingTable:
    """Median seconds per screen keyed by (n, k)."""

    entries: dict[tuple[int, int], float] = field(
        default_factory=lambda: dict(DEFAULT_TIMING_ENTRIES)
    )

    def __post_init__(self):
        for key, seconds in self.entries.items():
            if not seconds > 0:
                raise ConstraintError(f"timing for {key} must be > 0, got {seconds}")


def screens_cost(screens: int, pricing: HitPricing = HitPricing()) -> float:
    """Researcher cost of collecting the given number of usable screens."""
    if screens < 0:
        raise ValueError("screens must be >= 0")
    return screens * pricing.hit_price / pricing.usable_screens_per_hit


def one_at_a_time_cost(n_triplets: int, pricing: HitPricing = HitPricing()) -> float:
    """Cost of buying triplets individually, with catch and fee overheads."""
    if n_triplets < 0:
        raise ValueError("n_triplets must be >= 0")
    return (
        n_triplets
        * pricing.per_triplet_price
        / (1.0 - pricing.catch_fraction)
        / (1.0 - pricing.platform_fee_fraction)
    )


def hourly_wage(seconds_per_screen: float, pricing: HitPricing = HitPricing()) -> float:
    """Worker wage implied by a per-screen time; catch screens are paid too."""
    if not seconds_per_screen > 0:
        raise ValueError("seconds_per_screen must be > 0")
    screens = pricing.usable_screens_per_hit + pricing.catch_screens_per_hit
    return pricing.hit_price / screens * 3600.0 / seconds_per_screen


def triplets_per_answer(n: int, k: int) -> int:
    """Triplets yielded by one answered n-choose-k grid: k*(n-k)."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got n={n} k={k}")
    return k * (n - k)


def recommend_grid(
    timing: TimingTable | None = None,
    pricing: HitPricing = HitPricing(),
    wage_floor: float = 6.00,
) -> tuple[int, int] | None:
    """Largest measured n with k = n/2 whose wage clears the floor.

    Only measured (n, k) entries are considered; nothing is extrapolated.
    Returns None when no half-selection entry pays the floor.
    """
    if timing is None:
        timing = TimingTable()
    if not timing.entries:
        raise ValueError("timing table must be non-empty")
    best = None
    for (n, k), seconds in timing.entries.items():
        if n != 2 * k:
            continue
        if hourly_wage(seconds, pricing) < wage_floor:
            continue
        if best is None or n > best[0]:
            best = (n, k)
    return best


@dataclass(frozen=True)
class BudgetReport:
    """Side-by-side cost of a grid collection vs. one-at-a-time buying."""

    screens: int
    triplets_unique: int
    grid_cost: float
    one_at_a_time: float
    ratio: float


def experiment_budget_report(
    screens: int, triplets_unique: int, pricing: HitPricing = HitPricing()
) -> BudgetReport:
    """Cost of the screens spent vs. buying the unique triplets singly."""
    if screens < 0 or triplets_unique < 0:
        raise ValueError("counts must be >= 0")
    grid = screens_cost(screens, pricing)
    single = one_at_a_time_cost(triplets_unique, pricing)
    ratio = single / grid if grid > 0 else 0.0
    return BudgetReport(
        screens=screens,
        triplets_unique=triplets_unique,
        grid_cost=grid,
        one_at_a_time=single,
        ratio=ratio,
    )
