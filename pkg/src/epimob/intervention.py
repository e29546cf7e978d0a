"""Restriction levels, daily plans, and intervention strategies.

A plan maps each person to a restriction level with an expiry day.  A
stricter active level always masks a looser one, and levels fall back to
free when they expire.  Strategies are computed once per day from the
day's newly confirmed (symptomatic) cases: hospitalize the confirmed,
restrict their traced contacts, or confine whole tracts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .epidemic import HealthLedger, HealthState
from .mobility import TrajectoryStore
from .tracing import basic_contact_tracing, fast_contact_tracing

__all__ = [
    "RestrictionLevel",
    "StrategyConfig",
    "InterventionPlan",
    "InterventionStats",
    "STRATEGY_NAMES",
    "STRATEGY_ALIASES",
    "resolve_strategy",
    "apply_strategy",
]

STRATEGY_NAMES = ("none", "infected_only", "contact_tracing", "group_lockdown")

#: Shorthand strategy names accepted by the CLI and scenario files.  The
#: confine/isolate variants restrict both the confirmed cases and their
#: contacts at that intensity; hybrid hospitalizes the confirmed while
#: isolating contacts.
STRATEGY_ALIASES = {
    "free": {"strategy": "none"},
    "none": {"strategy": "none"},
    "infected": {"strategy": "infected_only"},
    "infected_only": {"strategy": "infected_only"},
    "confine": {"strategy": "contact_tracing",
                "confirmed_level": "confine", "beta": "confine"},
    "isolate": {"strategy": "contact_tracing",
                "confirmed_level": "isolate", "beta": "isolate"},
    "hybrid": {"strategy": "contact_tracing",
               "confirmed_level": "hospitalize", "beta": "isolate"},
    "contact_tracing": {"strategy": "contact_tracing"},
    "group": {"strategy": "group_lockdown"},
    "group_lockdown": {"strategy": "group_lockdown"},
}


class RestrictionLevel(IntEnum):
    """Per-person mobility restriction, ordered by strictness."""

    FREE = 0
    CONFINE = 1      # restricted to the residential location
    ISOLATE = 2      # out of circulation
    HOSPITALIZE = 3  # out of circulation; cures after the hospital clock

    @classmethod
    def parse(cls, name: str) -> "RestrictionLevel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(
                f"unknown restriction level {name!r}; expected one of "
                f"{[level.name.lower() for level in cls]}") from None


@dataclass(frozen=True)
class StrategyConfig:
    """Parameters of the daily intervention strategy."""

    strategy: str = "contact_tracing"
    tau: int = 28
    max_order: int = 1
    beta: RestrictionLevel = RestrictionLevel.ISOLATE
    quota: int | None = None
    reduction: str = "guarded"
    confirmed_level: RestrictionLevel = RestrictionLevel.HOSPITALIZE

    def validate(self) -> None:
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGY_NAMES}")
        if self.strategy == "contact_tracing" and self.max_order < 1:
            raise ValueError("max_order must be >= 1 for contact tracing")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.quota is not None and self.quota < 0:
            raise ValueError("quota must be >= 0")
        if self.reduction not in ("off", "guarded", "unguarded"):
            raise ValueError(f"unknown reduction mode {self.reduction!r}")


def resolve_strategy(name: str, base: StrategyConfig | None = None) -> StrategyConfig:
    """Build a StrategyConfig from a shorthand name, on top of `base`."""
    key = name.strip().lower()
    if key not in STRATEGY_ALIASES:
        raise ValueError(
            f"unknown strategy {name!r}; valid names: {sorted(STRATEGY_ALIASES)}")
    spec = dict(STRATEGY_ALIASES[key])
    cfg = base if base is not None else StrategyConfig()
    fields = {"strategy": spec["strategy"]}
    if "beta" in spec:
        fields["beta"] = RestrictionLevel.parse(spec["beta"])
    if "confirmed_level" in spec:
        fields["confirmed_level"] = RestrictionLevel.parse(spec["confirmed_level"])
    return replace(cfg, **fields)


class InterventionPlan:
    """Active restriction levels with expiry days for every person."""

    def __init__(self, num_people: int):
        self.level = np.zeros(num_people, dtype=np.int8)
        self.until_day = np.zeros(num_people, dtype=np.int32)
        self.closed_tracts: list[int] = []

    def begin_day(self, day: int) -> None:
        """Expire restrictions whose last active day has passed."""
        expired = (self.level > 0) & (self.until_day <= day)
        self.level[expired] = RestrictionLevel.FREE
        self.until_day[expired] = 0
        self.closed_tracts = []

    def assign(self, persons: np.ndarray, level: RestrictionLevel,
               until_day: int) -> np.ndarray:
        """Apply a level to persons, honoring masking; returns those changed.

        A strictly stricter level replaces the current one; an equal level
        extends the expiry; a looser level is masked and ignored.
        """
        persons = np.asarray(persons, dtype=np.int64)
        if persons.size == 0:
            return persons
        current = self.level[persons]
        upgrade = current < int(level)
        extend = current == int(level)
        changed = persons[upgrade]
        self.level[changed] = int(level)
        self.until_day[changed] = until_day
        if extend.any():
            extended = persons[extend]
            self.until_day[extended] = np.maximum(self.until_day[extended], until_day)
        return changed

    def levels(self) -> np.ndarray:
        return self.level

    def count(self, level: RestrictionLevel) -> int:
        return int(np.count_nonzero(self.level == int(level)))


@dataclass
class InterventionStats:
    """What one day-boundary intervention did."""

    hospitalized: int = 0
    isolated: int = 0
    confined: int = 0
    traced_per_order: list[int] = field(default_factory=list)
    location_visits_fast: int = 0
    location_visits_basic: int = 0
    cover_fallbacks: int = 0
    applied: int = 0
    traced_sets: list[np.ndarray] = field(default_factory=list)

    @property
    def traced_order1(self) -> int:
        return self.traced_per_order[0] if self.traced_per_order else 0

    @property
    def traced_order2(self) -> int:
        return self.traced_per_order[1] if len(self.traced_per_order) > 1 else 0


def _count_level(level: RestrictionLevel, stats: InterventionStats, n: int) -> None:
    if level == RestrictionLevel.HOSPITALIZE:
        stats.hospitalized += n
    elif level == RestrictionLevel.ISOLATE:
        stats.isolated += n
    elif level == RestrictionLevel.CONFINE:
        stats.confined += n
    stats.applied += n


def _restrict(plan: InterventionPlan, ledger: HealthLedger, persons: np.ndarray,
              level: RestrictionLevel, day: int, cure_days: int, isolate_days: int,
              hours: int, stats: InterventionStats) -> None:
    """Assign a level starting next day, with the level's own duration."""
    duration = cure_days if level == RestrictionLevel.HOSPITALIZE else isolate_days
    until = day + 1 + duration
    changed = plan.assign(persons, level, until)
    if level == RestrictionLevel.HOSPITALIZE and changed.size:
        ledger.admit_to_hospital(changed, until * hours)
    _count_level(level, stats, changed.size)


def apply_strategy(confirmed: np.ndarray, store: TrajectoryStore, ledger: HealthLedger,
                   plan: InterventionPlan, city, t: int, day: int,
                   cfg: StrategyConfig, cure_days: int, isolate_days: int,
                   tracer: str = "fast") -> InterventionStats:
    """Compute the next day's plan from today's confirmed cases.

    `confirmed` holds the persons who first became symptomatic today; they
    seed contact tracing.  Confirmed cases are never subject to the quota;
    the quota truncates traced contacts in ascending hop order, then
    ascending id.  Mutates `plan` (entries take effect from day + 1) and
    the ledger's hospital clocks.
    """
    cfg.validate()
    stats = InterventionStats()
    hours = store.templates.hours
    confirmed = np.asarray(confirmed, dtype=np.int64)

    if cfg.strategy == "none":
        return stats

    if cfg.strategy == "group_lockdown":
        if confirmed.size:
            tracts = city.location_tract[city.home[confirmed]]
            tally = np.bincount(tracts, minlength=city.num_tracts)
            ranked = np.lexsort((np.arange(city.num_tracts), -tally))
            home_tract = city.location_tract[city.home]
            budget = cfg.quota
            for tract in ranked:
                if tally[tract] == 0:
                    break
                residents = np.nonzero(home_tract == tract)[0]
                if budget is not None:
                    if budget <= 0:
                        break
                    residents = residents[:budget]
                    budget -= residents.size
                _restrict(plan, ledger, residents, RestrictionLevel.CONFINE,
                          day, cure_days, isolate_days, hours, stats)
                plan.closed_tracts.append(int(tract))
        return stats

    # infected_only and contact_tracing both restrict the confirmed cases.
    if cfg.confirmed_level == RestrictionLevel.HOSPITALIZE:
        # Catch every symptomatic case not yet under care.
        targets = np.nonzero((ledger.state == int(HealthState.SYMPTOMATIC))
                             & (plan.level < int(RestrictionLevel.HOSPITALIZE)))[0]
    else:
        targets = confirmed
    _restrict(plan, ledger, targets, cfg.confirmed_level,
              day, cure_days, isolate_days, hours, stats)

    if cfg.strategy == "infected_only" or confirmed.size == 0:
        return stats

    if tracer == "fast":
        trace = fast_contact_tracing(confirmed, store, t, cfg.tau, cfg.max_order,
                                     reduction=cfg.reduction)
    elif tracer == "slow":
        trace = basic_contact_tracing(confirmed, store, t, cfg.tau, cfg.max_order)
    else:
        raise ValueError(f"unknown tracer {tracer!r}")

    stats.location_visits_fast = trace.distinct_pairs
    stats.location_visits_basic = trace.pair_queries
    stats.cover_fallbacks = trace.cover_fallbacks
    stats.traced_sets = trace.per_order

    budget = cfg.quota
    for contacts in trace.per_order:
        if budget is not None:
            contacts = contacts[:max(budget, 0)]
            budget -= contacts.size
        stats.traced_per_order.append(int(contacts.size))
        _restrict(plan, ledger, contacts, cfg.beta,
                  day, cure_days, isolate_days, hours, stats)
    return stats
