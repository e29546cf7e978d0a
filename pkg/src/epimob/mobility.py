"""Mobility generation: routine day templates plus sparse deviations.

Every person owns a template one-day schedule (home, work, one commercial
stop, fixed transition hours).  A simulation step only stores the persons
whose actual location differs from the template — random deviations,
confinement to home, removal from circulation, or travel to another
region.  The store answers both directions of the person/location visit
relation: the trajectory of a person at a step, and the visitor set of a
location at a step (template visitors minus departures plus arrivals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .rng import stream

__all__ = [
    "OUT_OF_CIRCULATION",
    "DayTemplates",
    "build_templates",
    "dump_templates",
    "TrajectoryStore",
    "StepNotAvailableError",
    "StepAlreadySealedError",
    "MobilityPolicy",
    "UniformDeviationPolicy",
    "RegionState",
    "step_travel",
    "MobilityModel",
]

#: Trajectory marker for persons removed from circulation (isolated or
#: hospitalized); never a valid location id.
OUT_OF_CIRCULATION = -1

LEVEL_FREE = 0
LEVEL_CONFINE = 1
LEVEL_ISOLATE = 2
LEVEL_HOSPITALIZE = 3


class StepNotAvailableError(LookupError):
    """Raised when querying a step that was never sealed or was evicted."""


class StepAlreadySealedError(ValueError):
    """Raised when sealing a step out of order."""


@dataclass
class DayTemplates:
    """Routine one-day trajectories for all persons.

    The schedule of person m is: home until leave_home[m], work until
    to_shop[m], the primary commercial location until go_home[m], then home
    again.  A template therefore touches exactly the person's own routine
    locations.
    """

    hours: int
    home: np.ndarray
    work: np.ndarray
    shop: np.ndarray
    leave_home: np.ndarray
    to_shop: np.ndarray
    go_home: np.ndarray

    def locations_at(self, hour: int) -> np.ndarray:
        """Template location of every person at the given hour of day."""
        if not 0 <= hour < self.hours:
            raise ValueError(f"hour {hour} outside 0..{self.hours - 1}")
        at_home = (hour < self.leave_home) | (hour >= self.go_home)
        return np.where(at_home, self.home,
                        np.where(hour < self.to_shop, self.work, self.shop)).astype(np.int32)

    def locations_for(self, persons: np.ndarray, hour: int) -> np.ndarray:
        """Template locations at `hour` for a subset of persons."""
        at_home = (hour < self.leave_home[persons]) | (hour >= self.go_home[persons])
        return np.where(at_home, self.home[persons],
                        np.where(hour < self.to_shop[persons],
                                 self.work[persons], self.shop[persons])).astype(np.int32)

    def day_of(self, person: int) -> np.ndarray:
        """The full H-step template sequence of one person."""
        hours = np.arange(self.hours)
        at_home = (hours < self.leave_home[person]) | (hours >= self.go_home[person])
        return np.where(at_home, self.home[person],
                        np.where(hours < self.to_shop[person],
                                 self.work[person], self.shop[person])).astype(np.int32)


def build_templates(city, hours: int, seed: int) -> DayTemplates:
    """Draw per-person transition hours and assemble the day templates.

    Leave-home falls in the early-morning window, return-home in the last
    hours of the active day; the commerce transition is uniform between
    them.  Days shorter than 3 hours degenerate to staying home.
    """
    n = city.num_people
    rng = stream(seed, "template-schedule")
    shop = city.shops[:, 0].astype(np.int32)

    if hours < 3:
        t1 = t2 = t3 = np.full(n, hours, dtype=np.int16)
        return DayTemplates(hours, city.home.astype(np.int32), city.work.astype(np.int32),
                            shop, t1, t2, t3)

    morning_span = max(1, (3 * hours) // 14)
    hi3 = hours - 1 if hours >= 4 else hours
    t1 = rng.integers(1, min(morning_span, hi3 - 2) + 1, size=n).astype(np.int16)
    lo3 = np.maximum(t1 + 2, min(hours - morning_span, hi3)).astype(np.int16)
    t3 = (lo3 + rng.integers(0, 1 + hi3 - lo3, size=n)).astype(np.int16)
    t2 = (t1 + 1 + rng.integers(0, t3 - t1 - 1, size=n)).astype(np.int16)
    return DayTemplates(hours, city.home.astype(np.int32), city.work.astype(np.int32),
                        shop, t1, t2, t3)


def dump_templates(templates: DayTemplates, path) -> None:
    """Write the template table: person,home,work,shop,leave_home,to_shop,go_home."""
    table = np.column_stack([
        np.arange(templates.home.size), templates.home, templates.work, templates.shop,
        templates.leave_home, templates.to_shop, templates.go_home])
    with open(path, "w") as handle:
        handle.write("person,home,work,shop,leave_home,to_shop,go_home\n")
        np.savetxt(handle, table, fmt="%d", delimiter=",")


@dataclass
class _StepDelta:
    """Overrides of one sealed step, indexed three ways."""

    persons: np.ndarray        # sorted ascending
    dest: np.ndarray           # aligned with persons; OUT_OF_CIRCULATION allowed
    in_order: np.ndarray       # permutation grouping persons by destination
    in_offsets: np.ndarray     # CSR offsets over destinations 0..L
    out_order: np.ndarray      # permutation grouping persons by template location
    out_offsets: np.ndarray


class TrajectoryStore:
    """Template trajectories plus per-step sparse override deltas.

    Steps must be sealed in order.  A bounded `retention` keeps only the
    most recent steps; queries on evicted steps raise, full history is kept
    when retention is None.
    """

    def __init__(self, city, templates: DayTemplates, retention: int | None = None,
                 dump_file=None):
        self.num_people = city.num_people
        self.num_locations = city.num_locations
        self.templates = templates
        self.retention = retention
        self.next_step = 0
        self.first_kept = 0
        self.override_entries = 0          # total entries ever written
        self._deltas: dict[int, _StepDelta] = {}
        self._dump = dump_file

        # Per-hour reverse index of the templates: persons sorted by
        # template location, with CSR offsets per location.
        self._tpl_order: list[np.ndarray] = []
        self._tpl_offsets: list[np.ndarray] = []
        for h in range(templates.hours):
            locs = templates.locations_at(h)
            order = np.argsort(locs, kind="stable").astype(np.int32)
            offsets = np.searchsorted(locs[order], np.arange(self.num_locations + 1))
            self._tpl_order.append(order)
            self._tpl_offsets.append(offsets)

    # -- sealing ---------------------------------------------------------

    def seal_step(self, t: int, locations: np.ndarray) -> None:
        """Record step t from the full per-person location array."""
        if t != self.next_step:
            raise StepAlreadySealedError(
                f"step {t} cannot be sealed; next unwritten step is {self.next_step}")
        hour = t % self.templates.hours
        tpl = self.templates.locations_at(hour)
        changed = np.nonzero(locations != tpl)[0].astype(np.int32)
        dest = locations[changed].astype(np.int32)

        in_order = np.argsort(dest, kind="stable").astype(np.int32)
        in_offsets = np.searchsorted(dest[in_order], np.arange(self.num_locations + 1))
        tpl_of_changed = tpl[changed]
        out_order = np.argsort(tpl_of_changed, kind="stable").astype(np.int32)
        out_offsets = np.searchsorted(tpl_of_changed[out_order],
                                      np.arange(self.num_locations + 1))

        self._deltas[t] = _StepDelta(changed, dest, in_order, in_offsets,
                                     out_order, out_offsets)
        self.override_entries += changed.size
        self.next_step = t + 1
        if self._dump is not None and changed.size:
            np.savetxt(self._dump, np.column_stack([np.full(changed.size, t), changed, dest]),
                       fmt="%d", delimiter=",")
        if self.retention is not None:
            while self.next_step - self.first_kept > self.retention:
                del self._deltas[self.first_kept]
                self.first_kept += 1

    # -- queries ---------------------------------------------------------

    def _delta(self, t: int) -> _StepDelta:
        if not self.first_kept <= t < self.next_step:
            raise StepNotAvailableError(
                f"step {t} not available (kept range {self.first_kept}..{self.next_step - 1})")
        return self._deltas[t]

    def trajectory(self, person: int, t: int) -> int:
        """Location of `person` at step t (override else template)."""
        delta = self._delta(t)
        idx = np.searchsorted(delta.persons, person)
        if idx < delta.persons.size and delta.persons[idx] == person:
            return int(delta.dest[idx])
        return int(self.templates.locations_for(np.asarray([person]), t % self.templates.hours)[0])

    def trajectories(self, persons: np.ndarray, t: int) -> np.ndarray:
        """Vectorized trajectory lookup for a set of persons."""
        delta = self._delta(t)
        out = self.templates.locations_for(persons, t % self.templates.hours)
        if delta.persons.size:
            idx = np.searchsorted(delta.persons, persons)
            idx = np.minimum(idx, delta.persons.size - 1)
            hit = delta.persons[idx] == persons
            out[hit] = delta.dest[idx[hit]]
        return out

    def template_visitors(self, location: int, hour: int) -> np.ndarray:
        """Persons whose template puts them at `location` during `hour`."""
        offsets = self._tpl_offsets[hour]
        return self._tpl_order[hour][offsets[location]:offsets[location + 1]]

    def visitors_unsorted(self, location: int, t: int) -> np.ndarray:
        """Persons present at `location` during step t, in no particular order.

        Hot path for tracing: avoids the final sort of visitors().
        """
        delta = self._delta(t)
        hour = t % self.templates.hours
        base = self.template_visitors(location, hour)
        departed = delta.persons[delta.out_order[delta.out_offsets[location]:
                                                 delta.out_offsets[location + 1]]]
        arrived = delta.persons[delta.in_order[delta.in_offsets[location]:
                                               delta.in_offsets[location + 1]]]
        if departed.size:
            # both sides sorted unique: drop departures with one merge pass
            idx = np.searchsorted(departed, base)
            idx[idx == departed.size] = 0
            base = base[departed[idx] != base]
        if arrived.size:
            return np.concatenate([base, arrived])
        return base

    def visitors(self, location: int, t: int) -> np.ndarray:
        """Sorted person ids present at `location` during step t."""
        return np.sort(self.visitors_unsorted(location, t))

    def is_available(self, t: int) -> bool:
        return self.first_kept <= t < self.next_step

    def overrides_at(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """(persons, destinations) overridden at step t."""
        delta = self._delta(t)
        return delta.persons, delta.dest


class MobilityPolicy(Protocol):
    """Destination rule applied when a person deviates from routine."""

    def destinations(self, persons: np.ndarray, t: int,
                     rng: np.random.Generator) -> np.ndarray: ...


class UniformDeviationPolicy:
    """Deviate to a uniformly random location in the person's current region."""

    def __init__(self, city, regions: "RegionState | None" = None):
        self._num_locations = city.num_locations
        self._regions = regions
        if regions is not None:
            self._by_region = regions.locations_by_region

    def destinations(self, persons: np.ndarray, t: int,
                     rng: np.random.Generator) -> np.ndarray:
        if self._regions is None:
            return rng.integers(0, self._num_locations, size=persons.size, dtype=np.int32)
        out = np.empty(persons.size, dtype=np.int32)
        current = self._regions.current_region[persons]
        draws = rng.random(persons.size)
        for g in np.unique(current):
            sel = current == g
            pool = self._by_region[g]
            out[sel] = pool[(draws[sel] * pool.size).astype(np.int64)]
        return out


class RegionState:
    """Travel state for multi-region scenarios.

    Regions partition the locations; each person lives in the region of
    their home.  Travel weight between regions is a long-tail function of
    the index distance: weight(i, j) proportional to |i - j| ** -alpha.
    """

    def __init__(self, city, alpha: float = 1.5):
        self.location_region = city.location_region
        self.num_regions = city.num_regions
        self.home_region = self.location_region[city.home].astype(np.int32)
        self.current_region = self.home_region.copy()
        self.away = np.zeros(city.num_people, dtype=bool)
        self.locations_by_region = [
            np.nonzero(self.location_region == g)[0].astype(np.int32)
            for g in range(self.num_regions)
        ]
        r = self.num_regions
        if r > 1:
            dist = np.abs(np.arange(r)[:, None] - np.arange(r)[None, :]).astype(float)
            with np.errstate(divide="ignore"):
                w = np.where(dist > 0, dist ** -alpha, 0.0)
            self._cum_weights = np.cumsum(w, axis=1)
            self._cum_weights /= self._cum_weights[:, -1:]
        else:
            self._cum_weights = None


def step_travel(state: RegionState, day: int, seed: int,
                p_travel: float, p_return: float) -> None:
    """Daily travel transitions: residents depart, travelers return.

    Departures and returns are decided simultaneously on the day-start
    state, so a person cannot leave and return within the same boundary.
    No-op for single-region scenarios.
    """
    if state.num_regions < 2:
        return
    u = stream(seed, "travel", step=day).random(state.away.size)
    returning = state.away & (u < p_return)
    leaving = ~state.away & (u < p_travel)

    state.away[returning] = False
    state.current_region[returning] = state.home_region[returning]

    if leaving.any():
        v = stream(seed, "travel-dest", step=day).random(state.away.size)
        dest = np.empty(state.away.size, dtype=np.int32)
        for g in np.unique(state.home_region[leaving]):
            sel = leaving & (state.home_region == g)
            dest[sel] = np.searchsorted(state._cum_weights[g], v[sel], side="right")
        state.away[leaving] = True
        state.current_region[leaving] = np.minimum(dest[leaving], state.num_regions - 1)


class MobilityModel:
    """Generates one step of mobility for every person under a restriction plan."""

    def __init__(self, city, params, seed: int, store: TrajectoryStore,
                 policy: MobilityPolicy | None = None,
                 regions: RegionState | None = None):
        self.city = city
        self.params = params
        self.seed = seed
        self.store = store
        self.regions = regions
        self.policy = policy if policy is not None else UniformDeviationPolicy(city, regions)
        self.deviation_steps = 0    # policy-driven deviations written
        self.eligible_steps = 0     # free resident person-steps observed

    def step(self, t: int, levels: np.ndarray) -> np.ndarray:
        """Materialize step t and return the per-person location array.

        Free persons deviate from their template with probability r; the
        confined are forced home; the isolated and hospitalized are out of
        circulation.  Away travelers roam their visited region.
        """
        hour = t % self.store.templates.hours
        loc = self.store.templates.locations_at(hour).copy()
        free = levels == LEVEL_FREE

        away = None
        if self.regions is not None and self.regions.away.any():
            away = self.regions.away
            roam = away & free
            if roam.any():
                ids = np.nonzero(roam)[0]
                rng = stream(self.seed, "away-roam", step=t)
                current = self.regions.current_region[ids]
                draws = rng.random(ids.size)
                dest = np.empty(ids.size, dtype=np.int32)
                for g in np.unique(current):
                    sel = current == g
                    pool = self.regions.locations_by_region[g]
                    dest[sel] = pool[(draws[sel] * pool.size).astype(np.int64)]
                loc[ids] = dest

        eligible = free if away is None else (free & ~away)
        r = self.params.deviation_prob
        if r > 0:
            u = stream(self.seed, "deviate", step=t).random(self.city.num_people)
            deviating = eligible & (u < r)
            if deviating.any():
                ids = np.nonzero(deviating)[0]
                loc[ids] = self.policy.destinations(
                    ids, t, stream(self.seed, "deviate-dest", step=t))
            self.deviation_steps += int(deviating.sum())
        self.eligible_steps += int(eligible.sum())

        confined = levels == LEVEL_CONFINE
        if confined.any():
            loc[confined] = self.city.home[confined]
        out = levels >= LEVEL_ISOLATE
        if out.any():
            loc[out] = OUT_OF_CIRCULATION

        self.store.seal_step(t, loc)
        return loc
