"""Within-host health states and per-location between-host transmission.

Health follows susceptible -> pre-symptomatic -> symptomatic -> recovered.
Both infectious stages transmit; the pre-symptomatic stage is invisible to
interventions.  Symptomatic persons only recover through hospitalization.

At a location, the per-susceptible infection probability for one step is
    p_l = rate * infectious / (susceptible + infectious + recovered)
taken over the persons present.  Each susceptible visitor is infected
independently with probability p_l (so the count is Binomial), or, in
`expected` mode, exactly round(p_l * susceptible) visitors are drawn
uniformly without replacement.  Draws are keyed per (person, step), which
makes the outcome independent of the order in which locations are
processed.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .rng import stream

__all__ = [
    "HealthState",
    "HealthLedger",
    "infection_uniforms",
    "location_infection",
    "advance_within_host",
    "step_epidemic",
]


class HealthState(IntEnum):
    SUSCEPTIBLE = 0
    PRE_SYMPTOMATIC = 1
    SYMPTOMATIC = 2
    RECOVERED = 3


_SUS = int(HealthState.SUSCEPTIBLE)
_PRE = int(HealthState.PRE_SYMPTOMATIC)
_SYM = int(HealthState.SYMPTOMATIC)
_REC = int(HealthState.RECOVERED)


class HealthLedger:
    """Per-person health state machine with infection and hospital clocks."""

    def __init__(self, num_people: int):
        self.num_people = num_people
        self.state = np.full(num_people, _SUS, dtype=np.int8)
        self.infected_at = np.full(num_people, -1, dtype=np.int64)
        self.symptomatic_at = np.full(num_people, -1, dtype=np.int64)
        self.hospital_release = np.full(num_people, -1, dtype=np.int64)
        self.cumulative_infected = 0
        self.day_new_infections = 0
        self._day_confirmed: list[np.ndarray] = []
        # Per-location tallies of the most recent epidemic step.
        self.last_location_counts: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def seed_initial_infections(self, persons: np.ndarray, incubation_steps: int) -> None:
        """Plant the initial pre-symptomatic cases, half-way through incubation."""
        self.state[persons] = _PRE
        self.infected_at[persons] = -(incubation_steps // 2)
        self.cumulative_infected += persons.size

    def infect(self, persons: np.ndarray, t: int) -> None:
        if persons.size == 0:
            return
        self.state[persons] = _PRE
        self.infected_at[persons] = t
        self.cumulative_infected += persons.size
        self.day_new_infections += persons.size

    def admit_to_hospital(self, persons: np.ndarray, release_step: int) -> None:
        self.hospital_release[persons] = release_step

    def discharge(self, t: int) -> np.ndarray:
        """Cure hospitalized persons whose clock has run out by step t."""
        due = (self.hospital_release >= 0) & (t >= self.hospital_release)
        cured = due & ((self.state == _PRE) | (self.state == _SYM))
        self.state[cured] = _REC
        self.hospital_release[due] = -1
        return np.nonzero(cured)[0]

    def pop_day_accumulators(self) -> tuple[int, np.ndarray]:
        """(new infections, newly confirmed ids) for the day just finished."""
        infections = self.day_new_infections
        confirmed = (np.concatenate(self._day_confirmed)
                     if self._day_confirmed else np.empty(0, dtype=np.int64))
        self.day_new_infections = 0
        self._day_confirmed = []
        return infections, confirmed

    def counts(self) -> tuple[int, int, int, int]:
        """(susceptible, pre-symptomatic, symptomatic, recovered) totals."""
        binned = np.bincount(self.state, minlength=4)
        return int(binned[_SUS]), int(binned[_PRE]), int(binned[_SYM]), int(binned[_REC])


def infection_uniforms(seed: int, t: int, num_people: int) -> np.ndarray:
    """Per-person uniforms for step t; element i belongs to person i."""
    return stream(seed, "infection", step=t).random(num_people)


def location_infection(location: int, t: int, visitors: np.ndarray, ledger: HealthLedger,
                       rate: float, seed: int, mode: str = "stochastic",
                       pre_weight: float = 1.0,
                       uniforms: np.ndarray | None = None) -> np.ndarray:
    """Infect susceptible visitors of one location for one step.

    Returns the newly infected person ids (already applied to the ledger).
    The same per-(person, step) uniforms drive both this and the bulk
    step, so per-location results do not depend on iteration order.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"infection rate must be in [0, 1], got {rate}")
    visitors = np.asarray(visitors, dtype=np.int64)
    if visitors.size == 0:
        return np.empty(0, dtype=np.int64)
    states = ledger.state[visitors]
    weighted_infectious = pre_weight * np.count_nonzero(states == _PRE) \
        + np.count_nonzero(states == _SYM)
    if weighted_infectious == 0.0:
        return np.empty(0, dtype=np.int64)
    p_loc = min(rate * weighted_infectious / visitors.size, 1.0)
    susceptible = visitors[states == _SUS]
    if susceptible.size == 0:
        return np.empty(0, dtype=np.int64)

    if uniforms is None:
        uniforms = infection_uniforms(seed, t, ledger.num_people)
    u = uniforms[susceptible]
    if mode == "stochastic":
        newly = susceptible[u < p_loc]
    elif mode == "expected":
        count = int(np.rint(p_loc * susceptible.size))
        newly = susceptible[np.argsort(u, kind="stable")[:count]]
    else:
        raise ValueError(f"unknown infection mode: {mode}")
    ledger.infect(newly, t)
    return np.sort(newly)


def advance_within_host(ledger: HealthLedger, t: int, incubation_steps: int) -> np.ndarray:
    """Clock tick after infections: incubation expiry and hospital cures.

    Pre-symptomatic persons infected at least `incubation_steps` ago turn
    symptomatic; hospitalized infected whose cure clock has elapsed
    recover.  Returns the newly symptomatic (confirmed) ids.
    """
    due = (ledger.state == _PRE) & (t - ledger.infected_at >= incubation_steps)
    confirmed = np.nonzero(due)[0]
    if confirmed.size:
        ledger.state[confirmed] = _SYM
        ledger.symptomatic_at[confirmed] = t
        ledger._day_confirmed.append(confirmed)
    ledger.discharge(t)
    return confirmed


def step_epidemic(locations: np.ndarray, ledger: HealthLedger, t: int,
                  rate: float, incubation_steps: int, seed: int,
                  mode: str = "stochastic", pre_weight: float = 1.0,
                  num_locations: int | None = None) -> np.ndarray:
    """One epidemic step over all locations from the step's location array.

    Equivalent to applying location_infection to every location and then
    advancing the within-host clocks; returns the union of newly infected.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"infection rate must be in [0, 1], got {rate}")
    n_loc = num_locations if num_locations is not None else int(locations.max()) + 1
    active = locations >= 0
    loc_active = locations[active]
    state = ledger.state

    infectious_w = np.zeros(ledger.num_people)
    infectious_w[state == _PRE] = pre_weight
    infectious_w[state == _SYM] = 1.0
    weighted = np.bincount(loc_active, weights=infectious_w[active], minlength=n_loc)
    totals = np.bincount(loc_active, minlength=n_loc)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_loc = np.where(totals > 0, rate * weighted / np.maximum(totals, 1), 0.0)
    p_loc = np.minimum(p_loc, 1.0)

    sus_mask = active & (state == _SUS)
    sus_idx = np.nonzero(sus_mask)[0]
    ledger.last_location_counts = (
        np.bincount(locations[sus_mask], minlength=n_loc),
        np.bincount(loc_active, weights=(infectious_w[active] > 0).astype(float),
                    minlength=n_loc).astype(np.int64),
        np.bincount(locations[active & (state == _REC)], minlength=n_loc),
    )

    newly = np.empty(0, dtype=np.int64)
    if sus_idx.size:
        u = infection_uniforms(seed, t, ledger.num_people)
        sus_loc = locations[sus_idx]
        if mode == "stochastic":
            newly = sus_idx[u[sus_idx] < p_loc[sus_loc]]
        elif mode == "expected":
            quota = np.rint(p_loc * np.bincount(sus_loc, minlength=n_loc)).astype(np.int64)
            order = np.lexsort((u[sus_idx], sus_loc))
            sorted_loc = sus_loc[order]
            starts = np.searchsorted(sorted_loc, np.arange(n_loc))
            rank = np.arange(sus_idx.size) - starts[sorted_loc]
            newly = np.sort(sus_idx[order[rank < quota[sorted_loc]]])
        else:
            raise ValueError(f"unknown infection mode: {mode}")
        ledger.infect(newly, t)

    advance_within_host(ledger, t, incubation_steps)
    return newly
