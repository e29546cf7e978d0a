"""Contact tracing over the person/location visit relation.

Both tracers expand confirmed cases hop by hop: persons to the (step,
location) pairs they visited in the tracking window, then pairs back to
the persons who visited them.  The basic tracer follows every (person,
step) query separately and re-expands a location each time it is reached;
it is the reference implementation.  The fast tracer deduplicates the
(step, location) pairs so each one is expanded at most once across the
whole trace tree (a pair's visitors are all traced the first time it is
reached), and can further shrink the pair set with a per-step minimum
vertex cover.  A cover may legally contain person nodes, which would drop
locations whose other visitors were never traced; guarded mode therefore
verifies the reduced expansion against the full one and falls back when
anything would be missed, while unguarded mode keeps the raw cover for
measurement.

Traced sets are reported per hop, disjoint, and never include the sources
themselves (those are already handled as confirmed cases).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matching import min_vertex_cover
from .mobility import TrajectoryStore

__all__ = [
    "TraceResult",
    "ReductionOutcome",
    "basic_contact_tracing",
    "fast_contact_tracing",
    "reduce_location_set",
]

REDUCTION_MODES = ("off", "guarded", "unguarded")


@dataclass
class TraceResult:
    """Traced persons per hop plus instrumentation counters."""

    per_order: list[np.ndarray] = field(default_factory=list)
    location_visits: int = 0    # visitor-set expansions this tracer performed
    pair_queries: int = 0       # (step, location) queries a naive pass performs
    distinct_pairs: int = 0     # deduplicated (step, location) pairs
    cover_fallbacks: int = 0
    dropped_pairs: int = 0

    def traced(self) -> np.ndarray:
        """Union of all hops."""
        if not self.per_order:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.per_order)


@dataclass
class ReductionOutcome:
    """Result of the per-step vertex-cover reduction for one hop."""

    kept_pairs: list[tuple[int, np.ndarray]]
    flagged_pairs: list[tuple[int, np.ndarray]]
    traced_mask: np.ndarray
    location_visits: int
    fell_back: bool
    dropped_pairs: int


def _window(store: TrajectoryStore, t: int, tau: int) -> range:
    """Steps [t - tau, t] clamped at the start of history; errors if evicted."""
    if t >= store.next_step:
        raise ValueError(f"step {t} not materialized yet (next is {store.next_step})")
    start = max(0, t - tau)
    if start < store.first_kept:
        raise ValueError(
            f"tracking window [{start}, {t}] reaches beyond retained history "
            f"(first kept step is {store.first_kept})")
    return range(start, t + 1)


def basic_contact_tracing(sources: np.ndarray, store: TrajectoryStore, t: int,
                          tau: int, max_order: int) -> TraceResult:
    """Reference tracer: one visitor expansion per (source, step) query."""
    sources = np.unique(np.asarray(sources, dtype=np.int64))
    window = _window(store, t, tau)
    seen = np.zeros(store.num_people, dtype=bool)
    seen[sources] = True

    result = TraceResult()
    pairs_seen: set[int] = set()
    frontier = sources
    for _ in range(max_order):
        mask = np.zeros(store.num_people, dtype=bool)
        for person in frontier:
            person = int(person)
            for step in window:
                location = store.trajectory(person, step)
                if location < 0:
                    continue
                mask[store.visitors_unsorted(location, step)] = True
                result.location_visits += 1
                result.pair_queries += 1
                code = step * store.num_locations + location
                if code not in pairs_seen:
                    pairs_seen.add(code)
                    result.distinct_pairs += 1
        new = np.nonzero(mask & ~seen)[0]
        result.per_order.append(new)
        seen[new] = True
        frontier = new
    return result


def _expand_pairs(store: TrajectoryStore,
                  pairs: list[tuple[int, np.ndarray]]) -> tuple[np.ndarray, int]:
    """Union of visitor sets over (step, locations) pairs, one visit each."""
    mask = np.zeros(store.num_people, dtype=bool)
    visits = 0
    for step, locations in pairs:
        for location in locations:
            mask[store.visitors_unsorted(int(location), step)] = True
            visits += 1
    return mask, visits


def reduce_location_set(edges_by_step: dict[int, tuple[np.ndarray, np.ndarray]],
                        store: TrajectoryStore, prior_mask: np.ndarray,
                        mode: str = "guarded") -> ReductionOutcome:
    """Shrink the hop's (step, location) pairs to a minimum vertex cover.

    edges_by_step maps a step to parallel (person, location) edge arrays.
    Locations in the cover are kept; locations covered only through person
    nodes are flagged.  Guarded mode expands both groups, keeps the full
    traced set, and reports whether the reduction alone would have dropped
    anyone not already traced (prior_mask).  Unguarded mode expands the
    kept pairs only, reproducing the raw cover semantics.
    """
    if mode not in ("guarded", "unguarded"):
        raise ValueError(f"unknown reduction mode: {mode}")
    kept: list[tuple[int, np.ndarray]] = []
    flagged: list[tuple[int, np.ndarray]] = []
    for step in sorted(edges_by_step):
        persons, locations = edges_by_step[step]
        if persons.size == 0:
            continue
        uniq_persons, person_idx = np.unique(persons, return_inverse=True)
        uniq_locs, loc_idx = np.unique(locations, return_inverse=True)
        codes = np.unique(person_idx.astype(np.int64) * uniq_locs.size + loc_idx)
        adj: list[list[int]] = [[] for _ in range(uniq_persons.size)]
        for person_i, loc_i in zip((codes // uniq_locs.size).tolist(),
                                   (codes % uniq_locs.size).tolist()):
            adj[person_i].append(loc_i)
        _, right_cover = min_vertex_cover(uniq_persons.size, uniq_locs.size, adj)
        cover = np.asarray(right_cover, dtype=bool)
        if cover.any():
            kept.append((step, uniq_locs[cover]))
        if not cover.all():
            flagged.append((step, uniq_locs[~cover]))

    dropped = sum(locs.size for _, locs in flagged)
    if mode == "unguarded":
        mask, visits = _expand_pairs(store, kept)
        return ReductionOutcome(kept, flagged, mask, visits, False, dropped)

    mask_kept, visits_kept = _expand_pairs(store, kept)
    mask_flagged, visits_flagged = _expand_pairs(store, flagged)
    would_miss = bool((mask_flagged & ~mask_kept & ~prior_mask).any())
    return ReductionOutcome(kept, flagged, mask_kept | mask_flagged,
                            visits_kept + visits_flagged, would_miss, dropped)


def fast_contact_tracing(sources: np.ndarray, store: TrajectoryStore, t: int,
                         tau: int, max_order: int,
                         reduction: str = "guarded") -> TraceResult:
    """Layered tracer: deduplicate (step, location) pairs, expand each once."""
    if reduction not in REDUCTION_MODES:
        raise ValueError(f"unknown reduction mode: {reduction} (use one of {REDUCTION_MODES})")
    sources = np.unique(np.asarray(sources, dtype=np.int64))
    window = _window(store, t, tau)
    seen = np.zeros(store.num_people, dtype=bool)
    seen[sources] = True

    result = TraceResult()
    # (step, location) pairs expanded anywhere in the check tree; a pair's
    # visitors are all traced the first time, so later hops skip it.
    expanded = np.empty(0, dtype=np.int64)
    n_loc = store.num_locations
    frontier = sources
    for _ in range(max_order):
        edges_by_step: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        for step in window:
            if frontier.size == 0:
                break
            locations = store.trajectories(frontier, step)
            valid = locations >= 0
            result.pair_queries += int(np.count_nonzero(valid))
            if expanded.size:
                codes = step * n_loc + locations.astype(np.int64)
                idx = np.minimum(np.searchsorted(expanded, codes), expanded.size - 1)
                valid &= expanded[idx] != codes
            edges_by_step[step] = (frontier[valid], locations[valid])

        if reduction == "off":
            pairs = [(step, np.unique(locs)) for step, (_, locs) in edges_by_step.items()
                     if locs.size]
            mask, visits = _expand_pairs(store, pairs)
            result.location_visits += visits
            result.distinct_pairs += visits
            new_codes = [step * n_loc + locs.astype(np.int64) for step, locs in pairs]
        else:
            outcome = reduce_location_set(edges_by_step, store, seen, mode=reduction)
            mask = outcome.traced_mask
            result.location_visits += outcome.location_visits
            result.distinct_pairs += outcome.location_visits
            result.cover_fallbacks += int(outcome.fell_back)
            result.dropped_pairs += outcome.dropped_pairs
            new_codes = [step * n_loc + locs.astype(np.int64)
                         for step, locs in outcome.kept_pairs]
            if reduction == "guarded":
                new_codes.extend(step * n_loc + locs.astype(np.int64)
                                 for step, locs in outcome.flagged_pairs)
        if new_codes:
            expanded = np.union1d(expanded, np.concatenate(new_codes))

        new = np.nonzero(mask & ~seen)[0]
        result.per_order.append(new)
        seen[new] = True
        frontier = new
    return result
