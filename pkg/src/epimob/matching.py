"""Maximum bipartite matching and minimum vertex cover.

Small, dependency-free routines used to shrink the set of locations a
contact trace has to expand.  The matcher is Kuhn's augmenting-path
algorithm; the cover comes from the classic alternating-path construction,
so its size always equals the matching size (König's theorem).
"""

from __future__ import annotations

from typing import Sequence

__all__ = ["max_bipartite_matching", "min_vertex_cover"]

_UNMATCHED = -1


def max_bipartite_matching(n_left: int, n_right: int,
                           adj: Sequence[Sequence[int]]) -> tuple[list[int], list[int]]:
    """Match left nodes to right nodes, maximizing cardinality.

    adj[i] lists the right-node indices adjacent to left node i.  Returns
    (match_left, match_right) where match_left[i] is the right partner of
    left node i or -1, and symmetrically for match_right.
    """
    match_left = [_UNMATCHED] * n_left
    match_right = [_UNMATCHED] * n_right

    def try_augment(u: int, visited: list[bool]) -> bool:
        for v in adj[u]:
            if visited[v]:
                continue
            visited[v] = True
            if match_right[v] == _UNMATCHED or try_augment(match_right[v], visited):
                match_left[u] = v
                match_right[v] = u
                return True
        return False

    for u in range(n_left):
        if adj[u]:
            try_augment(u, [False] * n_right)
    return match_left, match_right


def min_vertex_cover(n_left: int, n_right: int,
                     adj: Sequence[Sequence[int]]) -> tuple[list[bool], list[bool]]:
    """Minimum vertex cover of a bipartite graph via König's construction.

    Returns boolean membership masks (left_in_cover, right_in_cover).  The
    cover is (left not reachable) + (right reachable), where reachability
    alternates non-matching edges left-to-right and matching edges
    right-to-left, starting from unmatched left nodes.
    """
    match_left, match_right = max_bipartite_matching(n_left, n_right, adj)

    reach_left = [False] * n_left
    reach_right = [False] * n_right
    frontier = [u for u in range(n_left) if match_left[u] == _UNMATCHED and adj[u]]
    for u in frontier:
        reach_left[u] = True
    while frontier:
        nxt: list[int] = []
        for u in frontier:
            for v in adj[u]:
                if reach_right[v] or match_left[u] == v:
                    continue
                reach_right[v] = True
                w = match_right[v]
                if w != _UNMATCHED and not reach_left[w]:
                    reach_left[w] = True
                    nxt.append(w)
        frontier = nxt

    # Isolated left nodes (no edges) stay out of the cover.
    left_cover = [match_left[u] != _UNMATCHED and not reach_left[u] for u in range(n_left)]
    right_cover = reach_right
    return left_cover, right_cover
