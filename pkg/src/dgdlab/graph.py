"""Undirected agent communication topologies.

Agent indices are 0-based everywhere inside the library; configuration
files and printed reports use 1-based indices.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence


class NetworkGraph:
    """Undirected, simple graph over ``num_agents`` nodes.

    Edges are stored as a sorted adjacency structure so that iteration
    order is deterministic. Instances are immutable after construction
    and safe to share across concurrent readers.
    """

    __slots__ = ("_num_agents", "_edges", "_adjacency")

    def __init__(self, num_agents: int, edges: Iterable[Sequence[int]] = ()):
        if num_agents < 1:
            raise ValueError(f"num_agents must be >= 1, got {num_agents}")
        seen: set[tuple[int, int]] = set()
        adjacency: list[set[int]] = [set() for _ in range(num_agents)]
        for edge in edges:
            i, j = int(edge[0]), int(edge[1])
            if i == j:
                raise ValueError(f"self-loop on agent {i} is not allowed")
            if not (0 <= i < num_agents and 0 <= j < num_agents):
                raise ValueError(
                    f"edge ({i},{j}) out of range for {num_agents} agents"
                )
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            adjacency[i].add(j)
            adjacency[j].add(i)
        self._num_agents = num_agents
        self._edges = tuple(sorted(seen))
        self._adjacency = tuple(tuple(sorted(a)) for a in adjacency)

    @property
    def num_agents(self) -> int:
        return self._num_agents

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    def degree(self, i: int) -> int:
        return len(self._adjacency[i])

    def __repr__(self) -> str:
        return f"NetworkGraph(num_agents={self._num_agents}, edges={list(self._edges)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkGraph):
            return NotImplemented
        return (
            self._num_agents == other._num_agents and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash((self._num_agents, self._edges))


def neighbors(g: NetworkGraph, i: int) -> list[int]:
    """Sorted neighbor indices of agent ``i`` (excluding ``i`` itself)."""
    if not (0 <= i < g.num_agents):
        raise IndexError(f"agent index {i} out of range for {g.num_agents} agents")
    return list(g._adjacency[i])


def is_connected(g: NetworkGraph) -> bool:
    """True iff a path exists between every pair of agents.

    Breadth-first traversal from agent 0; a single agent with no edges
    counts as connected.
    """
    reached = [False] * g.num_agents
    reached[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in g._adjacency[u]:
            if not reached[v]:
                reached[v] = True
                count += 1
                queue.append(v)
    return count == g.num_agents
