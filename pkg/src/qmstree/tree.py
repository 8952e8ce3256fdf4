"""Coordinates on the semi-infinite rooted Cayley tree of order k.

A vertex is a tuple of child indices ``(i_1, ..., i_n)`` with each
``i_j`` in ``1..k``; the empty tuple is the root.  Regions (``SiteSet``)
are tuples of vertices in canonical order: by level, then
lexicographically by coordinates.  With this order the ball of radius
``n - 1`` is a prefix of the ball of radius ``n``, and the canonical
position of a vertex coincides with its breadth-first index, so the
children of the vertex at position ``i`` sit at ``k*i + 1 .. k*i + k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Tuple

from .errors import NotInRegion

Vertex = Tuple[int, ...]
SiteSet = Tuple[Vertex, ...]

ROOT: Vertex = ()


@dataclass(frozen=True)
class TreeShape:
    """Branching order ``k`` and local dimension ``d`` (sites carry M_d)."""

    k: int = 2
    d: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"branching order must be >= 1, got {self.k}")
        if self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got {self.d}")

    def level_size(self, n: int) -> int:
        return self.k**n

    def ball_size(self, n: int) -> int:
        if self.k == 1:
            return n + 1
        return (self.k ** (n + 1) - 1) // (self.k - 1)


def site_key(v: Vertex):
    return (len(v), v)


def canonical(sites: Iterable[Vertex]) -> SiteSet:
    """Deduplicate and sort vertices into canonical order."""
    return tuple(sorted(set(tuple(v) for v in sites), key=site_key))


def check_vertex(v: Vertex, shape: TreeShape) -> None:
    for i in v:
        if not 1 <= i <= shape.k:
            raise ValueError(f"coordinate {i} of {v} outside 1..{shape.k}")


def level(v: Vertex) -> int:
    return len(v)


def parent(v: Vertex) -> Vertex:
    if not v:
        raise ValueError("the root has no parent")
    return v[:-1]


def successors(v: Vertex, shape: TreeShape) -> SiteSet:
    return tuple(tuple(v) + (i,) for i in range(1, shape.k + 1))


@lru_cache(maxsize=None)
def level_set(n: int, k: int) -> SiteSet:
    """All vertices at distance exactly ``n`` from the root, W_n."""
    if n < 0:
        raise ValueError("level must be non-negative")
    return tuple(product(range(1, k + 1), repeat=n))


@lru_cache(maxsize=None)
def _ball(n: int, k: int) -> SiteSet:
    out = []
    for m in range(n + 1):
        out.extend(level_set(m, k))
    return tuple(out)


def ball(n: int, shape: TreeShape) -> SiteSet:
    """Vertices of level <= n (Lambda_n) in canonical order."""
    if n < 0:
        raise ValueError("ball radius must be non-negative")
    return _ball(n, shape.k)


def slab(n: int, shape: TreeShape) -> SiteSet:
    """The two-level region W_n u W_{n+1}."""
    return level_set(n, shape.k) + level_set(n + 1, shape.k)


def shift(g: Vertex, v: Vertex) -> Vertex:
    """alpha_g: maps the whole tree onto the subtree rooted at g."""
    return tuple(g) + tuple(v)


@lru_cache(maxsize=256)
def _index_map(region: SiteSet) -> dict:
    return {v: i for i, v in enumerate(region)}


def site_index(v: Vertex, region: SiteSet) -> int:
    try:
        return _index_map(tuple(region))[tuple(v)]
    except KeyError:
        raise NotInRegion(f"{v} is not in the region") from None


def children_index(i: int, k: int) -> range:
    """BFS positions of the children of the vertex at BFS position i."""
    return range(k * i + 1, k * i + k + 1)
