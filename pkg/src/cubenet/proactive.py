"""Proactive routing: ordered prefix tables over the delegation tree.

Each node keeps tree entries (one per child, covering the child's
initial block, plus a default toward its parent) and shortcut entries
learned from off-tree links.  A shortcut for an endpoint x reachable in
h logical hops covers the largest prefix block B with x inside, the
local node outside, and h + tree_distance(x, z) <= tree_distance(u, z)
for every z in B; first match wins, so tables stay sorted by
non-increasing mask length with the default last.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .addressing import Address, subtree_block, tree_distance_int
from .membership import Node

ORIGIN_PARENT = "tree-parent"
ORIGIN_CHILD = "tree-child"
ORIGIN_SHORTCUT = "shortcut"
ORIGIN_RECOVERY = "recovery"


@dataclass
class RoutingEntry:
    """One prefix -> next-hop rule.

    ``next_hop`` is an address (main or secondary) of a current logical
    neighbor.  Shortcut and recovery entries remember the endpoint whose
    advertisement produced them and, for shortcuts, the off-tree link the
    advertisement chain started from.
    """

    base: int
    mask_len: int
    next_hop: int
    origin: str
    endpoint: Optional[int] = None
    link_id: Optional[frozenset[str]] = None

    def matches(self, dest: int, dim: int) -> bool:
        low = dim - self.mask_len
        return (dest >> low) == (self.base >> low)

    def render(self, dim: int) -> str:
        return f"{self.base:0{dim}b}/{self.mask_len}->{self.next_hop:0{dim}b}"


@dataclass
class RoutingTable:
    """First-match table kept sorted by non-increasing mask length."""

    dim: int
    entries: list[RoutingEntry] = field(default_factory=list)

    def insert(self, entry: RoutingEntry) -> None:
        i = 0
        while i < len(self.entries) and self.entries[i].mask_len >= entry.mask_len:
            i += 1
        self.entries.insert(i, entry)

    def first_match(self, dest: int) -> Optional[RoutingEntry]:
        for e in self.entries:
            if e.matches(dest, self.dim):
                return e
        return None

    def remove_where(self, pred: Callable[[RoutingEntry], bool]) -> list[RoutingEntry]:
        gone = [e for e in self.entries if pred(e)]
        if gone:
            self.entries = [e for e in self.entries if not pred(e)]
        return gone

    def shortcut_for(self, endpoint: int) -> Optional[RoutingEntry]:
        for e in self.entries:
            if e.origin == ORIGIN_SHORTCUT and e.endpoint == endpoint:
                return e
        return None

    def default_entry(self) -> Optional[RoutingEntry]:
        for e in self.entries:
            if e.mask_len == 0:
                return e
        return None

    def has_exact(self, base: int, mask_len: int, next_hop: int) -> bool:
        return any(
            e.base == base and e.mask_len == mask_len and e.next_hop == next_hop
            for e in self.entries
        )

    def __iter__(self) -> Iterator[RoutingEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def render(self) -> str:
        return " ".join(e.render(self.dim) for e in self.entries)


def compute_shortcut_block(u: int, x: int, h: int, dim: int) -> Optional[tuple[int, int]]:
    """Largest prefix block an off-tree route to ``x`` may serve from ``u``.

    Scans mask lengths from 1 up; the first block containing x but not u
    whose every address z satisfies h + d_T(x, z) <= d_T(u, z) wins.
    Enumeration over block members is fine at simulator scale (d <= 16).
    """
    for mask_len in range(1, dim + 1):
        low = dim - mask_len
        base = (x >> low) << low
        if (u >> low) == (base >> low):
            continue
        if all(
            h + tree_distance_int(x, z) <= tree_distance_int(u, z)
            for z in range(base, base + (1 << low))
        ):
            return base, mask_len
    return None


def shortcut_holds(u: int, entry: RoutingEntry, h: int, dim: int) -> bool:
    """Re-check the install predicate for an existing shortcut entry."""
    if entry.endpoint is None:
        return False
    low = dim - entry.mask_len
    return all(
        h + tree_distance_int(entry.endpoint, z) <= tree_distance_int(u, z)
        for z in range(entry.base, entry.base + (1 << low))
    )


def init_tree_entries(node: Node) -> RoutingTable:
    """Fresh table holding only delegation-tree entries.

    One entry per child covering the block it was given when it joined,
    then a default toward the parent; the first node has no default.
    """
    table = RoutingTable(node.dim)
    for child_addr, mask in node.children:
        table.insert(
            RoutingEntry(child_addr.value, mask, child_addr.value, ORIGIN_CHILD)
        )
    if node.parent is not None:
        table.insert(RoutingEntry(0, 0, node.parent.value, ORIGIN_PARENT))
    return table


def _block_within(base_a: int, mask_a: int, base_b: int, mask_b: int, dim: int) -> bool:
    """Is dyadic block A contained in dyadic block B?"""
    if mask_b > mask_a:
        return False
    low = dim - mask_b
    return (base_a >> low) == (base_b >> low)


def entry_crosses_edge(entry: RoutingEntry, cut_child_main: int, dim: int) -> bool:
    """Would traffic using this entry have relied on the tree edge above ``cut_child_main``?

    True when the stored endpoint and part of the covered block sit on
    opposite sides of the subtree rooted at the cut child: the
    delegation-tree paths the entry's distances were computed over then
    cross the now-dead edge, so the entry must be withdrawn.
    """
    if entry.endpoint is None:
        return False
    sub = subtree_block(Address(cut_child_main, dim))
    sub_base, sub_mask = sub.base.value, sub.mask_len
    if sub.contains_value(entry.endpoint):
        return not _block_within(entry.base, entry.mask_len, sub_base, sub_mask, dim)
    overlap = _block_within(entry.base, entry.mask_len, sub_base, sub_mask, dim) or _block_within(
        sub_base, sub_mask, entry.base, entry.mask_len, dim
    )
    return overlap
