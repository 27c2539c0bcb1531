"""On-demand forwarding: greedy hypercube steps with backtracking.

A data message moves to whichever neighbor is XOR-closest to the
destination (secondaries count), skipping the sender, the parent and
neighbors blocked for that destination.  A message that comes back is a
dead end: the returned neighbor gets a blocked mark and the next
candidate is tried; when greedy candidates run out the message climbs to
the parent, and after that every remaining neighbor is probed before the
message is handed back to whoever sent it.  Blocked marks age out on a
timer and are wiped when the blocked neighbor announces a new link.

Resolution traffic replaces the XOR metric with closeness, in the
delegation tree, to the best prefix of the looked-up virtual address; it
skips the retry-and-mark step entirely so lookups climb straight toward
the space owner, and it neither reads nor writes marks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .addressing import tree_distance_int

PHASE_GREEDY = "greedy"
PHASE_PARENT = "parent"
PHASE_EXHAUSTIVE = "exhaustive"
PHASE_DONE = "done"


@dataclass(frozen=True)
class NeighborView:
    """What a forwarding decision sees of one logical neighbor."""

    name: str
    main: int
    addrs: tuple[int, ...]

    def xor_distance_to(self, dest: int) -> int:
        return min(((a ^ dest).bit_count()) for a in self.addrs)


@dataclass
class Exploration:
    """Per-message forwarding state kept at one pivot node.

    ``tried`` drives candidate exclusion and is reset when the message
    escalates to the parent ("remaining neighbors become unexplored");
    ``probed`` records everyone ever sent to and is never reset, so a
    late return is still recognized as a return.
    """

    dfs_parent: Optional[str]
    tried: set[str] = field(default_factory=set)
    probed: set[str] = field(default_factory=set)
    phase: str = PHASE_GREEDY

    def record_send(self, name: str) -> None:
        self.tried.add(name)
        self.probed.add(name)


def prune_marks(node, now: int) -> list[tuple[int, int]]:
    """Drop every blocked mark whose timer has expired; report (neighbor, dest) pairs."""
    gone = []
    for dest, by_nbr in list(node.marks.items()):
        for nbr, expires in list(by_nbr.items()):
            if expires <= now:
                del by_nbr[nbr]
                gone.append((nbr, dest))
        if not by_nbr:
            del node.marks[dest]
    return gone


def mark_blocked(node, neighbor_main: int, dest: int, expires_at: int) -> None:
    node.marks.setdefault(dest, {})[neighbor_main] = expires_at


def has_mark(node, neighbor_main: int, dest: int) -> bool:
    return neighbor_main in node.marks.get(dest, {})


def clear_marks_for_neighbor(node, neighbor_main: int) -> int:
    """Remove all marks naming one neighbor (it announced a new link)."""
    cleared = 0
    for dest, by_nbr in list(node.marks.items()):
        if by_nbr.pop(neighbor_main, None) is not None:
            cleared += 1
        if not by_nbr:
            del node.marks[dest]
    return cleared


def blocked_neighbors(node, dest: int, now: int) -> set[int]:
    by_nbr = node.marks.get(dest)
    if not by_nbr:
        return set()
    expired = [nbr for nbr, expires in by_nbr.items() if expires <= now]
    for nbr in expired:
        del by_nbr[nbr]
    return set(by_nbr)


def resolution_metric(u_main: int, v_addr: int, dim: int) -> tuple[int, int]:
    """Tree distance from a neighbor to the closest prefix of a virtual address.

    Prefixes are the virtual address with its low d-s bits cleared for
    s = 0 .. d; the space owner's main address is one of them, so walking
    the minimum descends the delegation chain toward it.  Returns
    (distance, -longest prefix length achieving it): every node is
    distance 0 from the s = 0 prefix's side of the tree eventually, so
    among equally-near neighbors the one matching a longer prefix is the
    one deeper along the chain and must win.
    """
    best_d = best_s = None
    for s in range(dim + 1):
        k = dim - s
        prefix = (v_addr >> k) << k
        d = tree_distance_int(u_main, prefix)
        if best_d is None or d < best_d or (d == best_d and s > best_s):
            best_d, best_s = d, s
    return best_d, -best_s


def holder_of(neighbors: Sequence[NeighborView], dest: int) -> Optional[NeighborView]:
    """The neighbor that owns the destination address outright, if any.

    Direct delivery bypasses every exclusion: a message for a neighbor
    is handed to that neighbor even when the neighbor is the parent.
    """
    for n in neighbors:
        if dest in n.addrs:
            return n
    return None


def pick_data_candidate(
    neighbors: Sequence[NeighborView],
    dest: int,
    st: Exploration,
    parent_name: Optional[str],
    blocked: set[int],
) -> Optional[NeighborView]:
    """Next neighbor to try for a data message, advancing phases as needed.

    Greedy scans XOR-closest first among unmarked non-parent neighbors;
    the parent is probed once as its own phase (remaining neighbors are
    reset to unexplored then); the exhaustive sweep ignores marks and
    takes everyone left in address order.  Returns None when the node is
    out of options.
    """
    direct = holder_of(neighbors, dest)
    if direct is not None and direct.name not in st.tried:
        return direct
    while st.phase != PHASE_DONE:
        if st.phase == PHASE_GREEDY:
            candidates = [
                n
                for n in neighbors
                if n.name not in st.tried
                and n.name != st.dfs_parent
                and n.name != parent_name
                and n.main not in blocked
            ]
            if candidates:
                return min(candidates, key=lambda n: (n.xor_distance_to(dest), n.main))
            st.phase = PHASE_PARENT
        elif st.phase == PHASE_PARENT:
            st.phase = PHASE_EXHAUSTIVE
            if parent_name is not None and parent_name != st.dfs_parent:
                parent = next((n for n in neighbors if n.name == parent_name), None)
                if parent is not None:
                    st.tried = {parent_name}
                    return parent
            st.tried = set()
        else:
            candidates = [
                n for n in neighbors if n.name not in st.tried and n.name != st.dfs_parent
            ]
            if candidates:
                return min(candidates, key=lambda n: n.main)
            st.phase = PHASE_DONE
    return None


def pick_resolution_candidate(
    neighbors: Sequence[NeighborView],
    v_addr: int,
    st: Exploration,
    parent_name: Optional[str],
    dim: int,
) -> Optional[NeighborView]:
    """Next neighbor for a lookup: one metric-best probe, then parent, then sweep."""
    while st.phase != PHASE_DONE:
        if st.phase == PHASE_GREEDY:
            if not st.tried:
                candidates = [n for n in neighbors if n.name != st.dfs_parent]
                if candidates:
                    return min(
                        candidates,
                        key=lambda n: (resolution_metric(n.main, v_addr, dim), n.main),
                    )
            st.phase = PHASE_PARENT
        elif st.phase == PHASE_PARENT:
            st.phase = PHASE_EXHAUSTIVE
            if parent_name is not None and parent_name != st.dfs_parent:
                parent = next(
                    (n for n in neighbors if n.name == parent_name and n.name not in st.tried),
                    None,
                )
                if parent is not None:
                    st.tried = {parent_name}
                    return parent
            st.tried = set()
        else:
            candidates = [
                n for n in neighbors if n.name not in st.tried and n.name != st.dfs_parent
            ]
            if candidates:
                return min(candidates, key=lambda n: n.main)
            st.phase = PHASE_DONE
    return None
