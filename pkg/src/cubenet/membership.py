"""Node lifecycle on the shared d-bit address space.

A joining node picks the best block offered by its already-joined radio
neighbors; the offerer either halves its own block (upper half goes to
the child) or hands over a block reclaimed from a departed child.  The
delegating node is the new node's parent, so successful joins grow the
delegation tree.  Nodes that are physically connected but not
hypercube-adjacent may claim a secondary address out of their own block
to create the missing logical edge.

``Network`` owns the physical world (positions, explicit link overrides)
and the joined nodes; the logical adjacency is always derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .addressing import (
    Address,
    AddressBlock,
    block_addresses,
    split_block,
    tree_parent,
)


@dataclass(frozen=True)
class AddressOffer:
    """One neighbor's proposal of a block for a joining node."""

    offerer: Address
    offered: AddressBlock
    offerer_name: str
    from_free_list: bool = False


@dataclass
class Node:
    """Per-node state: identity, addresses, delegation records, rendezvous store.

    ``table``, ``marks``, ``expl`` and ``cache`` are owned by whichever
    routing mode the simulation runs; membership never touches them.
    """

    name: str
    dim: int
    main: Address
    block: AddressBlock
    initial_mask: int
    parent: Optional[Address] = None
    children: list[tuple[Address, int]] = field(default_factory=list)
    secondaries: list[Address] = field(default_factory=list)
    free_blocks: list[AddressBlock] = field(default_factory=list)
    store: dict[int, dict[str, int]] = field(default_factory=dict)
    table: object = None
    marks: dict[int, dict[int, int]] = field(default_factory=dict)
    expl: dict[int, object] = field(default_factory=dict)
    cache: dict[str, tuple[int, int]] = field(default_factory=dict)
    recovering: bool = False
    detached: bool = False

    def address_values(self) -> list[int]:
        return [self.main.value] + [s.value for s in self.secondaries]

    def has_address(self, value: int) -> bool:
        if value == self.main.value:
            return True
        return any(s.value == value for s in self.secondaries)

    @property
    def initial_block(self) -> AddressBlock:
        return AddressBlock(self.main, self.initial_mask)

    def store_size(self) -> int:
        return sum(len(m) for m in self.store.values())


class Network:
    """Physical topology plus the joined nodes and the address index."""

    def __init__(self, dim: int, radio_range: float = 1.0):
        self.dim = dim
        self.radio_range = radio_range
        self.nodes: dict[str, Node] = {}
        self.positions: dict[str, tuple[float, float]] = {}
        self.declared: set[frozenset[str]] = set()
        self.severed: set[frozenset[str]] = set()
        self.addr_owner: dict[int, str] = {}
        self.orphaned: list[AddressBlock] = []
        self.ever_joined = False
        self.logical: dict[str, dict[str, tuple[int, int]]] = {}

    def place(self, name: str, x: float, y: float) -> None:
        self.positions[name] = (x, y)

    def remove(self, name: str) -> None:
        self.positions.pop(name, None)
        self.logical.pop(name, None)

    def phys_connected(self, a: str, b: str) -> bool:
        if a == b or a not in self.positions or b not in self.positions:
            return False
        pair = frozenset((a, b))
        if pair in self.severed:
            return False
        if pair in self.declared:
            return True
        (ax, ay), (bx, by) = self.positions[a], self.positions[b]
        return math.dist((ax, ay), (bx, by)) <= self.radio_range

    def phys_neighbors(self, name: str) -> list[str]:
        return sorted(n for n in self.positions if self.phys_connected(name, n))

    def owner(self, value: int) -> Optional[str]:
        return self.addr_owner.get(value)

    def index_node(self, node: Node) -> None:
        for v in node.address_values():
            held_by = self.addr_owner.get(v)
            if held_by is not None and held_by != node.name:
                raise AssertionError(f"address {v:0{self.dim}b} already held by {held_by}")
            self.addr_owner[v] = node.name

    def unindex_node(self, node: Node) -> None:
        for v in node.address_values():
            if self.addr_owner.get(v) == node.name:
                del self.addr_owner[v]

    def recompute_logical(self) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
        """Rebuild the derived logical adjacency; report (added, removed) links.

        Two joined nodes share a logical link iff they are physically
        connected and some pair of their addresses differs in one bit.
        The lowest such (mine, theirs) pair labels the link.
        """
        new: dict[str, dict[str, tuple[int, int]]] = {n: {} for n in self.nodes}
        names = sorted(self.nodes)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                if not self.phys_connected(a, b):
                    continue
                pairs = [
                    (x, y)
                    for x in self.nodes[a].address_values()
                    for y in self.nodes[b].address_values()
                    if ((x ^ y).bit_count()) == 1
                ]
                if pairs:
                    mine, theirs = min(pairs)
                    new[a][b] = (mine, theirs)
                    new[b][a] = (theirs, mine)
        old_pairs = {
            frozenset((a, b)) for a, peers in self.logical.items() for b in peers
        }
        new_pairs = {frozenset((a, b)) for a, peers in new.items() for b in peers}
        added = sorted(tuple(sorted(p)) for p in new_pairs - old_pairs)
        removed = sorted(tuple(sorted(p)) for p in old_pairs - new_pairs)
        self.logical = new
        return added, removed

    def logical_peers(self, name: str) -> dict[str, tuple[int, int]]:
        return self.logical.get(name, {})


def offer_from(node: Node) -> Optional[AddressOffer]:
    """What ``node`` would delegate to a joiner right now, if anything.

    Reclaimed blocks are preferred (largest first, then lowest base) but
    only those whose base is hypercube-adjacent to one of the node's own
    addresses, since the joiner must end up with a usable logical link.
    Otherwise the node halves its current block; secondaries inside the
    given-away half are released when the offer is taken.
    """
    usable = [
        fb
        for fb in node.free_blocks
        if any(((fb.base.value ^ v).bit_count()) == 1 for v in node.address_values())
    ]
    if usable:
        best = min(usable, key=lambda fb: (fb.mask_len, fb.base.value))
        return AddressOffer(node.main, best, node.name, from_free_list=True)
    if node.block.mask_len < node.dim:
        _, delegated = split_block(node.block)
        return AddressOffer(node.main, delegated, node.name)
    return None


def collect_offers(net: Network, joiner: str) -> list[AddressOffer]:
    """Offers from every joined physical neighbor of ``joiner``."""
    offers = []
    for n in net.phys_neighbors(joiner):
        node = net.nodes.get(n)
        if node is None:
            continue
        offer = offer_from(node)
        if offer is not None:
            offers.append(offer)
    return offers


def best_offer(offers: list[AddressOffer]) -> AddressOffer:
    """Largest offered block wins; ties broken by lowest offerer address."""
    if not offers:
        raise ValueError("cannot choose from zero offers")
    return min(offers, key=lambda o: (o.offered.mask_len, o.offerer.value))


def apply_join(net: Network, name: str, offer: AddressOffer) -> tuple[Node, int]:
    """Consume the chosen offer: mutate the offerer, create and index the node.

    Secondaries the offerer held inside the delegated block are released
    (the block, addresses and all, now belongs to the child).  Returns
    the new node and the number of rendezvous entries handed over.
    """
    offerer = net.nodes[offer.offerer_name]
    if offer.from_free_list:
        offerer.free_blocks.remove(offer.offered)
    else:
        retained, delegated = split_block(offerer.block)
        if delegated != offer.offered:
            raise AssertionError(f"stale offer {offer.offered}, block is now {offerer.block}")
        offerer.block = retained
    released = [s for s in offerer.secondaries if offer.offered.contains_value(s.value)]
    for s in released:
        offerer.secondaries.remove(s)
        if net.addr_owner.get(s.value) == offerer.name:
            del net.addr_owner[s.value]
    offerer.children.append((offer.offered.base, offer.offered.mask_len))
    node = Node(
        name=name,
        dim=net.dim,
        main=offer.offered.base,
        block=offer.offered,
        initial_mask=offer.offered.mask_len,
        parent=offer.offerer,
    )
    moved = transfer_store(offerer, node, offer.offered)
    net.nodes[name] = node
    net.index_node(node)
    net.ever_joined = True
    return node, moved


def make_root(net: Network, name: str) -> Node:
    """First node of a fresh network: owns the entire space."""
    main = Address(0, net.dim)
    node = Node(name=name, dim=net.dim, main=main, block=AddressBlock(main, 0), initial_mask=0)
    net.nodes[name] = node
    net.index_node(node)
    net.ever_joined = True
    return node


def transfer_store(src: Node, dst: Node, block: AddressBlock) -> int:
    """Move every rendezvous entry whose key falls inside ``block``."""
    moved = 0
    for v in [v for v in src.store if block.contains_value(v)]:
        entries = src.store.pop(v)
        dst.store.setdefault(v, {}).update(entries)
        moved += len(entries)
    return moved


def hypercube_adjacent(a: Node, b: Node) -> bool:
    return any(((x ^ y).bit_count()) == 1 for x in a.address_values() for y in b.address_values())


def acquire_secondary(net: Network, v_name: str, n_name: str) -> Optional[tuple[str, Address]]:
    """Give one side of a physical-only link a secondary address.

    ``v`` searches its own unallocated addresses for one adjacent to any
    of ``n``'s addresses; if it has none, ``n`` tries from its side.  At
    most one secondary is claimed per physical link.  Returns the
    claiming node's name and the new address, or None.
    """
    v, n = net.nodes[v_name], net.nodes[n_name]
    if hypercube_adjacent(v, n):
        return None
    for claimer, peer in ((v, n), (n, v)):
        taken = set(claimer.address_values())
        peer_values = peer.address_values()
        for addr in block_addresses(claimer.block):
            if addr.value in taken:
                continue
            if any(((addr.value ^ pv).bit_count()) == 1 for pv in peer_values):
                claimer.secondaries.append(addr)
                net.addr_owner[addr.value] = claimer.name
                return claimer.name, addr
    return None


def manages(node: Node, value: int) -> bool:
    """Is ``value`` inside the space this node currently answers for?

    Covers the node's own block (minus anything delegated to a child)
    and any blocks reclaimed from departed children, so that every
    address keeps exactly one manager across churn.
    """
    if node.block.contains_value(value):
        return not any(
            AddressBlock(base, mask).contains_value(value) for base, mask in node.children
        )
    return any(fb.contains_value(value) for fb in node.free_blocks)


@dataclass
class LeaveReport:
    """What a departure did to the rest of the network."""

    parent_name: Optional[str]
    reclaimed: list[AddressBlock]
    orphans: list[str]
    store_entries_moved: int
    store_entries_dropped: int


def leave_node(net: Network, name: str, keep_position: bool = False) -> LeaveReport:
    """Remove a node: return its space to its parent, orphan its children.

    The departing node's current block and its own free list both go to
    the parent's free list (dropping them would leave addresses with no
    manager).  Rendezvous entries follow the space.  With no live parent
    the space and entries are orphaned.
    """
    node = net.nodes.pop(name)
    net.unindex_node(node)
    if not keep_position:
        net.remove(name)

    orphans = []
    for child_base, _mask in node.children:
        child_name = net.owner(child_base.value)
        if child_name is not None and child_name in net.nodes:
            child = net.nodes[child_name]
            if child.parent == node.main:
                child.parent = None
                orphans.append(child_name)

    reclaimed = [node.block] + list(node.free_blocks)
    parent_name = net.owner(node.parent.value) if node.parent is not None else None
    if parent_name is not None:
        parent = net.nodes[parent_name]
        parent.free_blocks.extend(reclaimed)
        parent.children = [(a, m) for a, m in parent.children if a != node.main]
        moved = 0
        for v, entries in node.store.items():
            parent.store.setdefault(v, {}).update(entries)
            moved += len(entries)
        node.store.clear()
        return LeaveReport(parent_name, reclaimed, orphans, moved, 0)
    dropped = node.store_size()
    net.orphaned.extend(reclaimed)
    return LeaveReport(None, reclaimed, orphans, 0, dropped)


def check_partition(net: Network) -> None:
    """Assert the global space invariants.

    Every assigned address has one owner; each node's main is its block
    base and its secondaries sit inside its block; the current blocks,
    free lists and orphaned blocks tile the whole space with no overlap.
    """
    for name, node in net.nodes.items():
        if node.main != node.block.base:
            raise AssertionError(f"{name}: main {node.main} is not its block base {node.block}")
        seen: set[int] = set()
        for v in node.address_values():
            if v in seen:
                raise AssertionError(f"{name}: duplicate address {v:0{net.dim}b}")
            seen.add(v)
            if net.addr_owner.get(v) != name:
                raise AssertionError(f"{name}: address {v:0{net.dim}b} not indexed to it")
        for s in node.secondaries:
            if not node.block.contains_value(s.value):
                raise AssertionError(f"{name}: secondary {s} outside block {node.block}")
        for base, mask in node.children:
            child_block = AddressBlock(base, mask)
            for owned in [node.block, *node.free_blocks]:
                if child_block.contains_value(owned.base.value) or owned.contains_value(base.value):
                    raise AssertionError(f"{name}: child block {child_block} overlaps {owned}")
    for v, name in net.addr_owner.items():
        if name not in net.nodes:
            raise AssertionError(f"address {v:0{net.dim}b} indexed to missing node {name}")

    if not net.ever_joined:
        return
    intervals = []
    for name, node in net.nodes.items():
        for b in [node.block, *node.free_blocks]:
            intervals.append((b.base.value, b.size, name))
    for b in net.orphaned:
        intervals.append((b.base.value, b.size, "<orphaned>"))
    intervals.sort()
    cursor = 0
    for start, size, who in intervals:
        if start != cursor:
            raise AssertionError(
                f"space gap/overlap at {start:0{net.dim}b} (expected {cursor:0{net.dim}b}, block of {who})"
            )
        cursor = start + size
    if cursor != 1 << net.dim:
        raise AssertionError(f"space only covered up to {cursor:#x}")
