"""Deterministic discrete-event simulation of scripted scenarios.

One tick moves a message one logical hop.  Within a tick, topology
changes run first, then protocol control traffic, then application
sends; ties inside a category are broken by insertion order, and every
tie-break in the protocols is by lowest address, so a (scenario, seed)
pair always produces byte-identical traces.

The simulator drives membership (joins, departures, secondaries),
whichever routing mode the scenario selects, the rendezvous service
(automatic registration at join, scripted lookups with caching) and, in
proactive mode, route advertisements over off-tree links and the
parent-loss recovery protocol.  After every scenario event it audits the
address-space invariants: unique ownership, block partition, one manager
per address.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import membership, reactive, rendezvous
from .addressing import Address, tree_ancestors
from .membership import Network, Node, manages
from .proactive import (
    ORIGIN_CHILD,
    ORIGIN_PARENT,
    ORIGIN_RECOVERY,
    ORIGIN_SHORTCUT,
    RoutingEntry,
    RoutingTable,
    compute_shortcut_block,
    entry_crosses_edge,
    init_tree_entries,
    shortcut_holds,
)
from .reactive import (
    PHASE_EXHAUSTIVE,
    PHASE_GREEDY,
    Exploration,
    NeighborView,
    blocked_neighbors,
    clear_marks_for_neighbor,
    mark_blocked,
    pick_data_candidate,
    pick_resolution_candidate,
    prune_marks,
)
from .scenario import Scenario

CAT_TOPOLOGY, CAT_CONTROL, CAT_APP, CAT_AUDIT = 0, 1, 2, 3

ROUTED_DATA = ("data", "reply")
ROUTED_RESOLUTION = ("register", "resolve")


class ScenarioRuntimeError(RuntimeError):
    """A scenario referenced a name it never introduced, or similar misuse."""


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    node: str
    addr: str
    kind: str
    msg: Optional[int]
    detail: str

    def format(self) -> str:
        m = self.msg if self.msg is not None else "-"
        return f"t={self.tick} node={self.node}({self.addr}) ev={self.kind} msg={m} detail={self.detail}"


def emit_trace(trace: list[TraceEvent], sink=None) -> str:
    """Render trace events one per line; optionally write them to ``sink``."""
    text = "".join(ev.format() + "\n" for ev in trace)
    if sink is not None:
        sink.write(text)
    return text


@dataclass
class Metrics:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    no_route: int = 0
    delivery_ratio: float = 1.0
    mean_hops: float = 0.0
    mean_stretch: float = 0.0
    control_messages: int = 0
    mean_table_size: float = 0.0
    max_table_size: int = 0
    detached_nodes: int = 0
    registrations: int = 0
    registration_failures: int = 0
    resolutions: int = 0
    resolved: int = 0
    resolution_not_found: int = 0
    resolution_failures: int = 0

    FIELDS = (
        "sent",
        "delivered",
        "dropped",
        "no_route",
        "delivery_ratio",
        "mean_hops",
        "mean_stretch",
        "control_messages",
        "mean_table_size",
        "max_table_size",
        "detached_nodes",
        "registrations",
        "registration_failures",
        "resolutions",
        "resolved",
        "resolution_not_found",
        "resolution_failures",
    )

    def to_lines(self) -> list[str]:
        return [f"{name}={getattr(self, name)!r}" for name in self.FIELDS]


@dataclass
class Message:
    id: int
    kind: str
    src: str
    dest: int
    ttl: int
    payload: dict
    app: bool = False
    hops: int = 0
    path: list[int] = field(default_factory=list)


@dataclass
class SimResult:
    trace: list[TraceEvent]
    metrics: Metrics
    sim: "Simulator"

    def __iter__(self):
        return iter((self.trace, self.metrics, self.sim))


class Simulator:
    def __init__(self, sc: Scenario, record_trace: bool = True):
        self.sc = sc
        self.dim = sc.dim
        self.net = Network(sc.dim, sc.radio_range)
        self.now = 0
        self.trace: list[TraceEvent] = []
        self.record_trace = record_trace
        self.metrics = Metrics()
        self.pins: dict[str, int] = {}
        self.known: set[str] = set()
        self.detached: set[str] = set()
        self.resolutions: list[tuple[int, str, str, Optional[int], str]] = []
        self._queue: list[tuple[int, int, int, Callable[[], None]]] = []
        self._seq = 0
        self._next_msg = 1
        self._hops_total = 0
        self._stretch_total = 0.0
        self._stretch_count = 0
        self._topo_ver = 0
        self._views: dict[str, list[NeighborView]] = {}
        self._bfs_cache: dict[tuple[int, str], dict[str, int]] = {}
        self._recover: dict[int, dict] = {}
        self._next_recover = 1
        self._msg_visited: dict[int, set[str]] = {}
        self.backtracks = 0
        self.audits = 0
        self._load_events()

    # -- plumbing ---------------------------------------------------------

    def _push(self, tick: int, cat: int, fn: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (tick, cat, self._seq, fn))

    def _load_events(self) -> None:
        handlers = {
            "join": self._ev_join,
            "leave": self._ev_leave,
            "move": self._ev_move,
            "send": self._ev_send,
            "resolve": self._ev_resolve,
            "cut": self._ev_cut,
            "link": self._ev_link,
            "pin_hash": self._ev_pin,
        }
        cats = {
            "join": CAT_TOPOLOGY,
            "leave": CAT_TOPOLOGY,
            "move": CAT_TOPOLOGY,
            "cut": CAT_TOPOLOGY,
            "link": CAT_TOPOLOGY,
            "pin_hash": CAT_TOPOLOGY,
            "send": CAT_APP,
            "resolve": CAT_APP,
        }
        audited = set()
        for ev in self.sc.sorted_events():
            fn = handlers[ev.kind]
            args = ev.args
            self._push(ev.tick, cats[ev.kind], (lambda f=fn, a=args: f(*a)))
            if ev.tick not in audited:
                audited.add(ev.tick)
                self._push(ev.tick, CAT_AUDIT, self._audit)

    def run(self) -> SimResult:
        while self._queue:
            tick, _cat, _seq, fn = heapq.heappop(self._queue)
            self.now = tick
            fn()
        self._finalize()
        return SimResult(self.trace, self.metrics, self)

    def _trace(
        self,
        name: str,
        kind: str,
        msg: Optional[int] = None,
        detail: str = "",
        addr: Optional[int] = None,
    ) -> None:
        if not self.record_trace:
            return
        if addr is None:
            node = self.net.nodes.get(name)
            addr = node.main.value if node is not None else None
        bits = format(addr, f"0{self.dim}b") if addr is not None else "-"
        self.trace.append(TraceEvent(self.now, name, bits, kind, msg, detail))

    def _bits(self, value: int) -> str:
        return format(value, f"0{self.dim}b")

    def _hash_for(self, uid: str) -> int:
        pinned = self.pins.get(uid)
        return pinned if pinned is not None else rendezvous.hash_to_virtual(uid, self.dim)

    def _ttl(self) -> int:
        if self.sc.mode == "reactive":
            return 4 * self.dim * max(len(self.net.nodes), 1)
        return 4 * self.dim

    def _require_known(self, name: str) -> None:
        if name not in self.known:
            raise ScenarioRuntimeError(f"t={self.now}: name {name!r} was never introduced")

    # -- topology ---------------------------------------------------------

    def _retopo(self) -> None:
        any_removed = False
        for _ in range(4):
            added, removed = self.net.recompute_logical()
            self._topo_ver += 1
            self._views = {}
            self._bfs_cache = {}
            any_removed = any_removed or bool(removed)
            if self.sc.mode == "proactive":
                self._consistency_sweep()
            for a, b in removed:
                self._on_link_down(a, b)
            for a, b in added:
                self._on_link_up(a, b)
            # A lost logical link over a live physical one (say, a secondary
            # released to make room for a delegation) may be repairable with
            # a different secondary; if anything is claimed, re-derive.
            repaired = False
            for a, b in removed:
                if a in self.net.nodes and b in self.net.nodes and self.net.phys_connected(a, b):
                    claimed = membership.acquire_secondary(self.net, a, b)
                    if claimed is not None:
                        who, addr = claimed
                        self._trace(who, "secondary", detail=f"addr={addr} link={a}-{b}", addr=addr.value)
                        repaired = True
            if not repaired:
                break
        if any_removed and self.sc.mode == "proactive":
            self._refresh_shortcuts()

    def _refresh_shortcuts(self) -> None:
        """Rebuild every advertised shortcut after a logical link died.

        Advertisement chains assume the links they crossed at install
        time keep existing; rather than tracking each chain's full path,
        any removal wipes advertised entries and re-advertises the
        surviving off-tree links.  Recovery entries are left alone.
        """
        for name, node in self.net.nodes.items():
            if node.table is None:
                continue
            for e in node.table.remove_where(lambda e: e.origin == ORIGIN_SHORTCUT):
                self._trace(name, "remove", detail=f"entry={e.render(self.dim)} refresh")
        seen: set[frozenset[str]] = set()
        for a in sorted(self.net.logical):
            for b in sorted(self.net.logical[a]):
                pair = frozenset((a, b))
                if pair in seen:
                    continue
                seen.add(pair)
                if self._is_tree_pair(a, b) is None:
                    self._offtree_link_up(a, b)
                    self._offtree_link_up(b, a)

    def _consistency_sweep(self) -> None:
        """Drop table entries whose next hop no longer names a logical neighbor."""
        for name, node in self.net.nodes.items():
            if node.table is None:
                continue
            peers = self.net.logical_peers(name)

            def stale(e: RoutingEntry) -> bool:
                owner = self.net.owner(e.next_hop)
                return owner is None or owner not in peers

            for e in node.table.remove_where(stale):
                self._trace(name, "remove", detail=f"entry={e.render(self.dim)}")

    def _neighbor_views(self, name: str) -> list[NeighborView]:
        views = self._views.get(name)
        if views is None:
            views = [
                NeighborView(peer, self.net.nodes[peer].main.value, tuple(self.net.nodes[peer].address_values()))
                for peer in sorted(self.net.logical_peers(name))
            ]
            self._views[name] = views
        return views

    def _parent_name(self, node: Node) -> Optional[str]:
        if node.parent is None:
            return None
        return self.net.owner(node.parent.value)

    def _is_tree_pair(self, a: str, b: str) -> Optional[tuple[str, str]]:
        """(parent_name, child_name) if the logical link is a delegation edge."""
        na, nb = self.net.nodes.get(a), self.net.nodes.get(b)
        if na is None or nb is None:
            return None
        if na.parent is not None and self.net.owner(na.parent.value) == b:
            return (b, a)
        if nb.parent is not None and self.net.owner(nb.parent.value) == a:
            return (a, b)
        return None

    def _on_link_up(self, a: str, b: str) -> None:
        tree = self._is_tree_pair(a, b)
        if self.sc.mode == "proactive":
            if tree is not None:
                self._tree_link_up(*tree)
            else:
                self._offtree_link_up(a, b)
                self._offtree_link_up(b, a)
        else:
            for gainer, peer in ((a, b), (b, a)):
                node = self.net.nodes[gainer]
                peer_main = self.net.nodes[peer].main.value
                cleared = clear_marks_for_neighbor(node, peer_main)
                if cleared:
                    self._trace(gainer, "mark-clear", detail=f"neighbor={self._bits(peer_main)} n={cleared}")
                others = [p for p in sorted(self.net.logical_peers(gainer)) if p != peer]
                for other in others:
                    self.metrics.control_messages += 1
                    self._push(
                        self.now + 1,
                        CAT_CONTROL,
                        lambda at=other, frm=gainer: self._handle_update(at, frm),
                    )
                if others:
                    self._trace(gainer, "update", detail=f"gained={peer} fanout={len(others)}")

    def _handle_update(self, at: str, frm: str) -> None:
        node = self.net.nodes.get(at)
        frm_node = self.net.nodes.get(frm)
        if node is None or frm_node is None:
            return
        cleared = clear_marks_for_neighbor(node, frm_node.main.value)
        if cleared:
            self._trace(at, "mark-clear", detail=f"neighbor={self._bits(frm_node.main.value)} n={cleared}")

    def _tree_link_up(self, parent_name: str, child_name: str) -> None:
        parent = self.net.nodes[parent_name]
        child = self.net.nodes[child_name]
        rec = next(((base, mask) for base, mask in parent.children if base == child.main), None)
        if rec is not None and parent.table is not None:
            base, mask = rec
            if not parent.table.has_exact(base.value, mask, child.main.value):
                entry = RoutingEntry(base.value, mask, child.main.value, ORIGIN_CHILD)
                parent.table.insert(entry)
                self._trace(parent_name, "install", detail=f"entry={entry.render(self.dim)}")
        if child.table is not None and child.parent is not None and child.table.default_entry() is None:
            entry = RoutingEntry(0, 0, child.parent.value, ORIGIN_PARENT)
            child.table.insert(entry)
            self._trace(child_name, "install", detail=f"entry={entry.render(self.dim)}")

    def _offtree_link_up(self, v_name: str, peer_name: str) -> None:
        v = self.net.nodes[v_name]
        peer = self.net.nodes[peer_name]
        link_id = frozenset((v_name, peer_name))
        pair = self.net.logical_peers(v_name).get(peer_name)
        if pair is None:
            return
        block = compute_shortcut_block(v.main.value, peer.main.value, 1, self.dim)
        if block is None:
            return
        base, mask = block
        self._install_shortcut(v, base, mask, pair[1], peer.main.value, link_id, hops=1)

    def _install_shortcut(
        self, node: Node, base: int, mask: int, next_hop: int, endpoint: int, link_id, hops: int
    ) -> bool:
        """Install or replace the shortcut for ``endpoint``; propagate if installed."""
        table: RoutingTable = node.table
        existing = table.shortcut_for(endpoint)
        if existing is not None:
            if existing.base == base and existing.mask_len == mask and existing.next_hop == next_hop:
                return False
            if existing.mask_len < mask:
                return False
            table.remove_where(lambda e: e is existing)
        entry = RoutingEntry(base, mask, next_hop, ORIGIN_SHORTCUT, endpoint=endpoint, link_id=link_id)
        if not shortcut_holds(node.main.value, entry, hops, self.dim):
            raise AssertionError(f"shortcut predicate failed at install: {entry.render(self.dim)}")
        table.insert(entry)
        self._trace(node.name, "install", detail=f"entry={entry.render(self.dim)} endpoint={self._bits(endpoint)}")
        next_hops = hops + 1
        if next_hops > 2 * self.dim:
            return True
        skip = {self.net.owner(next_hop), self.net.owner(endpoint)}
        for other in sorted(self.net.logical_peers(node.name)):
            if other in skip:
                continue
            self.metrics.control_messages += 1
            self._push(
                self.now + 1,
                CAT_CONTROL,
                lambda at=other, frm=node.name, ep=endpoint, h=next_hops, lid=link_id: self._handle_adv(
                    at, frm, ep, h, lid
                ),
            )
        return True

    def _handle_adv(self, at: str, frm: str, endpoint: int, hops: int, link_id) -> None:
        node = self.net.nodes.get(at)
        if node is None or node.table is None:
            return
        pair = self.net.logical_peers(at).get(frm)
        if pair is None:
            return
        if self.net.owner(endpoint) == at:
            return
        self._trace(at, "adv", detail=f"endpoint={self._bits(endpoint)} h={hops} via={frm}")
        block = compute_shortcut_block(node.main.value, endpoint, hops, self.dim)
        if block is None:
            return
        base, mask = block
        self._install_shortcut(node, base, mask, pair[1], endpoint, link_id, hops)

    def _on_link_down(self, a: str, b: str) -> None:
        if self.sc.mode != "proactive":
            return
        for side, peer in ((a, b), (b, a)):
            node = self.net.nodes.get(side)
            if node is None or node.table is None:
                continue
            peer_node = self.net.nodes.get(peer)
            peer_addrs = set(peer_node.address_values()) if peer_node is not None else set()

            def through_peer(e: RoutingEntry) -> bool:
                return e.next_hop in peer_addrs or self.net.owner(e.next_hop) is None

            for e in node.table.remove_where(through_peer):
                self._trace(side, "remove", detail=f"entry={e.render(self.dim)}")

    def _sweep_tree_edge(self, child_main: int) -> None:
        """Withdraw shortcuts whose distance arguments crossed a dead tree edge."""
        for name, node in self.net.nodes.items():
            if node.table is None:
                continue
            gone = node.table.remove_where(
                lambda e: e.origin in (ORIGIN_SHORTCUT, ORIGIN_RECOVERY)
                and entry_crosses_edge(e, child_main, self.dim)
            )
            for e in gone:
                self._trace(name, "remove", detail=f"entry={e.render(self.dim)} stale-edge={self._bits(child_main)}")

    def _sweep_origin_link(self, link_id: frozenset) -> None:
        """Withdraw shortcuts advertised over a now-dead off-tree link."""
        for name, node in self.net.nodes.items():
            if node.table is None:
                continue
            gone = node.table.remove_where(lambda e: e.link_id == link_id)
            for e in gone:
                self._trace(name, "remove", detail=f"entry={e.render(self.dim)} stale-link")

    def _attempt_secondaries(self, name: str) -> None:
        """Claim secondaries toward physically-reachable but non-adjacent joined neighbors."""
        node = self.net.nodes.get(name)
        if node is None:
            return
        for peer in self.net.phys_neighbors(name):
            peer_node = self.net.nodes.get(peer)
            if peer_node is None:
                continue
            claimed = membership.acquire_secondary(self.net, name, peer)
            if claimed is not None:
                who, addr = claimed
                self._trace(who, "secondary", detail=f"addr={addr} link={name}-{peer}", addr=addr.value)

    # -- scenario events --------------------------------------------------

    def _ev_pin(self, name: str, bits: str) -> None:
        self.known.add(name)
        self.pins[name] = int(bits, 2)
        self._trace(name, "pin", detail=f"v={bits}")
        if name in self.net.nodes:
            self._register_node(self.net.nodes[name])

    def _ev_join(self, name: str, x: float, y: float) -> None:
        if name in self.net.nodes:
            raise ScenarioRuntimeError(f"t={self.now}: {name!r} is already joined")
        self.known.add(name)
        self.net.place(name, x, y)
        self._attempt_join(name)

    def _attempt_join(self, name: str) -> None:
        if not self.net.ever_joined:
            node = membership.make_root(self.net, name)
            self.detached.discard(name)
            if self.sc.mode == "proactive":
                node.table = init_tree_entries(node)
            self._trace(name, "join", detail=f"block={node.block} root")
        else:
            offers = membership.collect_offers(self.net, name)
            if not offers:
                self.detached.add(name)
                self._trace(name, "join-fail", detail="no offers")
                self._retopo()
                return
            offer = membership.best_offer(offers)
            node, moved = membership.apply_join(self.net, name, offer)
            self.detached.discard(name)
            if self.sc.mode == "proactive":
                node.table = init_tree_entries(node)
            self._trace(
                name,
                "join",
                detail=f"block={node.block} parent={offer.offerer_name}"
                + (" from-free-list" if offer.from_free_list else ""),
            )
            if moved:
                self._trace(offer.offerer_name, "store-move", detail=f"entries={moved} to={name}")
        self._attempt_secondaries(name)
        self._retopo()
        self._register_node(self.net.nodes[name])

    def _ev_leave(self, name: str) -> None:
        self._require_known(name)
        if name not in self.net.nodes:
            self.detached.discard(name)
            self.known.discard(name)
            self.net.remove(name)
            self._trace(name, "leave", detail="was detached")
            return
        orphans = self._pre_departure(name)
        report = membership.leave_node(self.net, name)
        self._trace(
            name,
            "leave",
            detail=f"reclaimed-by={report.parent_name or '-'} blocks={len(report.reclaimed)}",
            addr=None,
        )
        self._retopo()
        for orphan in orphans:
            self._start_recovery(orphan)

    def _ev_move(self, name: str, x: float, y: float) -> None:
        self._require_known(name)
        node = self.net.nodes.get(name)
        if node is not None:
            orphans = self._pre_departure(name)
            membership.leave_node(self.net, name, keep_position=True)
            self._trace(name, "move", detail=f"x={x} y={y}", addr=node.main.value)
            self.net.place(name, x, y)
            self._retopo()
            for orphan in orphans:
                self._start_recovery(orphan)
        else:
            self._trace(name, "move", detail=f"x={x} y={y}")
            self.net.place(name, x, y)
        self._attempt_join(name)

    def _pre_departure(self, name: str) -> list[str]:
        """Sweeps and orphan list for a node about to drop off the network."""
        node = self.net.nodes[name]
        orphans = []
        if self.sc.mode == "proactive":
            if node.parent is not None:
                self._sweep_tree_edge(node.main.value)
            for peer in sorted(self.net.logical_peers(name)):
                tree = self._is_tree_pair(name, peer)
                if tree is None:
                    self._sweep_origin_link(frozenset((name, peer)))
                elif tree[0] == name:
                    self._sweep_tree_edge(self.net.nodes[peer].main.value)
        for base, _mask in node.children:
            child_name = self.net.owner(base.value)
            if child_name is not None and child_name != name:
                orphans.append(child_name)
        return orphans if self.sc.mode == "proactive" else []

    def _ev_cut(self, a: str, b: str) -> None:
        self._require_known(a)
        self._require_known(b)
        pair = frozenset((a, b))
        tree = None
        if b in self.net.logical_peers(a):
            tree = self._is_tree_pair(a, b)
        was_logical = b in self.net.logical_peers(a)
        self.net.severed.add(pair)
        self._trace(a, "cut", detail=f"peer={b}")
        self._retopo()
        if self.sc.mode == "proactive" and was_logical:
            if tree is not None:
                parent_name, child_name = tree
                self._sweep_tree_edge(self.net.nodes[child_name].main.value)
                self._start_recovery(child_name)
            else:
                self._sweep_origin_link(pair)

    def _ev_link(self, a: str, b: str) -> None:
        self._require_known(a)
        self._require_known(b)
        pair = frozenset((a, b))
        self.net.declared.add(pair)
        self.net.severed.discard(pair)
        self._trace(a, "link", detail=f"peer={b}")
        if a in self.net.nodes and b in self.net.nodes:
            claimed = membership.acquire_secondary(self.net, a, b)
            if claimed is not None:
                who, addr = claimed
                self._trace(who, "secondary", detail=f"addr={addr} link={a}-{b}", addr=addr.value)
        self._retopo()

    def _ev_send(self, src: str, dst: str, count: int) -> None:
        self._require_known(src)
        self._require_known(dst)
        src_node = self.net.nodes.get(src)
        dst_node = self.net.nodes.get(dst)
        for _ in range(count):
            self.metrics.sent += 1
            mid = self._next_msg
            self._next_msg += 1
            if src_node is None or dst_node is None:
                self.metrics.no_route += 1
                self._trace(src, "no-route", msg=mid, detail=f"dest={dst} unjoined")
                continue
            msg = Message(mid, "data", src, dst_node.main.value, self._ttl(), {}, app=True)
            self._trace(src, "send", msg=mid, detail=f"dest={self._bits(msg.dest)}")
            self._route_step(msg, src, None)

    def _ev_resolve(self, src: str, dst: str) -> None:
        self._require_known(src)
        self._require_known(dst)
        self.metrics.resolutions += 1
        origin = self.net.nodes.get(src)
        mid = self._next_msg
        self._next_msg += 1
        if origin is None:
            self.metrics.resolution_failures += 1
            self.resolutions.append((self.now, src, dst, None, "fail"))
            self._trace(src, "resolve-fail", msg=mid, detail="origin unjoined")
            return
        cached = rendezvous.cache_get(origin, dst, self.now)
        if cached is not None:
            self.metrics.resolved += 1
            self.resolutions.append((self.now, src, dst, cached, "cache"))
            self._trace(src, "resolve-hit", msg=mid, detail=f"uid={dst} e={self._bits(cached)}")
            return
        v = self._hash_for(dst)
        self._trace(src, "resolve", msg=mid, detail=f"uid={dst} v={self._bits(v)}")
        if manages(origin, v):
            e = rendezvous.store_get(origin, v, dst)
            if e is not None:
                rendezvous.cache_put(origin, dst, e, self.now + self.sc.cache_lifetime)
                self.metrics.resolved += 1
                self.resolutions.append((self.now, src, dst, e, "local"))
                self._trace(src, "resolved", msg=mid, detail=f"uid={dst} e={self._bits(e)}")
            else:
                self.metrics.resolution_not_found += 1
                self.resolutions.append((self.now, src, dst, None, "notfound"))
                self._trace(src, "not-found", msg=mid, detail=f"uid={dst}")
            return
        msg = Message(
            mid,
            "resolve",
            src,
            v,
            self._ttl(),
            {"uid": dst, "origin": src, "origin_e": origin.main.value},
        )
        self._route_step(msg, src, None)

    # -- rendezvous -------------------------------------------------------

    def _register_node(self, node: Node) -> None:
        self.metrics.registrations += 1
        v = self._hash_for(node.name)
        self._trace(node.name, "register", detail=f"v={self._bits(v)} e={node.main}")
        if manages(node, v):
            rendezvous.store_put(node, v, node.name, node.main.value)
            self._trace(node.name, "store", detail=f"uid={node.name} e={node.main}")
            return
        mid = self._next_msg
        self._next_msg += 1
        msg = Message(mid, "register", node.name, v, self._ttl(), {"uid": node.name, "e": node.main.value})
        self._route_step(msg, node.name, None)

    # -- message pump -----------------------------------------------------

    def _route_step(self, msg: Message, at: str, frm: Optional[str]) -> None:
        node = self.net.nodes.get(at)
        if node is None:
            self._drop(msg, at, "node-gone")
            return
        if self.sc.mode == "proactive":
            self._proactive_step(node, msg, frm)
        else:
            self._reactive_step(node, msg, frm)

    def _proactive_step(self, node: Node, msg: Message, frm: Optional[str]) -> None:
        if node.has_address(msg.dest):
            self._deliver(msg, node, frm)
            return
        if msg.kind in ROUTED_RESOLUTION and manages(node, msg.dest):
            self._deliver(msg, node, frm)
            return
        if node.table is not None:
            peers = self.net.logical_peers(node.name)
            # first match wins, except that a packet is never sent straight
            # back out the link it arrived on (competing shortcuts for one
            # block would otherwise ping-pong between their two holders)
            for entry in node.table:
                if not entry.matches(msg.dest, self.dim):
                    continue
                target = self.net.owner(entry.next_hop)
                if target is None or target not in peers:
                    continue
                if target == frm:
                    continue
                self._transmit(msg, node, target)
                return
        self._no_route(msg, node)

    def _reactive_step(self, node: Node, msg: Message, frm: Optional[str]) -> None:
        if node.has_address(msg.dest):
            self._deliver(msg, node, frm)
            return
        resolution = msg.kind in ROUTED_RESOLUTION
        if resolution and manages(node, msg.dest):
            self._deliver(msg, node, frm)
            return
        st: Optional[Exploration] = node.expl.get(msg.id)
        parent_name = self._parent_name(node)
        if st is None:
            st = Exploration(dfs_parent=frm)
            node.expl[msg.id] = st
            self._msg_visited.setdefault(msg.id, set()).add(node.name)
            returned = False
        elif frm is not None and frm in st.probed:
            returned = True
        elif frm is not None and frm != st.dfs_parent:
            # A copy arriving over a cycle: this node is already exploring
            # or exhausted, so hand it straight back.
            self._backtrack(msg, node, frm)
            return
        else:
            returned = False
        if (
            returned
            and not resolution
            and frm != parent_name
            and frm in self.net.nodes
        ):
            nbr_main = self.net.nodes[frm].main.value
            mark_blocked(node, nbr_main, msg.dest, self.now + self.sc.mark_lifetime)
            if self.record_trace:
                self._trace(node.name, "mark", msg=msg.id, detail=f"neighbor={self._bits(nbr_main)} dest={self._bits(msg.dest)}")
        views = self._neighbor_views(node.name)
        if resolution:
            cand = pick_resolution_candidate(views, msg.dest, st, parent_name, self.dim)
        else:
            blocked = blocked_neighbors(node, msg.dest, self.now)
            cand = pick_data_candidate(views, msg.dest, st, parent_name, blocked)
        if cand is not None:
            st.record_send(cand.name)
            self._transmit(msg, node, cand.name)
            return
        if st.dfs_parent is None:
            self._no_route(msg, node)
        else:
            self._backtrack(msg, node, st.dfs_parent)

    def _transmit(self, msg: Message, node: Node, target: str) -> None:
        if msg.ttl <= 0:
            self._drop(msg, node.name, "ttl")
            return
        msg.ttl -= 1
        msg.hops += 1
        msg.path.append(node.main.value)
        if self.record_trace:
            self._trace(node.name, "forward", msg=msg.id, detail=f"to={target} dest={self._bits(msg.dest)}")
        if not msg.app:
            self.metrics.control_messages += 1
        cat = CAT_APP if msg.app else CAT_CONTROL
        self._push(self.now + 1, cat, lambda m=msg, t=target, f=node.name: self._route_step(m, t, f))

    def _backtrack(self, msg: Message, node: Node, to: str) -> None:
        if msg.ttl <= 0:
            self._drop(msg, node.name, "ttl")
            return
        self.backtracks += 1
        msg.ttl -= 1
        msg.hops += 1
        popped = msg.path.pop() if msg.path else None
        if self.record_trace:
            detail = f"to={to} popped={self._bits(popped) if popped is not None else '-'}"
            self._trace(node.name, "backtrack", msg=msg.id, detail=detail)
        if not msg.app:
            self.metrics.control_messages += 1
        cat = CAT_APP if msg.app else CAT_CONTROL
        self._push(self.now + 1, cat, lambda m=msg, t=to, f=node.name: self._route_step(m, t, f))

    def _cleanup_msg(self, msg: Message) -> None:
        for name in self._msg_visited.pop(msg.id, ()):  # reactive exploration state
            n = self.net.nodes.get(name)
            if n is not None:
                n.expl.pop(msg.id, None)

    def _deliver(self, msg: Message, node: Node, frm: Optional[str]) -> None:
        frm_bits = "-"
        if self.record_trace and frm is not None:
            frm_node = self.net.nodes.get(frm)
            if frm_node is not None:
                frm_bits = self._bits(frm_node.main.value)
        if msg.kind == "data":
            if self.record_trace:
                self._trace(node.name, "deliver", msg=msg.id, detail=f"from={frm_bits}")
            if msg.app:
                self.metrics.delivered += 1
                self._hops_total += msg.hops
                self._account_stretch(msg, node.name)
        elif msg.kind == "register":
            rendezvous.store_put(node, msg.dest, msg.payload["uid"], msg.payload["e"])
            self._trace(node.name, "store", msg=msg.id, detail=f"uid={msg.payload['uid']} e={self._bits(msg.payload['e'])}")
        elif msg.kind == "resolve":
            uid = msg.payload["uid"]
            e = rendezvous.store_get(node, msg.dest, uid)
            found = e is not None
            self._trace(
                node.name,
                "lookup",
                msg=msg.id,
                detail=f"uid={uid} " + (f"e={self._bits(e)}" if found else "not-found"),
            )
            mid = self._next_msg
            self._next_msg += 1
            reply = Message(
                mid,
                "reply",
                node.name,
                msg.payload["origin_e"],
                self._ttl(),
                {"uid": uid, "e": e, "origin": msg.payload["origin"], "found": found},
            )
            self._route_step(reply, node.name, None)
        elif msg.kind == "reply":
            uid = msg.payload["uid"]
            origin = msg.payload["origin"]
            if msg.payload["found"]:
                e = msg.payload["e"]
                rendezvous.cache_put(node, uid, e, self.now + self.sc.cache_lifetime)
                self.metrics.resolved += 1
                self.resolutions.append((self.now, origin, uid, e, "remote"))
                self._trace(node.name, "resolved", msg=msg.id, detail=f"uid={uid} e={self._bits(e)}")
            else:
                self.metrics.resolution_not_found += 1
                self.resolutions.append((self.now, origin, uid, None, "notfound"))
                self._trace(node.name, "not-found", msg=msg.id, detail=f"uid={uid}")
        self._cleanup_msg(msg)

    def _account_stretch(self, msg: Message, dest_name: str) -> None:
        bfs = self._bfs_hops(msg.src, dest_name)
        if bfs is not None and bfs > 0:
            if msg.hops < bfs:
                raise AssertionError(f"msg {msg.id}: {msg.hops} hops beat physical BFS {bfs}")
            self._stretch_total += msg.hops / bfs
            self._stretch_count += 1

    def _drop(self, msg: Message, at: str, reason: str) -> None:
        self._trace(at, "drop", msg=msg.id, detail=f"reason={reason} dest={self._bits(msg.dest)}")
        self._fail_account(msg, dropped=True)
        self._cleanup_msg(msg)

    def _no_route(self, msg: Message, node: Node, detail: str = "") -> None:
        extra = f" {detail}" if detail else ""
        self._trace(node.name, "no-route", msg=msg.id, detail=f"dest={self._bits(msg.dest)}{extra}")
        self._fail_account(msg, dropped=False)
        self._cleanup_msg(msg)

    def _fail_account(self, msg: Message, dropped: bool) -> None:
        if msg.app:
            if dropped:
                self.metrics.dropped += 1
            else:
                self.metrics.no_route += 1
        elif msg.kind == "register":
            self.metrics.registration_failures += 1
        elif msg.kind in ("resolve", "reply"):
            self.metrics.resolution_failures += 1
            self.resolutions.append(
                (self.now, msg.payload.get("origin", msg.src), msg.payload.get("uid", "?"), None, "fail")
            )

    # -- parent-loss recovery ---------------------------------------------

    def _start_recovery(self, v_name: str) -> None:
        if self.sc.mode != "proactive":
            return
        node = self.net.nodes.get(v_name)
        if node is None or node.recovering or node.main.value == 0:
            return
        node.recovering = True
        rid = self._next_recover
        self._next_recover += 1
        state = {
            "v": v_name,
            "v_main": node.main.value,
            "base": node.initial_block.base.value,
            "mask": node.initial_mask,
            "outstanding": 0,
            "done": False,
            "seen": {v_name},
        }
        self._recover[rid] = state
        peers = sorted(self.net.logical_peers(v_name))
        self._trace(v_name, "recover", detail=f"lost-parent fanout={len(peers)}")
        if not peers:
            self._recover_failed(rid)
            return
        for p in peers:
            state["outstanding"] += 1
            self.metrics.control_messages += 1
            self._push(
                self.now + 1,
                CAT_CONTROL,
                lambda at=p, frm=v_name, r=rid: self._reconnect_step(at, frm, r, [v_name]),
            )

    def _recover_failed(self, rid: int) -> None:
        state = self._recover[rid]
        node = self.net.nodes.get(state["v"])
        if node is not None:
            node.recovering = False
            node.detached = True
        self._trace(state["v"], "detach", detail="no reconnect target")

    def _recover_eligible(self, node: Node, state: dict) -> bool:
        base, mask = state["base"], state["mask"]
        low = self.dim - mask
        inside = (node.main.value >> low) == (base >> low)
        if inside:
            return False
        if node.parent is None:
            return node.main.value == 0
        parent_owner = self.net.owner(node.parent.value)
        return parent_owner is not None and parent_owner in self.net.logical_peers(node.name)

    def _reconnect_step(self, at: str, frm: str, rid: int, path: list[str]) -> None:
        state = self._recover[rid]
        state["outstanding"] -= 1
        if state["done"]:
            return
        node = self.net.nodes.get(at)
        try:
            if node is None or at in state["seen"]:
                return
            if frm not in self.net.logical_peers(at):
                return  # carrier link died while the copy was in flight
            state["seen"].add(at)
            if self._recover_eligible(node, state):
                state["done"] = True
                self._accept_reconnect(node, frm, rid, path + [at])
                return
            if len(path) > len(self.net.nodes):
                return
            for p in sorted(self.net.logical_peers(at)):
                if p in path or p == frm:
                    continue
                state["outstanding"] += 1
                self.metrics.control_messages += 1
                self._push(
                    self.now + 1,
                    CAT_CONTROL,
                    lambda a=p, f=at, r=rid, pp=path + [at]: self._reconnect_step(a, f, r, pp),
                )
        finally:
            if not state["done"] and state["outstanding"] == 0:
                self._recover_failed(rid)

    def _accept_reconnect(self, w: Node, frm: str, rid: int, full_path: list[str]) -> None:
        state = self._recover[rid]
        self._trace(w.name, "recover-accept", detail=f"for={state['v']} path={'>'.join(full_path)}")
        pair = self.net.logical_peers(w.name).get(frm)
        if pair is None:
            self._recover_failed(rid)
            return
        if w.table is not None:
            base, mask = state["base"], state["mask"]
            if not w.table.has_exact(base, mask, pair[1]):
                entry = RoutingEntry(base, mask, pair[1], ORIGIN_RECOVERY, endpoint=state["v_main"])
                w.table.insert(entry)
                self._trace(w.name, "install", detail=f"entry={entry.render(self.dim)} recovery")
        self.metrics.control_messages += 1
        self._push(
            self.now + 1,
            CAT_CONTROL,
            lambda p=full_path, r=rid: self._reply_step(p, len(p) - 2, r),
        )
        v_main = state["v_main"]
        target = next(
            (a.value for a in tree_ancestors(Address(v_main, self.dim)) if self.net.owner(a.value) is not None),
            None,
        )
        if target is not None and target != w.main.value:
            entry = w.table.first_match(target) if w.table is not None else None
            nxt = self.net.owner(entry.next_hop) if entry is not None else None
            if nxt is not None:
                self.metrics.control_messages += 1
                self._push(
                    self.now + 1,
                    CAT_CONTROL,
                    lambda a=nxt, f=w.name, r=rid, t=target, ttl=4 * self.dim: self._restore_step(a, f, r, t, ttl),
                )

    def _reply_step(self, full_path: list[str], idx: int, rid: int) -> None:
        state = self._recover[rid]
        name = full_path[idx]
        frm = full_path[idx + 1]
        node = self.net.nodes.get(name)
        pair = self.net.logical_peers(name).get(frm) if node is not None else None
        if node is None or pair is None:
            self._recover_failed(rid)
            return
        toward_w = pair[1]
        base, mask = state["base"], state["mask"]
        low = self.dim - mask
        inside = (node.main.value >> low) == (base >> low)
        if idx == 0:
            if node.table is not None:
                node.table.remove_where(lambda e: e.mask_len == 0)
                entry = RoutingEntry(0, 0, toward_w, ORIGIN_PARENT)
                node.table.insert(entry)
                self._trace(name, "recover-default", detail=f"entry={entry.render(self.dim)}")
            node.recovering = False
            node.detached = False
            return
        parent_owner = self._parent_name(node)
        parent_linked = parent_owner is not None and parent_owner in self.net.logical_peers(name)
        if (inside or not parent_linked) and node.table is not None:
            node.table.remove_where(lambda e: e.mask_len == 0)
            entry = RoutingEntry(0, 0, toward_w, ORIGIN_PARENT)
            node.table.insert(entry)
            self._trace(name, "recover-default", detail=f"entry={entry.render(self.dim)}")
            if inside and parent_linked:
                ppair = self.net.logical_peers(name)[parent_owner]
                if not node.table.has_exact(base, mask, ppair[1]):
                    up = RoutingEntry(base, mask, ppair[1], ORIGIN_RECOVERY, endpoint=state["v_main"])
                    node.table.insert(up)
                    self._trace(name, "install", detail=f"entry={up.render(self.dim)} recovery")
        self.metrics.control_messages += 1
        self._push(self.now + 1, CAT_CONTROL, lambda p=full_path, i=idx - 1, r=rid: self._reply_step(p, i, r))

    def _restore_step(self, at: str, frm: str, rid: int, target: int, ttl: int) -> None:
        state = self._recover[rid]
        node = self.net.nodes.get(at)
        if node is None or node.table is None:
            return
        pair = self.net.logical_peers(at).get(frm)
        if pair is None:
            return
        base, mask = state["base"], state["mask"]
        if not node.table.has_exact(base, mask, pair[1]):
            entry = RoutingEntry(base, mask, pair[1], ORIGIN_RECOVERY, endpoint=state["v_main"])
            node.table.insert(entry)
            self._trace(at, "install", detail=f"entry={entry.render(self.dim)} recovery")
        if node.main.value == target or ttl <= 0:
            self._trace(at, "restore", detail=f"for={state['v']} complete")
            return
        entry = node.table.first_match(target)
        nxt = self.net.owner(entry.next_hop) if entry is not None else None
        if nxt is None:
            self._trace(at, "restore", detail=f"for={state['v']} stuck")
            return
        self.metrics.control_messages += 1
        self._push(
            self.now + 1,
            CAT_CONTROL,
            lambda a=nxt, f=at, r=rid, t=target, tl=ttl - 1: self._restore_step(a, f, r, t, tl),
        )

    # -- oracles, audits, finalization -------------------------------------

    def _bfs_hops(self, src: str, dst: str) -> Optional[int]:
        if src == dst:
            return 0
        key = (self._topo_ver, src)
        dist = self._bfs_cache.get(key)
        if dist is None:
            dist = {src: 0}
            q = deque([src])
            while q:
                cur = q.popleft()
                for peer in self.net.phys_neighbors(cur):
                    if peer not in dist:
                        dist[peer] = dist[cur] + 1
                        q.append(peer)
            self._bfs_cache[key] = dist
        return dist.get(dst)

    def _audit(self) -> None:
        self.audits += 1
        membership.check_partition(self.net)
        for name, peers in self.net.logical.items():
            for peer in peers:
                if not self.net.phys_connected(name, peer):
                    raise AssertionError(f"logical link {name}-{peer} without physical connectivity")
        space = 1 << self.dim
        nodes = list(self.net.nodes.values())
        if not nodes:
            return
        values = (
            range(space)
            if space * len(nodes) <= 2048
            else range(0, space, max(1, space // 32))
        )
        for value in values:
            owners = [n.name for n in nodes if manages(n, value)]
            orphaned = any(b.contains_value(value) for b in self.net.orphaned)
            expect = 0 if orphaned else 1
            if len(owners) != expect:
                raise AssertionError(
                    f"address {self._bits(value)} has managers {owners}, expected {expect}"
                )

    def _finalize(self) -> None:
        m = self.metrics
        m.delivery_ratio = (m.delivered / m.sent) if m.sent else 1.0
        m.mean_hops = (self._hops_total / m.delivered) if m.delivered else 0.0
        m.mean_stretch = (self._stretch_total / self._stretch_count) if self._stretch_count else 0.0
        sizes = [len(n.table) for n in self.net.nodes.values() if n.table is not None]
        m.mean_table_size = (sum(sizes) / len(sizes)) if sizes else 0.0
        m.max_table_size = max(sizes) if sizes else 0
        m.detached_nodes = len(self.detached) + sum(1 for n in self.net.nodes.values() if n.detached)


def run_simulation(sc: Scenario, record_trace: bool = True) -> SimResult:
    """Run a scenario to completion and return (trace, metrics, simulator)."""
    return Simulator(sc, record_trace=record_trace).run()
