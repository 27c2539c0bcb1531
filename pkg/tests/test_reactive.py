from cubenet.addressing import tree_distance_int
from cubenet.membership import Node
from cubenet.reactive import (
    Exploration,
    NeighborView,
    blocked_neighbors,
    clear_marks_for_neighbor,
    has_mark,
    mark_blocked,
    pick_data_candidate,
    prune_marks,
    resolution_metric,
)
from cubenet.scenario import ScenarioEvent, build_fixture_fig3
from cubenet.simulator import Simulator


def visits(trace, mid):
    """Node sequence a message touched, including backtrack hops."""
    out = []
    for ev in trace:
        if ev.msg != mid:
            continue
        if ev.kind in ("send", "forward", "backtrack") and (not out or out[-1] != ev.node):
            out.append(ev.node)
        elif ev.kind == "deliver":
            out.append(ev.node)
    return out


def app_msg_id(trace):
    sends = [ev.msg for ev in trace if ev.kind == "send"]
    return sends[-1]


class TestMarks:
    def test_expiry(self):
        n = Node(name="x", dim=4, main=None, block=None, initial_mask=0)
        mark_blocked(n, 0b1010, 0b0110, expires_at=50)
        mark_blocked(n, 0b1100, 0b0110, expires_at=150)
        gone = prune_marks(n, now=100)
        assert gone == [(0b1010, 0b0110)]
        assert not has_mark(n, 0b1010, 0b0110)
        assert has_mark(n, 0b1100, 0b0110)

    def test_blocked_set_skips_expired(self):
        n = Node(name="x", dim=4, main=None, block=None, initial_mask=0)
        mark_blocked(n, 0b1010, 0b0110, expires_at=50)
        assert blocked_neighbors(n, 0b0110, now=49) == {0b1010}
        assert blocked_neighbors(n, 0b0110, now=50) == set()

    def test_clear_for_neighbor(self):
        n = Node(name="x", dim=4, main=None, block=None, initial_mask=0)
        mark_blocked(n, 0b1010, 0b0110, 100)
        mark_blocked(n, 0b1010, 0b0111, 100)
        mark_blocked(n, 0b1100, 0b0110, 100)
        assert clear_marks_for_neighbor(n, 0b1010) == 2
        assert blocked_neighbors(n, 0b0110, 0) == {0b1100}

    def test_empty_prune_is_noop(self):
        n = Node(name="x", dim=4, main=None, block=None, initial_mask=0)
        assert prune_marks(n, 10) == []


class TestGreedyPick:
    def nbrs(self):
        return [
            NeighborView("a", 0b0000, (0b0000,)),
            NeighborView("b", 0b1100, (0b1100,)),
            NeighborView("c", 0b1010, (0b1010,)),
        ]

    def test_min_xor_wins(self):
        st = Exploration(dfs_parent=None)
        cand = pick_data_candidate(self.nbrs(), 0b0110, st, parent_name="a", blocked=set())
        assert cand.name == "c"  # xor 2 beats xor 3; parent excluded

    def test_blocked_neighbor_skipped(self):
        st = Exploration(dfs_parent=None)
        cand = pick_data_candidate(self.nbrs(), 0b0110, st, parent_name="a", blocked={0b1010})
        assert cand.name == "b"

    def test_secondaries_shorten_distance(self):
        nbrs = [NeighborView("s", 0b0110, (0b0110, 0b0111)), NeighborView("t", 0b1100, (0b1100,))]
        st = Exploration(dfs_parent=None)
        cand = pick_data_candidate(nbrs, 0b1111, st, parent_name=None, blocked=set())
        assert cand.name == "s"  # via its secondary 0111, one bit from 1111

    def test_direct_holder_beats_exclusions(self):
        nbrs = [NeighborView("p", 0b1110, (0b1110,)), NeighborView("q", 0b0100, (0b0100,))]
        st = Exploration(dfs_parent=None)
        cand = pick_data_candidate(nbrs, 0b1110, st, parent_name="p", blocked={0b1110})
        assert cand.name == "p"

    def test_phases_exhaust(self):
        st = Exploration(dfs_parent="w")
        nbrs = [NeighborView("w", 0b0001, (0b0001,))]
        assert pick_data_candidate(nbrs, 0b1111, st, parent_name="w", blocked=set()) is None


class TestResolutionMetric:
    def test_reference_comparison(self):
        # at 1110 choosing toward pinned space 0101: parent 1100 over child 1111
        assert resolution_metric(0b1100, 0b0101, 4)[0] == 2
        assert resolution_metric(0b1111, 0b0101, 4)[0] == 4

    def test_chain_member_scores_zero(self):
        assert resolution_metric(0b0100, 0b0101, 4)[0] == 0

    def test_longer_prefix_preferred_on_ties(self):
        root = resolution_metric(0b0000, 0b0101, 4)
        chain = resolution_metric(0b0100, 0b0101, 4)
        assert root[0] == chain[0] == 0
        assert chain < root  # deeper prefix sorts first

    def test_oracle_over_prefixes(self):
        for u in range(16):
            for z in range(16):
                best = min(
                    tree_distance_int(u, (z >> k) << k) for k in range(5)
                )
                assert resolution_metric(u, z, 4)[0] == best


class TestFixtureWalkthroughs:
    def test_simple_greedy_path(self):
        res = Simulator(build_fixture_fig3(demo="reactive-0100-1111")).run()
        mid = app_msg_id(res.trace)
        assert visits(res.trace, mid) == ["0100", "0110", "1111"]
        assert not [ev for ev in res.trace if ev.kind == "backtrack" and ev.msg == mid]

    def test_backtracking_path_and_mark(self):
        res = Simulator(build_fixture_fig3(demo="reactive-1000-0110")).run()
        mid = app_msg_id(res.trace)
        assert visits(res.trace, mid) == ["1000", "1010", "1000", "1100", "1110", "1111", "0110"]
        assert has_mark(res.sim.net.nodes["1000"], 0b1010, 0b0110)

    def test_resolution_climbs_to_manager(self):
        sc = build_fixture_fig3(mode="reactive")
        sc.events.append(ScenarioEvent(30, "resolve", ("1110", "0100")))
        sc.events = sc.sorted_events()
        res = Simulator(sc).run()
        request = [ev.node for ev in res.trace if ev.kind == "forward" and ev.tick >= 30 and ev.detail.endswith("dest=0101")]
        assert request == ["1110", "1100", "1000", "0000"]
        lookup = next(ev for ev in res.trace if ev.kind == "lookup")
        assert lookup.node == "0100"
        assert res.sim.resolutions[-1][3] == 0b0100

    def test_locally_managed_resolution_needs_no_traffic(self):
        sc = build_fixture_fig3(mode="reactive")
        # 0100 manages 0101 itself (pin maps name 0100 there)
        sc.events.append(ScenarioEvent(30, "resolve", ("0100", "0100")))
        sc.events = sc.sorted_events()
        res = Simulator(sc).run()
        tick30 = [ev for ev in res.trace if ev.tick >= 30 and ev.kind == "forward"]
        assert tick30 == []
        assert res.sim.resolutions[-1][4] == "local"


class TestUpdates:
    def test_relink_clears_mark(self):
        sc = build_fixture_fig3(demo="reactive-1000-0110")
        sc.events.append(ScenarioEvent(50, "cut", ("1000", "1010")))
        sc.events.append(ScenarioEvent(60, "link", ("1000", "1010")))
        sc.events = sc.sorted_events()
        res = Simulator(sc).run()
        assert not has_mark(res.sim.net.nodes["1000"], 0b1010, 0b0110)
        clears = [ev for ev in res.trace if ev.kind == "mark-clear" and ev.node == "1000"]
        assert clears

    def test_update_fanout_counts_degree_minus_one(self):
        sc = build_fixture_fig3(mode="reactive")
        res = Simulator(sc).run()
        # 0110's join creates the off-tree link to 1111; 1111 then tells its
        # one other neighbor (1110), and 0110 tells its parent (0100)
        updates = {ev.node: ev.detail for ev in res.trace if ev.kind == "update"}
        assert updates["1111"] == "gained=0110 fanout=1"
        assert updates["0110"] == "gained=1111 fanout=1"

    def test_mark_expires_by_timer(self):
        sc = build_fixture_fig3(demo="reactive-1000-0110")
        sc.mark_lifetime = 40
        sc.events.append(ScenarioEvent(90, "send", ("1000", "0110", 1)))
        sc.events = sc.sorted_events()
        res = Simulator(sc).run()
        # mark written around tick 32 expires by tick 72; second send retries 1010 first
        second = [ev.msg for ev in res.trace if ev.kind == "send"][-1]
        assert visits(res.trace, second)[:2] == ["1000", "1010"]


class TestCompleteCube:
    def test_small_cube_is_greedy_optimal(self):
        from cubenet.experiments import complete_hypercube_scenario

        res = Simulator(complete_hypercube_scenario(3), record_trace=False).run()
        m = res.metrics
        assert m.delivered == m.sent == 56
        want = sum((a ^ b).bit_count() for a in range(8) for b in range(8) if a != b)
        assert res.sim._hops_total == want
