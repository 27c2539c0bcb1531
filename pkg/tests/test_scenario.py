import pytest

from cubenet.scenario import (
    FIG3_JOIN_ORDER,
    FIG3_POSITIONS,
    ScenarioParseError,
    build_fixture_fig3,
    parse_scenario,
)
from cubenet.simulator import Simulator


class TestParse:
    def test_minimal(self):
        sc = parse_scenario("dim 4\nmode proactive\nat 0 join a 0 0\n")
        assert sc.dim == 4 and sc.mode == "proactive"
        assert len(sc.events) == 1 and sc.events[0].kind == "join"

    def test_comments_and_blanks(self):
        sc = parse_scenario("# header\n\ndim 5  # trailing\nat 3 send a b 2\n")
        assert sc.dim == 5
        assert sc.events[0].args == ("a", "b", 2)

    def test_malformed_tick(self):
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario("at x join a 0 0\n")
        assert exc.value.line_no == 1

    def test_bad_arity(self):
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario("dim 4\nat 1 join a\n")
        assert exc.value.line_no == 2

    def test_unknown_directive(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("speed 9\n")

    def test_unknown_event(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("at 1 teleport a\n")

    def test_bad_mode(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("mode lazy\n")

    def test_out_of_order_events_sorted_stably(self):
        sc = parse_scenario(
            "at 9 send a b\nat 1 join a 0 0\nat 9 send b a\nat 1 join b 0.5 0\n"
        )
        assert [e.tick for e in sc.events] == [1, 1, 9, 9]
        assert sc.events[0].args[0] == "a"
        assert sc.events[2].args == ("a", "b", 1)

    def test_pin_hash_length_checked(self):
        with pytest.raises(ScenarioParseError):
            parse_scenario("dim 4\nat 0 pin_hash a 011\n")
        sc = parse_scenario("dim 4\nat 0 pin_hash a 0110\n")
        assert sc.events[0].args == ("a", "0110")

    def test_timers(self):
        sc = parse_scenario("mark_lifetime 77\ncache_lifetime 88\nseed 5\nrange 2.5\n")
        assert (sc.mark_lifetime, sc.cache_lifetime, sc.seed, sc.radio_range) == (77, 88, 5, 2.5)


class TestFixture:
    def test_node_census(self):
        res = Simulator(build_fixture_fig3()).run()
        assert sorted(res.sim.net.nodes) == sorted(FIG3_JOIN_ORDER)
        assert len(res.sim.net.nodes) == 8

    def test_every_node_gets_its_namesake_address(self):
        res = Simulator(build_fixture_fig3()).run()
        for name, node in res.sim.net.nodes.items():
            assert str(node.main) == name

    def test_secondary_address(self):
        res = Simulator(build_fixture_fig3()).run()
        assert [str(s) for s in res.sim.net.nodes["0110"].secondaries] == ["0111"]

    def test_physical_only_link(self):
        res = Simulator(build_fixture_fig3()).run()
        net = res.sim.net
        assert net.phys_connected("0100", "1010")
        assert "1010" not in net.logical_peers("0100")

    def test_off_tree_logical_link(self):
        res = Simulator(build_fixture_fig3()).run()
        net = res.sim.net
        assert net.logical_peers("0110")["1111"] == (0b0111, 0b1111)

    def test_masks(self):
        res = Simulator(build_fixture_fig3()).run()
        masks = {name: node.block.mask_len for name, node in res.sim.net.nodes.items()}
        assert masks == {
            "0000": 2,
            "1000": 3,
            "0100": 3,
            "1100": 3,
            "0110": 3,
            "1010": 3,
            "1110": 4,
            "1111": 4,
        }

    def test_positions_realize_expected_radio_graph(self):
        import math

        expected = {
            frozenset(p)
            for p in [
                ("0000", "0100"),
                ("0000", "1000"),
                ("0100", "0110"),
                ("0100", "1010"),
                ("1000", "1010"),
                ("1000", "1100"),
                ("1100", "1110"),
                ("1110", "1111"),
                ("1111", "0110"),
            ]
        }
        names = list(FIG3_POSITIONS)
        actual = {
            frozenset((a, b))
            for i, a in enumerate(names)
            for b in names[i + 1 :]
            if math.dist(FIG3_POSITIONS[a], FIG3_POSITIONS[b]) <= 1.0
        }
        assert actual == expected

    def test_unknown_demo_rejected(self):
        with pytest.raises(ValueError):
            build_fixture_fig3(demo="fly-to-the-moon")
