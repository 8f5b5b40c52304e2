import pytest

from dqroute.errors import (
    DQRouteError,
    IncompletePriorityOrder,
    ParseError,
    UnresolvedReference,
)
from dqroute.fixtures import FIXTURES
from dqroute.scenario import (
    load_scenario,
    parse_scenario,
    scenario_hash,
    serialize_scenario,
)

MINIMAL = """\
network
  vertices o d
  origin o
  destination d
  edge od o d
"""


class TestParse:
    def test_minimal_scenario(self):
        sc = parse_scenario(MINIMAL)
        assert sc.origin == "o" and sc.destination == "d"
        assert sc.edges == [("od", "o", "d", 1, 1)]

    def test_comments_and_blank_lines(self):
        sc = parse_scenario("# header\n\n" + MINIMAL + "  # done\n")
        assert sc.edges == [("od", "o", "d", 1, 1)]

    def test_unknown_section(self):
        with pytest.raises(ParseError) as err:
            parse_scenario(MINIMAL + "nonsense\n")
        assert err.value.line == 6

    def test_unknown_directive(self):
        with pytest.raises(ParseError) as err:
            parse_scenario("network\n  frobnicate x\n")
        assert err.value.line == 2

    def test_unknown_parameter(self):
        with pytest.raises(ParseError):
            parse_scenario(MINIMAL + "params\n  warp 9\n")

    def test_edge_attributes(self):
        sc = parse_scenario(
            "network\n  vertices o d\n  origin o\n  destination d\n"
            "  edge od o d capacity=2 transit=3\n"
        )
        assert sc.edges == [("od", "o", "d", 2, 3)]

    def test_undeclared_vertex_located(self):
        text = "network\n  vertices o d\n  origin o\n  destination d\n  edge e o x\n"
        with pytest.raises(UnresolvedReference) as err:
            parse_scenario(text)
        assert err.value.line == 5

    def test_unknown_edge_in_priority(self):
        text = MINIMAL + "  priority d od nope\n"
        with pytest.raises(UnresolvedReference):
            parse_scenario(text)

    def test_path_for_unknown_agent(self):
        text = MINIMAL + "paths\n  agent ghost od\n"
        with pytest.raises(UnresolvedReference) as err:
            parse_scenario(text)
        assert err.value.line == 7

    def test_duplicate_agent_rejected(self):
        text = MINIMAL + "inflow\n  at 1 a\n  at 2 a\n"
        with pytest.raises(UnresolvedReference):
            parse_scenario(text)


class TestRoundTrip:
    @pytest.mark.parametrize("name", sorted(FIXTURES))
    def test_fixture_round_trip_is_idempotent(self, name):
        sc = parse_scenario(FIXTURES[name])
        once = serialize_scenario(sc)
        twice = serialize_scenario(parse_scenario(once))
        assert once == twice
        assert scenario_hash(sc) == scenario_hash(parse_scenario(once))


class TestLoad:
    def test_missing_priority_for_multi_in_vertex_located(self):
        text = (
            "network\n  vertices o d\n  origin o\n  destination d\n"
            "  edge a o d\n  edge b o d\n"
        )
        with pytest.raises(IncompletePriorityOrder) as err:
            load_scenario(parse_scenario(text))
        assert err.value.vertex == "d"

    def test_priority_omitting_an_incoming_edge_located(self):
        text = (
            "network\n  vertices o d\n  origin o\n  destination d\n"
            "  edge a o d\n  edge b o d\n  priority d a\n"
        )
        with pytest.raises(IncompletePriorityOrder) as err:
            load_scenario(parse_scenario(text))
        assert "line 7" in str(err.value)

    def test_explicit_paths_need_unit_network(self):
        text = (
            "network\n  vertices o d\n  origin o\n  destination d\n"
            "  edge od o d capacity=2\n"
            "inflow\n  at 1 a\n"
            "paths\n  agent a od\n"
        )
        with pytest.raises(DQRouteError):
            load_scenario(parse_scenario(text))

    def test_inflow_agents_get_chain_prefixes(self):
        loaded = load_scenario(parse_scenario(FIXTURES["fig1_vicious"]))
        p1 = loaded.agents["p1"]
        assert loaded.paths[p1][0] in loaded.extended.chain_edges
        assert loaded.paths[p1][1:] == ("ov", "vw1", "w1d")

    def test_config_time_conflicts_with_inflow(self):
        text = (
            "network\n  vertices o d\n  origin o\n  destination d\n  edge od o d\n"
            "inflow\n  at 1 a\n"
            "config\n  time 5\n  queue od b\n"
        )
        with pytest.raises(DQRouteError):
            load_scenario(parse_scenario(text))

    def test_config_and_inflow_merge(self):
        text = (
            "network\n  vertices o v d\n  origin o\n  destination d\n"
            "  edge ov o v\n  edge vd v d\n"
            "inflow\n  at 1 a\n"
            "config\n  queue vd b\n"
        )
        loaded = load_scenario(parse_scenario(text))
        names = {x.name for x in loaded.config.agents()}
        assert names == {"a", "b"}
        assert loaded.config.queue("vd")[0].name == "b"

    def test_fixtures_all_load(self):
        for name in FIXTURES:
            loaded = load_scenario(parse_scenario(FIXTURES[name]))
            assert loaded.config.agents() or loaded.schedule is not None
