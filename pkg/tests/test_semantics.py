import pytest

from dbnet.datatypes import Variable, int_value, string_value
from dbnet.errors import BindingError, ConfigError, DefinitionError
from dbnet.multiset import Multiset
from dbnet.persistence import DatabaseInstance, Fact, check_compliance
from dbnet.query import answers
from dbnet.semantics import (
    InstanceInterner,
    align_view_places,
    binding_from_json,
    binding_to_json,
    build_lts,
    enumerate_bindings,
    fire,
    induced_action_instance,
    inscription_binding,
    is_enabled,
    make_snapshot,
    snapshot_digest,
    state_key,
)


def emp(name):
    return Fact("Emp", (string_value(name),))


def resp(name, t):
    return Fact("Resp", (string_value(name), int_value(t)))


def ticket(t, d):
    return Fact("Ticket", (int_value(t), string_value(d)))


def by_name(net, tname):
    return net.transitions[tname]


def sigma_of(net, tname, **payloads):
    t = by_name(net, tname)
    vars_by_name = {v.name: v for v in t.variables()}
    out = {}
    for name, payload in payloads.items():
        var = vars_by_name[name]
        if var.type_name == "string":
            out[var] = string_value(payload)
        elif var.type_name == "int":
            out[var] = int_value(payload)
        else:
            raise AssertionError(payload)
    return out


class TestInscriptionBinding:
    def test_published_example(self):
        x, y = Variable("x", "int"), Variable("y", "int")
        omega = Multiset([(x, y), (x, y), (x, int_value(1))])
        theta = {x: int_value(1), y: int_value(2)}
        got = inscription_binding(omega, theta)
        assert got == Multiset(
            [(int_value(1), int_value(2)), (int_value(1), int_value(2)), (int_value(1), int_value(1))]
        )

    def test_empty(self):
        assert inscription_binding(Multiset(), {}) == Multiset()

    def test_single_string(self):
        x = Variable("x", "string")
        got = inscription_binding(Multiset([(x,)]), {x: string_value("a")})
        assert got == Multiset([(string_value("a"),)])

    def test_unbound_variable(self):
        x = Variable("x", "string")
        with pytest.raises(BindingError):
            inscription_binding(Multiset([(x,)]), {})


class TestAlignment:
    def test_initial_alignment(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        assert s0.marking.tokens("IdleEmps") == Multiset([(string_value("ann"),)])
        assert s0.marking.tokens("Tickets") == Multiset(
            [(int_value(1), string_value("bug"))]
        )

    def test_empty_instance(self, ticket_scenario):
        fragment = align_view_places(ticket_scenario.net, DatabaseInstance())
        assert all(not ms for ms in fragment.values())

    def test_after_release(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "drop")
        sigma = sigma_of(net, "drop", e="bob", t=1)
        s2, committed = fire(net, s0, t, sigma)
        assert committed
        assert s2.marking.tokens("IdleEmps") == Multiset(
            [(string_value("ann"),), (string_value("bob"),)]
        )

    def test_view_markings_equal_query_answers(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        for place in net.view_places():
            named = net.logic.queries[place.query_name]
            assert set(s0.marking.tokens(place.name).distinct()) == set(
                answers(named, s0.instance)
            )

    def test_make_snapshot_rejects_view_tokens(self, ticket_scenario):
        net = ticket_scenario.net
        with pytest.raises(DefinitionError, match="view place"):
            make_snapshot(
                net,
                ticket_scenario.initial.instance,
                {"IdleEmps": Multiset([(string_value("zz"),)])},
            )

    def test_make_snapshot_rejects_noncompliant_instance(self, ticket_scenario):
        net = ticket_scenario.net
        bad = DatabaseInstance(
            [emp("ann"), ticket(1, "a"), ticket(2, "b"), resp("ann", 1), resp("ann", 2)]
        )
        with pytest.raises(DefinitionError, match="one_ticket_per_employee"):
            make_snapshot(net, bad)


class TestEnablement:
    def test_idle_employee_enabled(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "open")
        sigma = sigma_of(net, "open", e="ann", d="bug", t=7)
        assert is_enabled(net, s0, t, sigma)

    def test_busy_employee_fails_token_matching(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "open")
        sigma = sigma_of(net, "open", e="bob", d="bug", t=7)
        assert not is_enabled(net, s0, t, sigma)

    def test_fresh_variable_clashing_with_active_domain(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "open")
        sigma = sigma_of(net, "open", e="ann", d="bug", t=1)  # 1 is in adom
        assert not is_enabled(net, s0, t, sigma)

    def test_binding_must_cover_all_variables(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "open")
        with pytest.raises(BindingError):
            is_enabled(net, s0, t, sigma_of(net, "open", e="ann"))

    def test_fresh_injectivity(self, catalog, ticket_scenario):
        # Two fresh variables bound to the same value are rejected.
        from dbnet.control import DbNet, Place, Transition
        from dbnet.datalogic import DataLogicLayer
        from dbnet.persistence import DatabaseSchema, PersistenceLayer, RelationSchema

        n1 = Variable("n1", "int", fresh=True)
        n2 = Variable("n2", "int", fresh=True)
        net = DbNet(
            catalog,
            PersistenceLayer(DatabaseSchema([RelationSchema("R", ("int",))]), []),
            DataLogicLayer(),
            [Place("p", "control", ("int", "int"))],
            [Transition("mk", outputs={"p": Multiset([(n1, n2)])})],
        )
        snap = make_snapshot(net, DatabaseInstance())
        t = net.transitions["mk"]
        assert not is_enabled(net, snap, t, {n1: int_value(5), n2: int_value(5)})
        assert is_enabled(net, snap, t, {n1: int_value(5), n2: int_value(6)})


class TestEnumerateBindings:
    def test_exactly_one_open_binding_initially(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        got = enumerate_bindings(net, s0, by_name(net, "open"), ticket_scenario.domains)
        assert len(got) == 1
        sigma = got[0]
        values = {v.name: val.payload for v, val in sigma.items()}
        assert values == {"e": "ann", "d": "bug", "t": 2}

    def test_domain_product(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        domains = {"string": (string_value("bug"), string_value("feat"))}
        got = enumerate_bindings(net, s0, by_name(net, "open"), domains)
        assert len(got) == 2
        descriptions = [
            {v.name: val for v, val in sigma.items()}["d"].payload for sigma in got
        ]
        assert descriptions == ["bug", "feat"]  # configured order

    def test_no_tokens_no_bindings(self, ticket_scenario):
        net = ticket_scenario.net
        snap = make_snapshot(net, DatabaseInstance([emp("zoe")]))  # no staff tokens
        assert enumerate_bindings(net, snap, by_name(net, "take"), ticket_scenario.domains) == []

    def test_missing_domain_is_config_error(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        with pytest.raises(ConfigError):
            enumerate_bindings(net, s0, by_name(net, "open"), {})

    def test_every_emitted_binding_is_enabled(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        for t in net.sorted_transitions():
            for sigma in enumerate_bindings(net, s0, t, ticket_scenario.domains):
                assert is_enabled(net, s0, t, sigma)

    def test_join_across_view_and_control(self, ticket_scenario):
        # close joins busy tokens with the Tickets view on t.
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        got = enumerate_bindings(net, s0, by_name(net, "close"), ticket_scenario.domains)
        assert len(got) == 1
        values = {v.name: val.payload for v, val in got[0].items()}
        assert values == {"e": "bob", "t": 1, "d": "bug"}


class TestInducedActionInstance:
    def test_release_binding(self, ticket_scenario):
        net = ticket_scenario.net
        t = by_name(net, "drop")
        sigma = sigma_of(net, "drop", e="bob", t=1)
        inst = induced_action_instance(net, t, sigma)
        assert inst.action.name == "release"
        assert inst.deleted_facts == {resp("bob", 1)}

    def test_literal_in_binding_tuple(self, catalog):
        from dbnet.control import ActionBinding, DbNet, Place, Transition
        from dbnet.datalogic import Action, DataLogicLayer, FactTemplate
        from dbnet.persistence import DatabaseSchema, PersistenceLayer, RelationSchema

        e = Variable("e", "string")
        p1 = Variable("p1", "string")
        p2 = Variable("p2", "int")
        action = Action(
            "mark", (p1, p2), frozenset({FactTemplate("R", (p1, p2))}), frozenset()
        )
        net = DbNet(
            catalog,
            PersistenceLayer(DatabaseSchema([RelationSchema("R", ("string", "int"))]), []),
            DataLogicLayer(actions=[action]),
            [Place("p", "control", ("string",))],
            [
                Transition(
                    "t",
                    inputs={"p": Multiset([(e,)])},
                    action=ActionBinding("mark", (e, int_value(7))),
                )
            ],
        )
        t = net.transitions["t"]
        inst = induced_action_instance(net, t, {e: string_value("x")})
        assert inst.added_facts == {Fact("R", (string_value("x"), int_value(7)))}

    def test_none_without_action(self, relay_scenario):
        net = relay_scenario.net
        assert induced_action_instance(net, net.transitions["step"], {}) is None


class TestFire:
    def test_close_commits_and_routes_normally(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "close")
        sigma = sigma_of(net, "close", e="bob", t=1, d="bug")
        s2, committed = fire(net, s0, t, sigma)
        assert committed
        assert Fact("Log", (int_value(1), string_value("bob"), string_value("bug"))) in s2.instance.facts
        assert s2.marking.tokens("busy").count((string_value("bob"), int_value(1))) == 0
        assert s2.marking.tokens("staff").count((string_value("bob"),)) == 2

    def test_take_rolls_back_on_busy_employee(self, ticket_scenario):
        net = ticket_scenario.net
        instance = DatabaseInstance(
            [emp("ann"), emp("bob"), ticket(1, "bug"), ticket(2, "feat"), resp("ann", 1)]
        )
        snap = make_snapshot(
            net, instance, {"staff": Multiset([(string_value("ann"),)])}
        )
        t = by_name(net, "take")
        sigma = sigma_of(net, "take", e="ann", t=2, d="feat")
        assert is_enabled(net, snap, t, sigma)
        s2, committed = fire(net, snap, t, sigma)
        assert not committed
        # Rollback: database unchanged, token routed along the rollback arc.
        assert s2.instance == instance
        assert s2.marking.tokens("staff") == Multiset([(string_value("ann"),)])
        assert not s2.marking.tokens("busy")

    def test_action_less_transition_commits(self, relay_scenario):
        net, s0 = relay_scenario.net, relay_scenario.initial
        s2, committed = fire(net, s0, net.transitions["step"], {})
        assert committed
        assert s2.instance == s0.instance
        assert not s2.marking.tokens("src")
        assert s2.marking.tokens("dst") == Multiset([()])

    def test_firing_disabled_binding_is_an_error(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "open")
        with pytest.raises(BindingError):
            fire(net, s0, t, sigma_of(net, "open", e="bob", d="bug", t=9))

    def test_frame_property(self, ticket_scenario):
        # Places not adjacent to the transition keep their marking.
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "drop")
        sigma = sigma_of(net, "drop", e="bob", t=1)
        s2, _ = fire(net, s0, t, sigma)
        adjacent = set(t.inputs) | set(t.outputs) | set(t.rollbacks)
        for place in net.control_places():
            if place.name not in adjacent:
                assert s2.marking.tokens(place.name) == s0.marking.tokens(place.name)


class TestStateIdentity:
    def test_view_places_excluded_from_identity(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        control = {
            name: s0.marking.tokens(name)
            for name in s0.marking.place_names()
            if net.places[name].kind == "control"
        }
        rebuilt = make_snapshot(net, s0.instance, control)
        assert state_key(net, rebuilt) == state_key(net, s0)
        assert snapshot_digest(net, rebuilt) == snapshot_digest(net, s0)

    def test_digest_differs_on_marking_change(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        t = by_name(net, "drop")
        s2, _ = fire(net, s0, t, sigma_of(net, "drop", e="bob", t=1))
        assert snapshot_digest(net, s2) != snapshot_digest(net, s0)


class TestBindingJson:
    def test_round_trip(self, ticket_scenario):
        net = ticket_scenario.net
        t = by_name(net, "open")
        sigma = sigma_of(net, "open", e="ann", d="bug", t=2)
        data = binding_to_json(sigma)
        assert binding_from_json(t, data) == sigma

    def test_unknown_variable_rejected(self, ticket_scenario):
        net = ticket_scenario.net
        with pytest.raises(BindingError):
            binding_from_json(by_name(net, "open"), {"zz": {"type": "int", "value": 1}})


class TestBuildLts:
    def test_relay_has_two_states_one_edge(self, relay_scenario):
        lts = build_lts(relay_scenario.net, relay_scenario.initial, domains={})
        assert lts.state_count == 2
        assert lts.edge_count == 1
        assert not lts.truncated

    def test_max_states_one_truncates(self, relay_scenario):
        lts = build_lts(relay_scenario.net, relay_scenario.initial, domains={}, max_states=1)
        assert lts.state_count == 1
        assert lts.truncated
        assert lts.truncation_reason == "state budget reached"

    def test_max_depth_zero_truncates(self, ticket_scenario):
        lts = build_lts(
            ticket_scenario.net,
            ticket_scenario.initial,
            domains=ticket_scenario.domains,
            max_depth=0,
        )
        assert lts.state_count == 1
        assert lts.truncated and lts.truncation_reason == "depth budget reached"

    def test_initial_successors_match_hand_enumeration(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        lts = build_lts(net, s0, domains=ticket_scenario.domains, max_depth=1)
        from_initial = [e for e in lts.edges if e.src == 0]
        seen = {
            (e.transition, tuple(sorted((v.name, str(val.payload)) for v, val in e.binding.items())), e.committed)
            for e in from_initial
        }
        assert seen == {
            ("close", (("d", "bug"), ("e", "bob"), ("t", "1")), True),
            ("drop", (("e", "bob"), ("t", "1")), True),
            ("open", (("d", "bug"), ("e", "ann"), ("t", "2")), True),
            ("take", (("d", "bug"), ("e", "ann"), ("t", "1")), True),
            ("take", (("d", "bug"), ("e", "bob"), ("t", "1")), True),
        }

    def test_goal_and_witness(self, relay_scenario):
        net = relay_scenario.net
        goal = lambda snap: len(snap.marking.tokens("dst")) >= 1
        lts = build_lts(net, relay_scenario.initial, domains={}, goal=goal)
        assert lts.goal_state is not None
        path = lts.witness_path()
        assert [name for name, _, _ in path] == ["step"]

    def test_deterministic_across_worker_counts(self, ticket_scenario):
        kwargs = dict(domains=ticket_scenario.domains, max_states=120)
        one = build_lts(ticket_scenario.net, ticket_scenario.initial, workers=1, **kwargs)
        four = build_lts(ticket_scenario.net, ticket_scenario.initial, workers=4, **kwargs)
        assert one.state_count == four.state_count
        assert one.edge_count == four.edge_count
        assert [
            (e.src, e.transition, e.committed, e.dst) for e in one.edges
        ] == [(e.src, e.transition, e.committed, e.dst) for e in four.edges]
        assert [snapshot_digest(ticket_scenario.net, s) for s in one.snapshots] == [
            snapshot_digest(ticket_scenario.net, s) for s in four.snapshots
        ]

    def test_explored_states_keep_invariants(self, ticket_scenario):
        net = ticket_scenario.net
        lts = build_lts(
            net, ticket_scenario.initial, domains=ticket_scenario.domains, max_states=150
        )
        for snap in lts.snapshots:
            assert check_compliance(net.persistence, snap.instance).ok
            for place in net.view_places():
                named = net.logic.queries[place.query_name]
                tokens = snap.marking.tokens(place.name)
                assert set(tokens.distinct()) == set(answers(named, snap.instance))
                assert all(n == 1 for _, n in tokens.items())

    def test_rollback_edges_appear(self, ticket_scenario):
        net = ticket_scenario.net
        lts = build_lts(
            net, ticket_scenario.initial, domains=ticket_scenario.domains, max_states=200
        )
        rolled_back = [e for e in lts.edges if not e.committed]
        assert rolled_back, "expected reachable rollback firings in the ticket scenario"
        for e in rolled_back:
            assert lts.snapshots[e.src].instance == lts.snapshots[e.dst].instance


class TestInterner:
    def test_identical_instances_share_object(self):
        intern = InstanceInterner()
        a = DatabaseInstance([emp("ann")])
        b = DatabaseInstance([emp("ann")])
        assert intern(a) is intern(b)


class TestGoldenExploration:
    """Frozen counts from the first run of the exhaustive explorer, with
    three states verified by hand against the firing rule."""

    def test_golden_counts(self, ticket_scenario):
        lts = build_lts(
            ticket_scenario.net,
            ticket_scenario.initial,
            domains=ticket_scenario.domains,
            max_states=120,
        )
        assert (lts.state_count, lts.edge_count, lts.truncated) == (120, 198, True)

    def test_three_states_checked_by_hand(self, ticket_scenario):
        net, s0 = ticket_scenario.net, ticket_scenario.initial
        ann, bob = string_value("ann"), string_value("bob")
        bug, one = string_value("bug"), int_value(1)

        # State 1: the initial snapshot.
        assert s0.instance.facts == {
            Fact("Emp", (ann,)), Fact("Emp", (bob,)),
            Fact("Ticket", (one, bug)), Fact("Resp", (bob, one)),
        }
        assert s0.marking.tokens("staff") == Multiset([(ann,), (bob,)])
        assert s0.marking.tokens("busy") == Multiset([(bob, one)])
        assert s0.marking.tokens("IdleEmps") == Multiset([(ann,)])
        assert s0.marking.tokens("Tickets") == Multiset([(one, bug)])

        # State 2: after close(bob, 1): ticket and assignment erased, one log
        # entry, the busy token turned into a staff token, both views drained
        # or refilled accordingly.
        t = net.transitions["close"]
        s_close, committed = fire(net, s0, t, sigma_of(net, "close", e="bob", t=1, d="bug"))
        assert committed
        assert s_close.instance.facts == {
            Fact("Emp", (ann,)), Fact("Emp", (bob,)),
            Fact("Log", (one, bob, bug)),
        }
        assert s_close.marking.tokens("staff") == Multiset([(ann,), (bob,), (bob,)])
        assert not s_close.marking.tokens("busy")
        assert s_close.marking.tokens("IdleEmps") == Multiset([(ann,), (bob,)])
        assert not s_close.marking.tokens("Tickets")

        # State 3: after drop(bob, 1): only the assignment is deleted, the
        # ticket survives and bob is idle again.
        t = net.transitions["drop"]
        s_drop, committed = fire(net, s0, t, sigma_of(net, "drop", e="bob", t=1))
        assert committed
        assert s_drop.instance.facts == {
            Fact("Emp", (ann,)), Fact("Emp", (bob,)), Fact("Ticket", (one, bug)),
        }
        assert s_drop.marking.tokens("staff") == Multiset([(ann,), (bob,), (bob,)])
        assert not s_drop.marking.tokens("busy")
        assert s_drop.marking.tokens("IdleEmps") == Multiset([(ann,), (bob,)])
        assert s_drop.marking.tokens("Tickets") == Multiset([(one, bug)])


def test_stop_at_goal_halts_early(ticket_scenario):
    net = ticket_scenario.net
    goal = lambda snap: any(f.relation == "Log" for f in snap.instance.facts)
    full = build_lts(net, ticket_scenario.initial, domains=ticket_scenario.domains, max_states=300, goal=goal)
    early = build_lts(
        net, ticket_scenario.initial, domains=ticket_scenario.domains,
        max_states=300, goal=goal, stop_at_goal=True,
    )
    assert early.goal_state is not None
    assert early.state_count < full.state_count
    assert [n for n, _, _ in early.witness_path()] == [n for n, _, _ in full.witness_path()]
