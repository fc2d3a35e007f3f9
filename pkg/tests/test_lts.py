import random

import pytest
from hypothesis import given, settings, strategies as st
from oracle import (
    naive_apply,
    naive_enabled,
    naive_partial_deadlocks,
    naive_reach,
    naive_total_deadlocks,
)

from rybu.imds import apply_action, enabled_actions
from rybu.lts import (
    ExplorationLimits,
    IncompleteLts,
    StepRejected,
    build_lts,
    extract_counterexample,
    find_partial_deadlocks,
    find_total_deadlocks,
    simulate_step,
    verify,
)

# Frozen counts for the two-semaphore system, confirmed against the
# brute-force oracle in test_counts_match_oracle below.
TWO_SEM_NODES = 68
TWO_SEM_EDGES = 104


def test_two_sem_graph_counts(dedan_two_sem, lowered):
    g1 = build_lts(dedan_two_sem)
    g2 = build_lts(lowered["two_sem"].model)
    assert (len(g1.nodes), len(g1.edges)) == (TWO_SEM_NODES, TWO_SEM_EDGES)
    assert (len(g2.nodes), len(g2.edges)) == (TWO_SEM_NODES, TWO_SEM_EDGES)


def test_counts_match_oracle(dedan_two_sem):
    nodes, edges = naive_reach(dedan_two_sem)
    assert (len(nodes), len(edges)) == (TWO_SEM_NODES, TWO_SEM_EDGES)
    g = build_lts(dedan_two_sem)
    assert set(g.nodes) == nodes
    assert {(g.nodes[s], a, g.nodes[d]) for s, a, d in g.edges} == edges


def test_two_sem_contains_crosswise_blockage(dedan_two_sem):
    g = build_lts(dedan_two_sem)
    assert any(
        dict(c.states)["sem[1]"] == "down"
        and dict(c.states)["sem[2]"] == "down"
        and {(m.server, m.service) for m in c.pending}
        == {("sem[1]", "wait"), ("sem[2]", "wait")}
        for c in g.nodes
    )


def test_model_with_no_enabled_actions_is_one_node(lowered):
    g = build_lts(lowered["no_threads"].model)
    assert len(g.nodes) == 1 and len(g.edges) == 0


def test_total_deadlocks_have_both_semaphores_down(dedan_two_sem):
    g = build_lts(dedan_two_sem)
    found = find_total_deadlocks(g)
    assert found
    for i in found:
        states = dict(g.nodes[i].states)
        assert states["sem[1]"] == "down" and states["sem[2]"] == "down"
        assert {m.service for m in g.nodes[i].pending} == {"wait"}


def test_ordered_acquisition_has_no_deadlock(lowered):
    g = build_lts(lowered["two_sem_ordered"].model)
    assert find_total_deadlocks(g) == []
    assert find_partial_deadlocks(g) == []


def test_single_semaphore_loop_never_blocks(lowered):
    g = build_lts(lowered["single_loop"].model)
    assert find_total_deadlocks(g) == []
    assert all(g.out_edges[i] for i in range(len(g.nodes)))


def test_proper_termination_is_not_deadlock(lowered):
    g = build_lts(lowered["terminating"].model)
    finals = [i for i in range(len(g.nodes)) if not g.out_edges[i]]
    assert finals, "the terminating model must have final nodes"
    assert find_total_deadlocks(g) == []
    for i in finals:
        assert not g.nodes[i].pending


def test_buffer_deadlock_blocks_both_threads_on_one_semaphore(lowered):
    g = build_lts(lowered["buffers"].model)
    found = find_total_deadlocks(g)
    assert found
    for i in found:
        pending = g.nodes[i].pending
        servers = {m.server for m in pending}
        assert len(pending) == 2
        assert len(servers) == 1, "both threads block on the same semaphore"
        assert {m.service for m in pending} == {"wait"}
        semaphore = servers.pop()
        assert dict(g.nodes[i].states)[semaphore] == "value_0"


def test_partial_deadlock_with_always_live_third_thread(lowered):
    g = build_lts(lowered["two_sem_third"].model)
    assert find_total_deadlocks(g) == []
    agents = {agent for agent, _ in find_partial_deadlocks(g)}
    assert agents == {"A_proc1", "A_proc2"}


def test_total_deadlock_agents_are_reported_partially_deadlocked(lowered):
    """Each pending agent of a total deadlock appears in the partial report,
    at the deadlock node itself or on an ancestor along its witness path."""
    for name in ("two_sem", "buffers", "contradiction"):
        g = build_lts(lowered[name].model)
        partial = find_partial_deadlocks(g)
        reported = {(agent, node) for agent, node in partial}
        for i in find_total_deadlocks(g):
            witness_nodes = {g.initial, i}
            current = i
            while current != g.initial:
                edge = g.parent_edge[current]
                current = g.edges[edge][0]
                witness_nodes.add(current)
            for message in g.nodes[i].pending:
                assert any(
                    (message.agent, n) in reported for n in witness_nodes
                ), (name, message.agent)


def test_partial_deadlocks_match_oracle_on_buffers(lowered):
    model = lowered["buffers"].model
    g = build_lts(model)
    nodes, edges = naive_reach(model)
    expected = naive_partial_deadlocks(model, nodes, edges)
    actual = {(agent, g.nodes[i]) for agent, i in find_partial_deadlocks(g)}
    assert actual == expected


def test_counterexample_is_shortest_and_replays(dedan_two_sem):
    g = build_lts(dedan_two_sem)
    target = find_total_deadlocks(g)[0]
    witness = extract_counterexample(g, target)
    assert len(witness) >= 4
    assert len(witness) == g.depth[target]
    config = witness.initial
    for action, after in witness.steps:
        config = apply_action(config, action)
        assert config == after
    assert config == g.nodes[target]


def test_counterexample_of_initial_node_is_empty(dedan_two_sem):
    g = build_lts(dedan_two_sem)
    witness = extract_counterexample(g, g.initial)
    assert witness.steps == ()
    assert witness.final == g.nodes[g.initial]


def test_simulate_step_first_start(dedan_two_sem):
    model = dedan_two_sem
    enabled = enabled_actions(model, model.initial)
    start_1 = next(a for a in enabled if a.agent == "A[1]")
    successor, next_enabled = simulate_step(model, model.initial, start_1)
    assert successor.message_of("A[1]").server == "sem[1]"
    assert successor.message_of("A[1]").service == "wait"
    assert next_enabled == enabled_actions(model, successor)


def test_simulate_step_into_deadlock_has_no_successors(dedan_two_sem):
    g = build_lts(dedan_two_sem)
    target = find_total_deadlocks(g)[0]
    witness = extract_counterexample(g, target)
    config = witness.initial
    for action, _ in witness.steps:
        config, enabled = simulate_step(dedan_two_sem, config, action)
    assert enabled == []


def test_simulate_step_rejects_disabled_action(dedan_two_sem):
    model = dedan_two_sem
    acting_later = next(
        a for a in model.actions if a.in_message.service == "wait"
    )
    with pytest.raises(StepRejected) as err:
        simulate_step(model, model.initial, acting_later)
    assert err.value.enabled == enabled_actions(model, model.initial)


@given(seed=st.integers(min_value=0, max_value=2_000))
@settings(max_examples=25, deadline=None)
def test_any_walk_stays_inside_the_graph(dedan_two_sem, seed):
    g = build_lts(dedan_two_sem)
    node_set = set(g.nodes)
    rng = random.Random(seed)
    config = dedan_two_sem.initial
    for _ in range(15):
        enabled = enabled_actions(dedan_two_sem, config)
        if not enabled:
            break
        config, _ = simulate_step(dedan_two_sem, config, rng.choice(enabled))
        assert config in node_set


def test_limits_produce_explicit_incompleteness(dedan_two_sem):
    g = build_lts(dedan_two_sem, ExplorationLimits(max_nodes=10))
    assert not g.complete
    assert len(g.nodes) == 10
    with pytest.raises(IncompleteLts):
        find_total_deadlocks(g)
    with pytest.raises(IncompleteLts):
        find_partial_deadlocks(g)
    report = verify(dedan_two_sem, ExplorationLimits(max_nodes=10))
    assert not report.complete and not report.total_deadlocks


def test_depth_limit_is_also_explicit(dedan_two_sem):
    g = build_lts(dedan_two_sem, ExplorationLimits(max_depth=2))
    assert not g.complete
    assert max(g.depth) <= 2


def test_exploration_is_deterministic(lowered):
    model = lowered["buffers"].model
    a = build_lts(model)
    b = build_lts(model)
    assert a.nodes == b.nodes
    assert a.edges == b.edges


def test_verify_report_carries_witnesses(lowered):
    report = verify(lowered["two_sem"].model)
    assert report.complete
    assert report.nodes == TWO_SEM_NODES and report.edges == TWO_SEM_EDGES
    assert len(report.total_deadlocks) == 1
    d = report.total_deadlocks[0]
    config = d.witness.initial
    for action, _ in d.witness.steps:
        config = apply_action(config, action)
    assert config == d.config
    assert report.partial_deadlocks


def test_invalid_model_is_rejected(dedan_two_sem):
    from dataclasses import replace

    from rybu.imds import ModelError

    broken = replace(dedan_two_sem, servers=dedan_two_sem.servers + ("ghost",))
    with pytest.raises(ModelError):
        build_lts(broken)
