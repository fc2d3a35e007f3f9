import random

import pytest
from hypothesis import given, strategies as st

from rybu.imds import (
    Action,
    ActionNotEnabled,
    Configuration,
    Message,
    State,
    StructuralError,
    SystemModel,
    agent_view,
    apply_action,
    enabled_actions,
    server_view,
    validate_model,
)

# The hand-written two-semaphore model's most-quoted action: granting a
# wait on the first semaphore to the first agent.
GRANT_WAIT_1 = Action(
    in_message=Message("A[1]", "sem[1]", "wait"),
    in_state=State("sem[1]", "up"),
    out_state=State("sem[1]", "down"),
    out_message=Message("A[1]", "proc[1]", "ok_wait"),
)

FINISH_PROC_1 = Action(
    in_message=Message("A[1]", "proc[1]", "ok_sig"),
    in_state=State("proc[1]", "sec"),
    out_state=State("proc[1]", "stop"),
    out_message=None,
)


def test_initial_enabled_is_both_starts(dedan_two_sem):
    enabled = enabled_actions(dedan_two_sem, dedan_two_sem.initial)
    assert len(enabled) == 2
    assert {a.in_message.service for a in enabled} == {"start"}
    assert {a.agent for a in enabled} == {"A[1]", "A[2]"}


def test_no_pending_messages_enables_nothing(dedan_two_sem):
    config = Configuration.make(
        states=dict(dedan_two_sem.initial.states),
        pending=[],
        terminated=["A[1]", "A[2]"],
    )
    assert enabled_actions(dedan_two_sem, config) == []


def _config_waiting_on_sem1(model) -> Configuration:
    return Configuration.make(
        states={"sem[1]": "up", "sem[2]": "up", "proc[1]": "first", "proc[2]": "ini"},
        pending=[
            Message("A[1]", "sem[1]", "wait"),
            Message("A[2]", "proc[2]", "start"),
        ],
    )


def test_wait_on_raised_semaphore_is_enabled(dedan_two_sem):
    config = _config_waiting_on_sem1(dedan_two_sem)
    assert GRANT_WAIT_1 in enabled_actions(dedan_two_sem, config)


def test_enabled_rejects_malformed_configuration(dedan_two_sem):
    broken = Configuration.make(
        states={"sem[1]": "up"},  # three servers missing
        pending=[Message("A[1]", "sem[1]", "wait")],
    )
    with pytest.raises(StructuralError):
        enabled_actions(dedan_two_sem, broken)


def test_apply_grant_moves_state_and_message(dedan_two_sem):
    config = _config_waiting_on_sem1(dedan_two_sem)
    after = apply_action(config, GRANT_WAIT_1)
    assert after.state_of("sem[1]") == "down"
    assert after.message_of("A[1]") == Message("A[1]", "proc[1]", "ok_wait")
    # frame: untouched parts stay identical
    assert after.state_of("sem[2]") == "up"
    assert after.state_of("proc[2]") == "ini"
    assert after.message_of("A[2]") == Message("A[2]", "proc[2]", "start")


def test_apply_terminating_action_retires_agent():
    config = Configuration.make(
        states={"proc[1]": "sec", "sem[1]": "up"},
        pending=[Message("A[1]", "proc[1]", "ok_sig")],
    )
    after = apply_action(config, FINISH_PROC_1)
    assert after.state_of("proc[1]") == "stop"
    assert after.message_of("A[1]") is None
    assert after.is_terminated("A[1]")
    assert not config.is_terminated("A[1]")  # input untouched


def test_apply_rejects_disabled_action():
    config = Configuration.make(
        states={"sem[1]": "down", "sem[2]": "up", "proc[1]": "ini", "proc[2]": "ini"},
        pending=[Message("A[1]", "sem[1]", "wait")],
    )
    with pytest.raises(ActionNotEnabled):
        apply_action(config, GRANT_WAIT_1)  # needs sem[1]=up


def test_apply_is_deterministic(dedan_two_sem):
    config = _config_waiting_on_sem1(dedan_two_sem)
    assert apply_action(config, GRANT_WAIT_1) == apply_action(config, GRANT_WAIT_1)


def test_server_view_partitions_two_sem(dedan_two_sem):
    view = server_view(dedan_two_sem)
    assert set(view) == {"sem[1]", "sem[2]", "proc[1]", "proc[2]"}
    union = set()
    total = 0
    for actions in view.values():
        assert not (union & actions), "server processes must be disjoint"
        union |= actions
        total += len(actions)
    assert union == set(dedan_two_sem.actions)
    assert total == len(dedan_two_sem.actions)


def test_agent_view_partitions_two_sem(dedan_two_sem):
    view = agent_view(dedan_two_sem)
    assert set(view) == {"A[1]", "A[2]"}
    assert set().union(*view.values()) == set(dedan_two_sem.actions)
    assert sum(len(a) for a in view.values()) == len(dedan_two_sem.actions)


def test_views_of_actionless_model():
    model = SystemModel(
        servers=("s",),
        agents=("a",),
        states_decl=frozenset({State("s", "v")}),
        messages_decl=frozenset({Message("a", "s", "r")}),
        actions=(),
        initial=Configuration.make(states={"s": "v"}, pending=[Message("a", "s", "r")]),
    )
    assert server_view(model) == {"s": frozenset()}
    assert agent_view(model) == {"a": frozenset()}


def test_validate_accepts_two_sem(dedan_two_sem):
    assert validate_model(dedan_two_sem) == []


def test_validate_flags_server_continuity(dedan_two_sem):
    bad = Action(
        in_message=Message("A[1]", "sem[1]", "wait"),
        in_state=State("sem[1]", "up"),
        out_state=State("sem[2]", "down"),  # hops to another server
        out_message=Message("A[1]", "proc[1]", "ok_wait"),
    )
    model = SystemModel(
        servers=dedan_two_sem.servers,
        agents=dedan_two_sem.agents,
        states_decl=dedan_two_sem.states_decl,
        messages_decl=dedan_two_sem.messages_decl,
        actions=dedan_two_sem.actions + (bad,),
        initial=dedan_two_sem.initial,
    )
    kinds = {v.kind for v in validate_model(model)}
    assert "server-continuity" in kinds


def test_validate_flags_missing_initial_message(dedan_two_sem):
    initial = Configuration.make(
        states=dict(dedan_two_sem.initial.states),
        pending=[m for m in dedan_two_sem.initial.pending if m.agent != "A[2]"],
    )
    model = SystemModel(
        servers=dedan_two_sem.servers,
        agents=dedan_two_sem.agents,
        states_decl=dedan_two_sem.states_decl,
        messages_decl=dedan_two_sem.messages_decl,
        actions=dedan_two_sem.actions,
        initial=initial,
    )
    violations = validate_model(model)
    assert any(v.kind == "initial-missing-message" and v.subject == "A[2]" for v in violations)


def test_validate_flags_agent_switch(dedan_two_sem):
    bad = Action(
        in_message=Message("A[1]", "sem[1]", "wait"),
        in_state=State("sem[1]", "up"),
        out_state=State("sem[1]", "down"),
        out_message=Message("A[2]", "proc[1]", "ok_wait"),  # answer to the wrong agent
    )
    model = SystemModel(
        servers=dedan_two_sem.servers,
        agents=dedan_two_sem.agents,
        states_decl=dedan_two_sem.states_decl,
        messages_decl=dedan_two_sem.messages_decl,
        actions=dedan_two_sem.actions + (bad,),
        initial=dedan_two_sem.initial,
    )
    assert any(v.kind == "agent-continuity" for v in validate_model(model))


def test_configuration_hashes_canonically():
    a = Configuration.make(
        states={"x": "1", "y": "2"},
        pending=[Message("b", "x", "r"), Message("a", "y", "r")],
    )
    b = Configuration.make(
        states={"y": "2", "x": "1"},
        pending=[Message("a", "y", "r"), Message("b", "x", "r")],
    )
    assert a == b and hash(a) == hash(b)


def test_configuration_rejects_double_pending():
    with pytest.raises(StructuralError):
        Configuration.make(
            states={"s": "v"},
            pending=[Message("a", "s", "r"), Message("a", "s", "q")],
        )


@given(seed=st.integers(min_value=0, max_value=10_000))
def test_random_walk_preserves_frame_property(dedan_two_sem, seed):
    """Along any run, each step changes exactly one server and one agent slot."""
    rng = random.Random(seed)
    config = dedan_two_sem.initial
    for _ in range(12):
        enabled = enabled_actions(dedan_two_sem, config)
        if not enabled:
            break
        action = rng.choice(enabled)
        after = apply_action(config, action)
        changed_servers = {
            s for (s, v), (s2, v2) in zip(config.states, after.states) if v != v2
        }
        assert changed_servers <= {action.server}
        moved = set(m.agent for m in config.pending) ^ set(m.agent for m in after.pending)
        before_msgs = dict((m.agent, m) for m in config.pending)
        after_msgs = dict((m.agent, m) for m in after.pending)
        differing = {
            a
            for a in set(before_msgs) | set(after_msgs)
            if before_msgs.get(a) != after_msgs.get(a)
        }
        assert differing == {action.agent}
        assert moved <= {action.agent}
        config = after
