import io
import json
import threading
import urllib.error
import urllib.request

import pytest
from samples import TWO_SEM_RYBU

from rybu.api import ApiService, serve_api
from rybu.cli import compile_rybu, run_simulation
from rybu.imds import apply_action, enabled_actions
from rybu.lts import ExplorationLimits


@pytest.fixture(scope="module")
def compiled():
    return compile_rybu(TWO_SEM_RYBU)


@pytest.fixture(scope="module")
def server(compiled):
    srv = serve_api(compiled.model, compiled.meta, port=0)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


@pytest.fixture
def client(server):
    port = server.server_address[1]

    def request(method, path, body=None):
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(
            f"http://127.0.0.1:{port}{path}", data=data, method=method
        )
        if data:
            req.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(req) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as e:
            return e.code, json.loads(e.read())

    return request


def test_session_lifecycle(client, compiled):
    status, payload = client("POST", "/sessions")
    assert status == 200 and payload["v"] == 1
    sid = payload["session"]
    assert payload["configuration"]["servers"]["sem1"] == "state_up"
    assert len(payload["enabled"]) == 2
    assert payload["history_length"] == 0

    status, state = client("GET", f"/sessions/{sid}/state")
    assert status == 200
    assert state["configuration"] == payload["configuration"]

    first = payload["enabled"][0]
    status, after = client("POST", f"/sessions/{sid}/step", {"action_id": first["id"]})
    assert status == 200
    assert after["history_length"] == 1
    assert after["configuration"] == first["preview"]

    status, undone = client("POST", f"/sessions/{sid}/undo")
    assert status == 200
    assert undone["configuration"] == payload["configuration"]
    assert undone["history_length"] == 0

    # undo at the initial configuration stays put
    status, still = client("POST", f"/sessions/{sid}/undo")
    assert status == 200 and still["configuration"] == payload["configuration"]


def test_stale_action_id_conflicts_with_fresh_enabled_set(client):
    _, payload = client("POST", "/sessions")
    sid = payload["session"]
    first = payload["enabled"][0]["id"]
    status, _ = client("POST", f"/sessions/{sid}/step", {"action_id": first})
    assert status == 200
    status, err = client("POST", f"/sessions/{sid}/step", {"action_id": first})
    assert status == 409
    assert err["error"] == "action-not-enabled"
    assert err["enabled"], "the conflict body carries the current enabled set"
    # the offered ids are actually enabled now
    retry = err["enabled"][0]["id"]
    status, _ = client("POST", f"/sessions/{sid}/step", {"action_id": retry})
    assert status == 200


def test_unknown_session_is_404(client):
    status, err = client("GET", "/sessions/s999999/state")
    assert status == 404 and err["error"] == "unknown-session"


def test_malformed_bodies_are_422(client):
    _, payload = client("POST", "/sessions")
    sid = payload["session"]
    status, err = client("POST", f"/sessions/{sid}/step", {"action_id": "nope"})
    assert status == 422 and err["error"] == "malformed-body"
    status, err = client("POST", f"/sessions/{sid}/step", {})
    assert status == 422


def test_unknown_path_is_404(client):
    status, err = client("GET", "/frobnicate")
    assert status == 404 and err["error"] == "not-found"


def test_model_endpoint_decomposes_resource_servers(client):
    status, payload = client("GET", "/model")
    assert status == 200
    servers = {s["name"]: s for s in payload["servers"]}
    assert servers["sem1"]["vars"] == ["state"]
    assert servers["S_proc1"]["vars"] is None
    assert set(servers["sem1"]["states"]) == {"state_up", "state_down"}
    assert "wait" in servers["sem1"]["services"]
    assert payload["agents"] == ["A_proc1", "A_proc2"]


def test_state_payload_decomposes_values(client):
    _, payload = client("POST", "/sessions")
    assert payload["decomposed"]["sem1"] == {"state": "up"}
    assert "S_proc1" not in payload["decomposed"]


def test_verify_endpoint_reports_the_deadlock(client):
    status, payload = client("GET", "/verify")
    assert status == 200
    assert payload["complete"] is True
    assert payload["total_deadlocks"]
    node = payload["total_deadlocks"][0]["config"]
    assert node["servers"]["sem1"] == "state_down"
    assert node["servers"]["sem2"] == "state_down"


def test_graph_endpoint_enforces_cap(client):
    status, err = client("GET", "/graph?cap=10")
    assert status == 413 and err["error"] == "graph-too-large"
    status, payload = client("GET", "/graph?cap=100")
    assert status == 200
    assert len(payload["nodes"]) == 68 and len(payload["edges"]) == 104


def test_deadlocked_session_names_blocked_agents(client, compiled):
    _, payload = client("POST", "/sessions")
    sid = payload["session"]
    # drive the session into the crosswise deadlock via the API itself
    model = compiled.model
    config = model.initial
    order = ["A_proc1", "A_proc2", "A_proc1", "A_proc2", "A_proc1", "A_proc2"]
    for agent in order:
        enabled = enabled_actions(model, config)
        action = next(a for a in enabled if a.agent == agent)
        status, payload = client(
            "POST", f"/sessions/{sid}/step", {"action_id": model.action_index[action]}
        )
        assert status == 200
        config = apply_action(config, action)
    assert payload["deadlock"] is True
    assert payload["enabled"] == []
    assert set(payload["blocked"]) == {"A_proc1", "A_proc2"}


def test_api_steps_equal_cli_simulation(client, compiled):
    """The same six choices through the API and the CLI stepper agree."""
    model = compiled.model
    _, payload = client("POST", "/sessions")
    sid = payload["session"]
    api_states = [payload["configuration"]]
    for _ in range(6):
        action_id = payload["enabled"][0]["id"]
        _, payload = client("POST", f"/sessions/{sid}/step", {"action_id": action_id})
        api_states.append(payload["configuration"])

    out = io.StringIO()
    run_simulation(model, io.StringIO("1\n" * 6 + "q\n"), out)
    import re

    cli_states = re.findall(r"state: (<[^\n]*>)", out.getvalue())

    def render(config_payload):
        from rybu.imds import Configuration, Message

        return str(
            Configuration.make(
                states=config_payload["servers"],
                pending=[
                    Message(agent, m["server"], m["service"])
                    for agent, m in config_payload["pending"].items()
                ],
                terminated=config_payload["terminated"],
            )
        )

    assert [render(c) for c in api_states] == cli_states


def test_service_layer_direct_use(compiled):
    service = ApiService(compiled.model, compiled.meta, ExplorationLimits(max_nodes=10))
    payload = service.verify_payload_cached()
    assert payload["complete"] is False  # tight limit: explicitly inconclusive
