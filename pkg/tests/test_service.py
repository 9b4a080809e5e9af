"""Control service: REST endpoints, WebSocket snapshot/diff fan-out, and
offline operation wrappers, all driven through the ASGI test client."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from myosonic.config import EngineConfig
from myosonic.engine import LiveEngine
from myosonic.ingest import DeviceId, record_frames, synth_emg
from myosonic.service.app import create_app


@pytest.fixture()
def client():
    # osc_port=0 binds an ephemeral UDP port so parallel tests never clash.
    config = EngineConfig(seed=1, scene="breath", osc_port=0)
    live = LiveEngine(config)
    app = create_app(live)
    with TestClient(app) as c:
        yield c


def make_replay(tmp_path, name="session.csv", profile="meso", seconds=2.0):
    frames = sorted(
        synth_emg(profile, 5, seconds, DeviceId.LEFT_ARM)
        + synth_emg(profile, 6, seconds, DeviceId.RIGHT_CALF),
        key=lambda f: (f.timestamp_us, f.device_id.value))
    path = tmp_path / name
    record_frames(frames, path)
    return path


def ws_wait_for(ws, wanted_type: str, limit: int = 400) -> dict:
    """Read frames until one of the wanted type arrives (meters and
    heartbeats interleave freely)."""
    for _ in range(limit):
        msg = ws.receive_json()
        if msg.get("type") == wanted_type:
            return msg
    raise AssertionError(f"no {wanted_type!r} message within {limit} frames")


# -- REST ---------------------------------------------------------------

def test_state_snapshot(client):
    state = client.get("/state").json()
    assert state["scene"] == "breath"
    assert state["scenes"] == ["breath", "musicking", "standstill"]
    assert set(state["mixer"]["strips"]) == {
        "friction", "fluidflow", "scraping", "bubble", "nonlinear"}
    assert state["levels"] == {"left_arm": "micro", "right_calf": "micro"}
    assert isinstance(state["seq"], int)


def test_parameter_schema_endpoint(client):
    schema = client.get("/schema/parameters").json()
    fc = schema["friction"]["bandpass_fc_hz"]
    assert fc["lo"] < fc["default"] < fc["hi"]
    assert schema["bubble"]["radius_m"]["lo"] > 0.0
    assert set(schema["breath_chain"]) == {"rt60_s", "feedback", "mix"}


def test_scenes_endpoint(client):
    assert client.get("/scenes").json() == ["breath", "musicking",
                                            "standstill"]


def test_control_set_applies(client):
    reply = client.post("/control/set", json={
        "address": "/mix/master/gain_db", "value": -12.0}).json()
    assert reply == {"ok": True, "address": "/mix/master/gain_db",
                     "error": None}
    assert client.get("/state").json()["mixer"]["master_gain_db"] == -12.0


def test_control_set_clamps(client):
    assert client.post("/control/set", json={
        "address": "/mix/master/gain_db", "value": -999.0}).json()["ok"]
    assert client.get("/state").json()["mixer"]["master_gain_db"] == -60.0


def test_control_set_unknown_address(client):
    reply = client.post("/control/set", json={
        "address": "/mix/strip/zither/gain_db", "value": 0.0}).json()
    assert reply["ok"] is False
    assert "zither" in reply["error"] or "strip" in reply["error"]


def test_control_set_bool_mute(client):
    assert client.post("/control/set", json={
        "address": "/mix/strip/friction/mute", "value": True}).json()["ok"]
    state = client.get("/state").json()
    assert state["mixer"]["strips"]["friction"]["mute"] is True


def test_control_set_scene(client):
    assert client.post("/control/set", json={
        "address": "/scene", "value": "musicking"}).json()["ok"]
    assert client.get("/state").json()["scene"] == "musicking"


def test_control_set_scene_rejects_number(client):
    reply = client.post("/control/set", json={
        "address": "/scene", "value": 3.0}).json()
    assert reply["ok"] is False


# -- WebSocket ----------------------------------------------------------

def test_ws_snapshot_on_connect(client):
    with client.websocket_connect("/ws") as ws:
        first = ws.receive_json()
        assert first["type"] == "snapshot"
        assert first["state"]["scene"] == "breath"


def test_ws_set_echoes_diff(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()  # initial snapshot
        ws.send_json({"type": "set", "address": "/mix/master/gain_db",
                      "value": -7.5})
        diff = ws_wait_for(ws, "diff")
        assert diff["changes"]["/mix/master/gain_db"] == -7.5
        assert diff["seq"] >= 1


def test_ws_bool_value_coerced(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "set",
                      "address": "/mix/strip/bubble/mute", "value": True})
        diff = ws_wait_for(ws, "diff")
        assert diff["changes"]["/mix/strip/bubble/mute"] is True


def test_ws_meters_flow(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        meters = ws_wait_for(ws, "meters")
        assert set(meters["strips"]) == {
            "friction", "fluidflow", "scraping", "bubble", "nonlinear"}
        assert "peak" in meters["master"] and "rms" in meters["master"]
        assert meters["levels"]["left_arm"] in ("micro", "meso", "macro")


def test_ws_bad_json_reports_error(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_text("{not json")
        err = ws_wait_for(ws, "error")
        assert "JSON" in err["message"]


def test_ws_unknown_message_type(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "query"})
        err = ws_wait_for(ws, "error")
        assert "set" in err["message"]


def test_ws_unknown_address_reports_error(client):
    with client.websocket_connect("/ws") as ws:
        ws.receive_json()
        ws.send_json({"type": "set", "address": "/mix/strip/zither/gain_db",
                      "value": 0.0})
        err = ws_wait_for(ws, "error")
        assert err["address"] == "/mix/strip/zither/gain_db"


def test_ws_two_clients_both_receive_diff(client):
    with client.websocket_connect("/ws") as a, \
            client.websocket_connect("/ws") as b:
        a.receive_json()
        b.receive_json()
        a.send_json({"type": "set", "address": "/fx/breath/mix",
                     "value": 0.8})
        assert ws_wait_for(a, "diff")["changes"]["/fx/breath/mix"] == 0.8
        assert ws_wait_for(b, "diff")["changes"]["/fx/breath/mix"] == 0.8


# -- offline wrappers -----------------------------------------------------

def test_render_endpoint(client, tmp_path):
    replay = make_replay(tmp_path)
    out = tmp_path / "render.wav"
    reply = client.post("/render", json={
        "replay": str(replay), "out": str(out), "seed": 7,
        "scene": "musicking"}).json()
    assert reply["blocks"] > 0
    assert reply["fault_count"] == 0
    assert reply["real_time_factor"] > 0.0
    assert reply["scene_timeline"][0][1] == "musicking"
    assert out.exists()


def test_render_endpoint_missing_replay(client, tmp_path):
    resp = client.post("/render", json={
        "replay": str(tmp_path / "nope.csv"),
        "out": str(tmp_path / "o.wav")})
    assert resp.status_code == 400


def test_analyze_endpoint(client, tmp_path):
    replay = make_replay(tmp_path, seconds=2.0)
    out = tmp_path / "features.csv"
    reply = client.post("/analyze", json={
        "replay": str(replay), "out": str(out)}).json()
    # 400 frames/device: settled hops at counts 50, 60, ..., 400 -> 36 each.
    assert reply["rows"] == 72
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("timestamp_us,device,mav1")
    assert len(lines) == 73


def test_analyze_endpoint_bad_path(client, tmp_path):
    resp = client.post("/analyze", json={
        "replay": str(tmp_path / "missing.csv")})
    assert resp.status_code == 400


def test_calibrate_endpoint(client, tmp_path):
    rest = make_replay(tmp_path, "rest.csv", profile="rest", seconds=3.0)
    mvc = make_replay(tmp_path, "mvc.csv", profile="macro", seconds=3.0)
    out = tmp_path / "cal.toml"
    reply = client.post("/calibrate", json={
        "rest": str(rest), "mvc": str(mvc), "out": str(out)}).json()
    assert reply["devices"] == ["left_arm", "right_calf"]
    assert out.exists()


def test_calibrate_endpoint_bad_path(client, tmp_path):
    resp = client.post("/calibrate", json={
        "rest": str(tmp_path / "r.csv"), "mvc": str(tmp_path / "m.csv"),
        "out": str(tmp_path / "cal.toml")})
    assert resp.status_code == 400
