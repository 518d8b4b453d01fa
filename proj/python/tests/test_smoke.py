import json
import math
from pathlib import Path

import pytest

import vrgym

DATA = Path(__file__).resolve().parents[2] / "data"


def test_frame_round_trip():
    frame = vrgym.encode_frame("/agent/a/cmd", 7, 123, "VelocityCommand", {"v": 1.0, "omega": 0.5})
    length = int.from_bytes(frame[:4], "big")
    assert length == len(frame) - 4
    env = vrgym.decode_frame(frame)
    assert env["topic"] == "/agent/a/cmd"
    assert env["seq"] == 7
    assert env["data"] == {"v": 1.0, "omega": 0.5}
    assert env["crc32"] == vrgym.crc32(vrgym.canonical_dump(env["data"]).encode())


def test_corrupt_frame_raises():
    frame = bytearray(vrgym.encode_frame("/t", 1, 1, "T", {"k": 1}))
    at = bytes(frame).index(b'"k":1') + 4
    frame[at] = ord("2")
    with pytest.raises(vrgym.FrameError):
        vrgym.decode_frame(bytes(frame))


def test_topic_patterns():
    assert vrgym.topic_matches("/agent/*/signal", "/agent/h1/signal")
    assert not vrgym.topic_matches("/agent/*/signal", "/agent/h1/x/signal")


def test_scene_step_moves_agent():
    scene = vrgym.load_scene((DATA / "kitchen.json").read_text())
    x0, y0, _ = scene.pose("agent")
    for _ in range(60):
        scene.step([("agent", 1.0, 0.0)])
    x1, y1, _ = scene.pose("agent")
    assert scene.tick == 60
    assert math.hypot(x1 - x0, y1 - y0) == pytest.approx(1.0, abs=1e-9)
    assert scene.to_dict()["tick"] == 60


def test_bad_scene_raises():
    with pytest.raises(vrgym.SceneError):
        vrgym.load_scene('{"entities": 5}')


def test_env_and_training():
    cfg = json.loads((DATA / "maze_env.json").read_text())
    env = vrgym.make_env(cfg, str(DATA))
    obs = env.reset(1)
    assert len(obs) == env.obs_dim
    obs, reward, done, info = env.step(0)
    assert set(info) == {"collision", "zone", "success"}
    report = vrgym.train("q", env, {"episodes": 20, "seed": 3})
    assert len(report["returns"]) == 20


def test_gradient_checks_pass():
    assert max(vrgym.gradient_checks(2).values()) < 1e-4


def test_value_iteration_and_maxent():
    mdp = vrgym.gridworld_mdp(4, 4)
    reward = [0.0] * 16
    reward[15] = 1.0
    value, policy = vrgym.value_iteration(mdp, reward)
    assert len(value) == 16 and len(policy) == 16
    assert value[14] > value[0]


def test_intent_predictors():
    goals = {"mug": (5.0, 0.0), "kettle": (0.0, 5.0)}
    post = vrgym.predict_straightline((4.0, 0.5), goals)
    assert max(post, key=post.get) == "mug"
    assert sum(post.values()) == pytest.approx(1.0)
    post = vrgym.predict_perpendicular((0.0, 0.0), (0.0, 1.0), goals)
    assert max(post, key=post.get) == "kettle"


def test_a_star():
    cost, path = vrgym.a_star(["...", ".#.", "..."], (0, 0), (2, 2))
    assert cost == pytest.approx(4.0)
    assert path[0] == (0, 0) and path[-1] == (2, 2)


def test_social_response():
    assert vrgym.respond("wave", "h1") == {"kind": "wave_back", "duration": 120, "target": "h1"}
    assert vrgym.respond("stretch", "h2")["kind"] == "handshake_reach"
