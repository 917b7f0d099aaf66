import numpy as np
import pytest

from app.crypto import clpa
from app.exceptions import BuildError, ConfigError, PskInvalidError
from app.fl import fl_core
from app.schemas.schemas import AttackKind, AttackScenario, FLConfig, SimConfig
from app.sim import harness
from app.sim.events import ENVELOPE_KINDS, KIND_BROADCAST, KIND_UPDATE
from app.sim.metrics import metrics


def small_config(kind=AttackKind.NONE, seed=1, pairs=2, rounds=3, **overrides) -> SimConfig:
    values = dict(
        pairs=pairs,
        seed=seed,
        pseudonym_batch=1,
        fl=FLConfig(rounds=rounds, total_clients=2 * pairs, participation=pairs),
        scenario=AttackScenario(kind=kind, target_round=1),
    )
    values.update(overrides)
    return SimConfig(**values)


def simulate(config: SimConfig) -> harness.SimState:
    state = harness.build(config)
    harness.inject(state, config.scenario)
    harness.run_rounds(state, config.fl.rounds)
    return state


def envelope_events(state):
    return [event for event in state.transcript if event.kind in ENVELOPE_KINDS]


def test_build_entity_counts():
    config = small_config(pairs=1, rounds=1)
    state = harness.build(config)
    assert config.protocol_entities == 3
    assert config.total_entities == 5
    assert sorted(state.entities) == ["cs", "user-01", "user-02"]
    assert state.pairs == [("user-01", "user-02")]
    assert state.entities["cs"].kind == harness.EntityKind.CS
    assert {state.entities[name].kind for name in ("user-01", "user-02")} == {harness.EntityKind.USER}
    assert set(harness.EntityKind) == {harness.EntityKind.CS, harness.EntityKind.USER}


def test_build_adopts_initial_model():
    state = harness.build(small_config())
    for user in state.users:
        assert user.model == fl_core.ModelVector.zeros(4)
        assert user.credential is not None
    kinds = [event.kind for event in state.transcript]
    assert kinds[0] == "setup"
    assert kinds.count("usk") == len(state.entities)
    assert all(event.verdict == "accept" for event in envelope_events(state))


def test_build_reports_failed_step(monkeypatch):
    def refuse(*args, **kwargs):
        raise PskInvalidError("refused")

    monkeypatch.setattr(clpa, "extract_usk", refuse)
    with pytest.raises(BuildError) as excinfo:
        harness.build(small_config())
    assert excinfo.value.step == "pseudonym"


def test_zero_rounds_adds_no_envelopes():
    state = harness.build(small_config())
    before = len(state.transcript)
    harness.run_rounds(state, 0)
    assert len(state.transcript) == before


def test_transcript_is_deterministic():
    config = small_config(kind=AttackKind.REPLAY)
    first = [event.to_json() for event in simulate(config).transcript]
    second = [event.to_json() for event in simulate(config).transcript]
    assert first == second
    other = [event.to_json() for event in simulate(small_config(kind=AttackKind.REPLAY, seed=2)).transcript]
    assert first != other


def test_honest_run_has_no_rejections():
    state = simulate(small_config(rounds=4))
    assert all(event.verdict == "accept" for event in envelope_events(state))
    assert harness.check_safety(state)
    assert len(state.round_metrics) == 4


@pytest.mark.slow
def test_honest_convergence():
    config = SimConfig(pairs=5, fl=FLConfig(rounds=50, total_clients=10, participation=5, dimension=4))
    state = simulate(config)
    assert all(event.verdict == "accept" for event in envelope_events(state))
    shards = [user.shard for user in state.users]
    pooled = fl_core.ModelVector(fl_core.pooled_least_squares(shards))
    final_mse = state.round_metrics[-1].mse
    assert final_mse <= 1.5 * fl_core.evaluate(pooled, state.test_set)


def test_modified_updates_excluded_from_aggregate():
    # 所有用户都参与，保证攻击目标每轮都提交更新
    config = small_config(kind=AttackKind.CLIENT_MODIFICATION, rounds=3)
    config = config.model_copy(update={"fl": config.fl.model_copy(update={"participation": 4})})
    state = simulate(config)
    assert harness.check_safety(state)
    for record in state.records:
        assert "user-01" in record.submitted
        assert "user-01" not in record.accepted
        others = [record.submitted[name] for name in sorted(record.accepted)]
        expected = np.mean([update.weights for update in others], axis=0)
        assert np.array_equal(record.aggregate.weights, fl_core.aggregate(others, [1.0] * len(others)).weights)
        assert np.allclose(record.aggregate.weights, expected)


def test_fake_server_round_rejected():
    config = small_config(kind=AttackKind.FAKE_SERVER, rounds=3)
    config = config.model_copy(update={"scenario": AttackScenario(kind=AttackKind.FAKE_SERVER, target_round=3)})
    state = simulate(config)
    forged = [event for event in state.transcript if event.sender == "fake-server"]
    assert len(forged) == len(state.users)
    assert all(event.kind == KIND_BROADCAST and event.round == 3 for event in forged)
    assert all(event.verdict == "reject" and event.reason == "equation-failure" for event in forged)
    # 用户仍然采用了真实的第3轮全局模型
    for user in state.users:
        assert user.model == state.global_model


def test_replay_rejected_in_window_and_stale():
    state = simulate(small_config(kind=AttackKind.REPLAY, rounds=2))
    adversarial = [event for event in state.transcript if event.adversarial]
    assert sorted(event.reason for event in adversarial) == ["replay", "stale"]
    times = [event.time for event in state.transcript]
    assert times == sorted(times)


@pytest.mark.parametrize("kind", [AttackKind.A1_PK_REPLACEMENT, AttackKind.A2_MASTER_KEY])
def test_key_attacks_detected_and_traced(kind):
    state = simulate(small_config(kind=kind, rounds=2))
    summary = metrics(state.transcript, tra=state.tra)
    assert summary.adversarial_total > 0
    assert summary.detection_rate == 1.0
    # 目标用户的更新与发给它的 CS 广播都会被伪造
    traced = set(summary.traced.values())
    assert "user-01" in traced
    assert traced <= {"user-01", "cs"}


@pytest.mark.parametrize(
    "kind",
    [
        AttackKind.CLIENT_MODIFICATION,
        AttackKind.REPLAY,
        AttackKind.A1_PK_REPLACEMENT,
        AttackKind.A2_MASTER_KEY,
    ],
)
def test_attacks_reach_non_participating_target(kind):
    # pairs=1, participation=1：user-02 可能从不上传，但每轮都会收到广播
    for seed in range(1, 11):
        config = small_config(kind=kind, seed=seed, pairs=1, rounds=2)
        config = config.model_copy(
            update={"scenario": AttackScenario(kind=kind, target_round=1, target_entity="user-02")}
        )
        state = simulate(config)
        summary = metrics(state.transcript)
        assert summary.adversarial_total > 0, f"seed {seed}"
        assert summary.detection_rate == 1.0, f"seed {seed}"
        assert harness.check_safety(state)


def test_fake_server_untraceable():
    state = simulate(small_config(kind=AttackKind.FAKE_SERVER, rounds=1))
    summary = metrics(state.transcript, tra=state.tra)
    assert summary.detection_rate == 1.0
    assert set(summary.traced.values()) == {"untraceable"}


@pytest.mark.slow
@pytest.mark.parametrize(
    "kind",
    [
        AttackKind.FAKE_SERVER,
        AttackKind.CLIENT_MODIFICATION,
        AttackKind.REPLAY,
        AttackKind.A1_PK_REPLACEMENT,
        AttackKind.A2_MASTER_KEY,
    ],
)
def test_detection_rate_over_seeds(kind):
    for seed in range(100):
        state = simulate(small_config(kind=kind, seed=seed, pairs=1, rounds=2))
        summary = metrics(state.transcript)
        assert summary.detection_rate == 1.0, f"seed {seed}"
        assert summary.rejected == summary.adversarial_rejected, f"seed {seed}"
        assert harness.check_safety(state)


def test_pseudonym_rotation_and_replenishment():
    config = small_config(
        rounds=6,
        freshness_window=100,
        pseudonym_lifetime=400,
        round_interval=100,
        poisson_lambda=0.0,
    )
    state = simulate(config)
    assert any(event.kind == "rotate" for event in state.transcript)
    assert all(event.verdict == "accept" for event in envelope_events(state))
    # 每个实体初始只有1个假名，轮换后必须向TRA补充过
    assert len(state.tra.issued) > len(state.entities)


def test_waiting_latency_added_per_round():
    state = simulate(small_config(rounds=3, poisson_lambda=4.0, round_interval=30))
    assert len(state.waiting) == 3
    update_times = sorted({event.time for event in state.transcript if event.kind == KIND_UPDATE})
    assert update_times[0] == 30 + state.waiting[0]


def test_inject_unknown_target():
    state = harness.build(small_config())
    with pytest.raises(ConfigError):
        harness.inject(state, AttackScenario(kind=AttackKind.REPLAY, target_entity="user-99"))
