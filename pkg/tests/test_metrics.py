from app.schemas.schemas import AttackKind, AttackScenario, FLConfig, SimConfig, TranscriptEvent
from app.sim import harness
from app.sim.metrics import (
    METRICS_COLUMNS,
    metrics,
    read_transcript_jsonl,
    write_metrics_csv,
    write_transcript_jsonl,
)

# prod 曲线上信封固定开销：10个长度前缀 + 356 字节字段
ENVELOPE_OVERHEAD = 396


def _run(kind=AttackKind.NONE, rounds=2):
    config = SimConfig(
        pairs=2,
        pseudonym_batch=1,
        fl=FLConfig(rounds=rounds, total_clients=4, participation=2, dimension=4),
        scenario=AttackScenario(kind=kind),
        u2u_payload_bytes=64,
    )
    state = harness.build(config)
    harness.inject(state, config.scenario)
    harness.run_rounds(state, rounds)
    return state


def test_honest_summary():
    state = _run()
    summary = metrics(state.transcript, tra=state.tra, protocol_entities=5, total_entities=7)
    assert summary.rejected == 0
    assert summary.detection_rate is None
    assert summary.rejects_by_reason == {}
    assert summary.traced == {}
    assert summary.protocol_entities == 5


def test_bytes_per_round_matches_wire_arithmetic():
    state = _run()
    summary = metrics(state.transcript)
    update = 8 + 8 * 4 + ENVELOPE_OVERHEAD
    u2u = 64 + ENVELOPE_OVERHEAD
    # 第0轮只有初始广播；之后每轮 2 个更新、4 个广播、2 个 U2U
    assert summary.bytes_per_round[0] == 4 * update
    assert summary.bytes_per_round[1] == 2 * update + 4 * update + 2 * u2u
    assert summary.bytes_per_round[2] == summary.bytes_per_round[1]
    assert [row.bytes_sent for row in state.round_metrics] == [summary.bytes_per_round[1], summary.bytes_per_round[2]]


def test_detection_rate_for_modification():
    state = _run(kind=AttackKind.CLIENT_MODIFICATION)
    summary = metrics(state.transcript)
    assert summary.adversarial_total > 0
    assert summary.adversarial_rejected == summary.adversarial_total
    assert summary.detection_rate == 1.0
    assert sum(summary.rejects_by_reason.values()) == summary.rejected


def test_detection_rate_partial():
    events = [
        TranscriptEvent(time=0, sender="a", receiver="b", kind="u2u", verdict="reject", reason="stale", adversarial=True),
        TranscriptEvent(time=0, sender="a", receiver="b", kind="u2u", verdict="accept", adversarial=True),
        TranscriptEvent(time=0, sender="tra", receiver="a", kind="pseudonym", verdict="ok"),
    ]
    summary = metrics(events)
    assert summary.detection_rate == 0.5
    assert summary.accepted == 1 and summary.rejected == 1


def test_transcript_jsonl_uses_wire_field_names(tmp_path):
    state = _run(rounds=1)
    path = tmp_path / "transcript.jsonl"
    write_transcript_jsonl(state.transcript, path)
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first.startswith('{"time":0,"from":"tra","to":"kgc","kind":"setup"')
    assert read_transcript_jsonl(path) == state.transcript


def test_metrics_csv_header(tmp_path, data_dir):
    state = _run(rounds=2)
    path = tmp_path / "metrics.csv"
    write_metrics_csv(state.round_metrics, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == (data_dir / "metrics_header.csv").read_text(encoding="utf-8").strip()
    assert lines[0].split(",") == METRICS_COLUMNS
    assert len(lines) == 3
