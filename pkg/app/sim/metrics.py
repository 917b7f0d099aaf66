"""
运行指标汇总与导出
"""
import csv
import logging
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from app.crypto import clpa
from app.crypto.clpa import Pseudonym, TraState
from app.exceptions import DecodeError
from app.schemas.schemas import MetricsSummary, RoundMetrics, TranscriptEvent
from app.sim.events import ENVELOPE_KINDS

# 设置日志
logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["round", "mse", "bytes_sent", "accepted", "rejected"]


def metrics(
    transcript: Sequence[TranscriptEvent],
    tra: Optional[TraState] = None,
    protocol_entities: int = 0,
    total_entities: int = 0,
    final_mse: Optional[float] = None,
) -> MetricsSummary:
    """
    汇总接受/拒绝次数、按原因的拒绝数、每轮字节数与检测率。
    检测率 = 被拒绝的攻击信封数 / 攻击信封总数；没有攻击信封时为空。
    给出 tra 时对每个被拒绝信封的假名做追溯。
    """
    envelopes = [event for event in transcript if event.kind in ENVELOPE_KINDS]
    accepted = sum(1 for event in envelopes if event.verdict == "accept")
    rejected = [event for event in envelopes if event.verdict == "reject"]
    reasons = Counter(event.reason for event in rejected)

    bytes_per_round: Dict[int, int] = defaultdict(int)
    for event in envelopes:
        bytes_per_round[event.round] += event.size

    adversarial = [event for event in envelopes if event.adversarial]
    adversarial_rejected = sum(1 for event in adversarial if event.verdict == "reject")
    detection_rate = adversarial_rejected / len(adversarial) if adversarial else None

    traced: Dict[str, str] = {}
    if tra is not None:
        for event in rejected:
            if event.aid is None or event.aid in traced:
                continue
            try:
                aid = Pseudonym.from_hex(tra.curve, event.aid)
            except (DecodeError, ValueError):
                continue
            traced[event.aid] = str(clpa.trace(tra, aid))

    return MetricsSummary(
        accepted=accepted,
        rejected=len(rejected),
        rejects_by_reason=dict(sorted(reasons.items())),
        bytes_per_round=dict(sorted(bytes_per_round.items())),
        adversarial_total=len(adversarial),
        adversarial_rejected=adversarial_rejected,
        detection_rate=detection_rate,
        protocol_entities=protocol_entities,
        total_entities=total_entities,
        traced=traced,
        final_mse=final_mse,
    )


def write_transcript_jsonl(transcript: Iterable[TranscriptEvent], path: Union[str, Path]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        for event in transcript:
            handle.write(event.to_json() + "\n")


def read_transcript_jsonl(path: Union[str, Path]) -> List[TranscriptEvent]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [TranscriptEvent.model_validate_json(line) for line in handle if line.strip()]


def write_metrics_csv(rows: Iterable[RoundMetrics], path: Union[str, Path]) -> None:
    """每轮一行"""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=METRICS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())
    logger.info(f"已写入 {path}")
