"""
Pydantic 数据模型导出文件
"""

from app.schemas.schemas import (
    FLConfig, AttackKind, AttackScenario, SimConfig,
    TranscriptEvent, RoundMetrics, MetricsSummary,
    CostModelInput, CostReportRow, CostReport,
    BenchRow, AttackReportRow,
    TraceRequest, TraceResponse,
    IssuedPseudonymBase, IssuedPseudonym
)

__all__ = [
    "FLConfig", "AttackKind", "AttackScenario", "SimConfig",
    "TranscriptEvent", "RoundMetrics", "MetricsSummary",
    "CostModelInput", "CostReportRow", "CostReport",
    "BenchRow", "AttackReportRow",
    "TraceRequest", "TraceResponse",
    "IssuedPseudonymBase", "IssuedPseudonym"
]
