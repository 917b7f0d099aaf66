import enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# 联邦学习配置
class FLConfig(BaseModel):
    rounds: int = Field(50, gt=0)
    total_clients: int = Field(10, gt=0)
    participation: int = Field(5, gt=0)
    local_epochs: int = Field(5, gt=0)
    learning_rate: float = Field(0.05, gt=0)
    dimension: int = Field(4, gt=0)
    data_seed: int = 0
    points_per_client: int = Field(100, gt=0)
    test_points: int = Field(200, gt=0)
    noise_sigma: float = Field(0.1, ge=0)
    non_uniform: bool = False

    @model_validator(mode="after")
    def _check_participation(self):
        if self.participation > self.total_clients:
            raise ValueError(f"participation ({self.participation}) 不能超过 total_clients ({self.total_clients})")
        return self


# 攻击场景
class AttackKind(str, enum.Enum):
    NONE = "none"
    FAKE_SERVER = "fake_server"
    CLIENT_MODIFICATION = "client_modification"
    REPLAY = "replay"
    A1_PK_REPLACEMENT = "a1_pk_replacement"
    A2_MASTER_KEY = "a2_master_key"


class AttackScenario(BaseModel):
    kind: AttackKind = AttackKind.NONE
    target_round: int = Field(1, gt=0)
    target_entity: str = "user-01"
    attempts_per_round: int = Field(3, gt=0)


# 仿真配置
class SimConfig(BaseModel):
    pairs: int = Field(5, gt=0)
    fl: FLConfig = Field(default_factory=FLConfig)
    scenario: AttackScenario = Field(default_factory=AttackScenario)
    poisson_lambda: float = Field(4.0, ge=0)
    round_interval: int = Field(30, ge=0)
    seed: int = 1
    curve: Literal["toy", "prod"] = "prod"
    freshness_window: int = Field(300, gt=0)
    pseudonym_lifetime: int = Field(24 * 3600, gt=0)
    pseudonym_batch: int = Field(2, gt=0)
    u2u_payload_bytes: int = Field(64, ge=0)

    @model_validator(mode="after")
    def _check_entities(self):
        if self.fl.total_clients != 2 * self.pairs:
            raise ValueError(f"total_clients ({self.fl.total_clients}) 必须等于 2*pairs ({2 * self.pairs})")
        if self.scenario.kind != AttackKind.NONE and self.scenario.target_round > self.fl.rounds:
            raise ValueError(f"target_round ({self.scenario.target_round}) 超出轮数 {self.fl.rounds}")
        return self

    @property
    def protocol_entities(self) -> int:
        """K = 2P + 1（CS 加 P 对收发用户）"""
        return 2 * self.pairs + 1

    @property
    def total_entities(self) -> int:
        """K 加上 TRA 与 KGC"""
        return self.protocol_entities + 2


# 传输记录事件
class TranscriptEvent(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    time: int
    sender: str = Field(alias="from")
    receiver: str = Field(alias="to")
    kind: str
    verdict: str
    reason: Optional[str] = None
    round: int = 0
    aid: Optional[str] = None
    digest: Optional[str] = None
    size: int = 0
    adversarial: bool = False

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True)


class RoundMetrics(BaseModel):
    round: int
    mse: float
    bytes_sent: int
    accepted: int
    rejected: int


class MetricsSummary(BaseModel):
    accepted: int
    rejected: int
    rejects_by_reason: Dict[str, int]
    bytes_per_round: Dict[int, int]
    adversarial_total: int
    adversarial_rejected: int
    detection_rate: Optional[float] = None
    protocol_entities: int
    total_entities: int
    traced: Dict[str, str] = Field(default_factory=dict)
    final_mse: Optional[float] = None


# 成本模型
class CostModelInput(BaseModel):
    rounds: int = Field(ge=0)
    messages: int = Field(ge=0)
    t_sign: float = Field(ge=0)
    t_veri: float = Field(ge=0)
    poisson_lambda: float = Field(0.0, ge=0)
    pairs: int = Field(1, ge=0)
    baseline_t_sign: Optional[float] = Field(None, ge=0)
    baseline_t_veri: Optional[float] = Field(None, ge=0)
    payload_bytes: int = Field(40, ge=0)
    curve: Literal["toy", "prod"] = "prod"


class CostReportRow(BaseModel):
    scheme: str
    pairs: int
    # 实体数 K = 2P + 1（P 对用户加一台服务器）
    entities: int
    bytes_per_message: int
    sign_ops_per_message: int
    verify_ops_per_message: int
    t_sign_us: float
    t_veri_us: float
    training_cost_us: float
    messaging_cost_us: float
    total_latency_us: float
    per_round_all_clients_us: float
    per_round_bytes: int
    mean_waiting_latency_s: float


class CostReport(BaseModel):
    rows: List[CostReportRow]

    def row(self, scheme: str, pairs: Optional[int] = None) -> CostReportRow:
        for row in self.rows:
            if row.scheme == scheme and (pairs is None or row.pairs == pairs):
                return row
        raise KeyError(scheme)


# 基准测试
class BenchRow(BaseModel):
    scheme: str
    operation: str
    curve: str
    iterations: int
    median_us: float
    q1_us: float
    q3_us: float
    iqr_us: float


# 攻击扫描
class AttackReportRow(BaseModel):
    scenario: str
    seed: int
    adversarial_total: int
    adversarial_rejected: int
    detection_rate: Optional[float] = None
    honest_rejected: int


# 追踪接口
class TraceRequest(BaseModel):
    aid: str

    @field_validator("aid")
    @classmethod
    def _strip(cls, value: str) -> str:
        return value.strip()


class TraceResponse(BaseModel):
    aid: str
    traced: bool
    rid: Optional[str] = None


class IssuedPseudonymBase(BaseModel):
    aid_hex: str
    rid: str
    t_issue: int


class IssuedPseudonym(IssuedPseudonymBase):
    id: int

    model_config = ConfigDict(from_attributes=True)
