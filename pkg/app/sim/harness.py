"""
CATFL 部署的确定性离散事件仿真

实体：TRA、KGC、CS 以及 P 对收发用户（K = 2P + 1 个协议实体）。
build 完成系统建立、匿名化、PSK/USK 与 CS 配置；
run_rounds 执行签名/验证、聚合/分发与 U2U 语义传输。
单线程事件循环，所有随机性都由 SimConfig.seed 派生。
"""
import enum
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

import numpy as np

from app.crypto import clpa
from app.crypto.clpa import (
    FullKeyPair,
    KgcState,
    Pseudonym,
    RealIdentity,
    ReplayCache,
    SystemParams,
    TraState,
)
from app.crypto.group_core import digest, get_curve
from app.exceptions import BuildError, CatflError, ConfigError, UpdateFormatError
from app.fl import fl_core
from app.fl.fl_core import DataShard, ModelVector, TestSet
from app.schemas.schemas import AttackScenario, RoundMetrics, SimConfig, TranscriptEvent
from app.sim.adversary import Adversary, make_adversary
from app.sim.events import KIND_BROADCAST, KIND_U2U, KIND_UPDATE, Delivery, EventQueue
from app.sim.latency import sample_poisson

# 设置日志
logger = logging.getLogger(__name__)

CS_NAME = "cs"
TRA_NAME = "tra"
KGC_NAME = "kgc"


class EntityKind(str, enum.Enum):
    CS = "CS"
    USER = "User"


@dataclass(frozen=True)
class Credential:
    """一个假名及其完整密钥对"""

    aid: Pseudonym
    keypair: FullKeyPair


@dataclass
class Entity:
    name: str
    kind: EntityKind
    rid: RealIdentity
    stock: Deque[Credential] = field(default_factory=deque)
    credential: Optional[Credential] = None
    replay_cache: Optional[ReplayCache] = None
    model: Optional[ModelVector] = None
    shard: Optional[DataShard] = None


@dataclass
class RoundRecord:
    """一轮的聚合依据，用于事后检查安全性"""

    round: int
    participants: List[str]
    submitted: Dict[str, ModelVector] = field(default_factory=dict)
    accepted: Dict[str, ModelVector] = field(default_factory=dict)
    aggregate: Optional[ModelVector] = None


@dataclass
class SimState:
    config: SimConfig
    params: SystemParams
    tra: TraState
    kgc: KgcState
    entities: Dict[str, Entity]
    pairs: List[Tuple[str, str]]
    global_model: ModelVector
    test_set: TestSet
    true_weights: np.ndarray
    protocol_rng: random.Random
    selection_rng: random.Random
    latency_rng: random.Random
    payload_rng: random.Random
    clock: int = 0
    rounds_completed: int = 0
    queue: EventQueue = field(default_factory=EventQueue)
    transcript: List[TranscriptEvent] = field(default_factory=list)
    adversary: Optional[Adversary] = None
    records: List[RoundRecord] = field(default_factory=list)
    round_metrics: List[RoundMetrics] = field(default_factory=list)
    waiting: List[int] = field(default_factory=list)

    @property
    def cs(self) -> Entity:
        return self.entities[CS_NAME]

    @property
    def users(self) -> List[Entity]:
        return [entity for entity in self.entities.values() if entity.kind == EntityKind.USER]

    def record(self, **fields) -> TranscriptEvent:
        event = TranscriptEvent(time=self.clock, **fields)
        self.transcript.append(event)
        return event


def user_name(index: int) -> str:
    return f"user-{index:02d}"


def _rng(seed: int, stream: str) -> random.Random:
    return random.Random(f"{seed}:{stream}")


def _issue_credentials(state: SimState, entity: Entity, count: int) -> None:
    """向TRA/KGC补充假名并提取完整密钥，放入实体的假名库存"""
    batch = clpa.replenish_pseudonyms(
        state.tra, state.kgc, state.params, entity.rid, count, state.protocol_rng, state.clock
    )
    for aid, psk in batch:
        state.record(sender=TRA_NAME, receiver=entity.name, kind="pseudonym", verdict="ok", aid=aid.hex)
        state.record(sender=KGC_NAME, receiver=entity.name, kind="psk", verdict="ok", aid=aid.hex)
        keypair = clpa.extract_usk(state.params, aid, psk, state.protocol_rng)
        state.record(sender=entity.name, receiver=entity.name, kind="usk", verdict="ok", aid=aid.hex)
        entity.stock.append(Credential(aid, keypair))


def _expired(state: SimState, credential: Credential) -> bool:
    # 留出一个新鲜性窗口，保证消息送达时假名仍在有效期内
    age = state.clock - credential.aid.t_issue
    return age > state.params.pseudonym_lifetime - state.params.freshness_window


def ensure_credential(state: SimState, entity: Entity) -> Credential:
    """当前假名过期时切换到库存中的下一个，库存耗尽则向TRA补充"""
    if entity.credential is not None and not _expired(state, entity.credential):
        return entity.credential
    while entity.stock and _expired(state, entity.stock[0]):
        entity.stock.popleft()
    if not entity.stock:
        _issue_credentials(state, entity, state.config.pseudonym_batch)
    previous = entity.credential
    entity.credential = entity.stock.popleft()
    if previous is not None:
        logger.info(f"{entity.name} 切换到新假名 (T_i={entity.credential.aid.t_issue})")
        state.record(sender=entity.name, receiver=entity.name, kind="rotate", verdict="ok",
                     aid=entity.credential.aid.hex)
    return entity.credential


def build(config: SimConfig) -> SimState:
    """系统建立、匿名化、获取PSK、提取USK，最后由CS广播初始模型"""
    curve = get_curve(config.curve)
    protocol_rng = _rng(config.seed, "protocol")
    step = "setup"
    try:
        params, tra, kgc = clpa.setup(
            curve, protocol_rng, config.freshness_window, config.pseudonym_lifetime
        )
        entities: Dict[str, Entity] = {}
        for name, kind in [(CS_NAME, EntityKind.CS)] + [
            (user_name(i), EntityKind.USER) for i in range(1, 2 * config.pairs + 1)
        ]:
            entities[name] = Entity(
                name=name,
                kind=kind,
                rid=RealIdentity.from_name(name),
                replay_cache=ReplayCache(config.freshness_window),
            )
        shards, test_set, true_weights = fl_core.make_task(config.fl, np.random.default_rng(config.fl.data_seed))
        state = SimState(
            config=config,
            params=params,
            tra=tra,
            kgc=kgc,
            entities=entities,
            pairs=[(user_name(2 * i + 1), user_name(2 * i + 2)) for i in range(config.pairs)],
            global_model=ModelVector.zeros(config.fl.dimension),
            test_set=test_set,
            true_weights=true_weights,
            protocol_rng=protocol_rng,
            selection_rng=_rng(config.seed, "selection"),
            latency_rng=_rng(config.seed, "latency"),
            payload_rng=_rng(config.seed, "payload"),
        )
        state.record(sender=TRA_NAME, receiver=KGC_NAME, kind="setup", verdict="ok")

        step = "register"
        tra.register(entity.rid for entity in entities.values())
        for entity in entities.values():
            state.record(sender=entity.name, receiver=TRA_NAME, kind="register", verdict="ok")

        step = "pseudonym"
        for entity in entities.values():
            _issue_credentials(state, entity, config.pseudonym_batch)
            entity.credential = entity.stock.popleft()

        step = "configure"
        for shard, user in zip(shards, state.users):
            user.shard = shard
        state.record(sender=CS_NAME, receiver=CS_NAME, kind="configure", verdict="ok")
        broadcast_global(state, 0)
    except CatflError as e:
        logger.error(f"仿真构建在步骤 {step} 失败: {e}")
        raise BuildError(step, e) from e
    logger.info(
        f"仿真已构建: K={config.protocol_entities} 个协议实体 (另有TRA/KGC), curve={curve.name}, seed={config.seed}"
    )
    return state


def inject(state: SimState, scenario: AttackScenario) -> None:
    """安装信道上的攻击者"""
    if scenario.target_entity not in state.entities:
        raise ConfigError(f"攻击目标实体不存在: {scenario.target_entity}")
    state.adversary = make_adversary(
        scenario, state.params, _rng(state.config.seed, "adversary"), state.kgc.beta
    )
    logger.info(f"已注入攻击场景 {scenario.kind.value} (目标 {scenario.target_entity}, 第 {scenario.target_round} 轮起)")


def send(state: SimState, sender: Entity, receiver: str, kind: str, round_index: int, m: bytes) -> None:
    """签名后经可被攻击者观察的信道投递"""
    credential = ensure_credential(state, sender)
    env = clpa.sign(state.params, credential.aid, credential.keypair, m, state.clock, state.protocol_rng)
    delivery = Delivery(state.clock, sender.name, receiver, kind, round_index, env.to_wire())
    outgoing = state.adversary.on_send(delivery) if state.adversary else [delivery]
    for item in outgoing:
        state.queue.push(item)


def _deliver(state: SimState, delivery: Delivery) -> None:
    receiver = state.entities[delivery.receiver]
    verdict, env = clpa.verify_wire(state.params, delivery.wire, state.clock, receiver.replay_cache)
    event = state.record(
        sender=delivery.sender,
        receiver=delivery.receiver,
        kind=delivery.kind,
        verdict=verdict.label,
        reason=verdict.reason.value if verdict.reason else None,
        round=delivery.round,
        aid=env.aid.hex if env is not None else None,
        digest=digest(b"TX:", delivery.wire).hex(),
        size=len(delivery.wire),
        adversarial=delivery.adversarial,
    )
    if not verdict.accepted:
        # CS 或用户丢弃未通过验证的消息
        logger.warning(
            f"{delivery.receiver} 拒绝来自 {delivery.sender} 的 {delivery.kind} (round={delivery.round}): {event.reason}"
        )
        return
    if delivery.kind == KIND_BROADCAST:
        try:
            receiver.model = fl_core.decode_update(env.m)
        except UpdateFormatError as e:
            logger.warning(f"{receiver.name} 收到无法解析的全局模型: {e}")
    elif delivery.kind == KIND_UPDATE:
        _accept_update(state, delivery, env.m)


def _accept_update(state: SimState, delivery: Delivery, m: bytes) -> None:
    record = next((r for r in reversed(state.records) if r.round == delivery.round), None)
    try:
        update = fl_core.decode_update(m)
    except UpdateFormatError as e:
        logger.warning(f"CS 收到无法解析的更新: {e}")
        return
    if record is None or update.round != delivery.round or update.dimension != state.global_model.dimension:
        state.record(sender=CS_NAME, receiver=CS_NAME, kind="drop", verdict="reject",
                     reason="round-mismatch", round=delivery.round)
        return
    record.accepted[delivery.sender] = update


def drain(state: SimState, until: Optional[int] = None) -> None:
    """处理到期事件；until 为 None 时清空队列并让时钟单调前进"""
    while state.queue:
        if until is None:
            delivery = state.queue.pop()
            state.clock = max(state.clock, delivery.time)
        else:
            delivery = state.queue.pop_due(until)
            if delivery is None:
                break
        _deliver(state, delivery)


def broadcast_global(state: SimState, round_index: int) -> None:
    """CS 对全局模型签名并广播给所有用户"""
    m = fl_core.encode_update(state.global_model)
    for user in state.users:
        send(state, state.cs, user.name, KIND_BROADCAST, round_index, m)
    drain(state, state.clock)


def _run_round(state: SimState, round_index: int) -> None:
    config = state.config
    delay = sample_poisson(state.latency_rng, config.poisson_lambda)
    state.waiting.append(delay)
    state.clock += config.round_interval + delay
    first_event = len(state.transcript)

    users = state.users
    participants = sorted(
        state.selection_rng.sample([user.name for user in users], config.fl.participation)
    )
    record = RoundRecord(round=round_index, participants=participants)
    state.records.append(record)

    # 签名/验证：参与者训练并上传签名后的更新
    for name in participants:
        user = state.entities[name]
        if user.model is None:
            logger.warning(f"{name} 尚未持有经验证的全局模型，跳过本轮")
            continue
        update = fl_core.local_train(user.model, user.shard, config.fl.local_epochs, config.fl.learning_rate)
        record.submitted[name] = update
        send(state, user, CS_NAME, KIND_UPDATE, round_index, fl_core.encode_update(update))
    drain(state, state.clock)

    # 聚合/分发：只使用通过验证的更新
    if record.accepted:
        names = sorted(record.accepted)
        state.global_model = fl_core.aggregate([record.accepted[n] for n in names], [1.0] * len(names))
    else:
        logger.warning(f"第 {round_index} 轮没有通过验证的更新，保留上一轮全局模型")
        state.global_model = ModelVector(state.global_model.weights, round_index)
    record.aggregate = state.global_model
    broadcast_global(state, round_index)

    # U2U 语义传输
    for sender_name, receiver_name in state.pairs:
        payload = bytes(state.payload_rng.getrandbits(8) for _ in range(config.u2u_payload_bytes))
        send(state, state.entities[sender_name], receiver_name, KIND_U2U, round_index, payload)
    drain(state, state.clock)

    events = [e for e in state.transcript[first_event:] if e.kind in (KIND_UPDATE, KIND_BROADCAST, KIND_U2U)]
    state.round_metrics.append(
        RoundMetrics(
            round=round_index,
            mse=fl_core.evaluate(state.global_model, state.test_set),
            bytes_sent=sum(e.size for e in events),
            accepted=sum(1 for e in events if e.verdict == "accept"),
            rejected=sum(1 for e in events if e.verdict == "reject"),
        )
    )
    logger.info(
        f"第 {round_index} 轮完成: mse={state.round_metrics[-1].mse:.6f}, "
        f"接受 {state.round_metrics[-1].accepted}, 拒绝 {state.round_metrics[-1].rejected}"
    )


def run_rounds(state: SimState, rounds: int) -> List[TranscriptEvent]:
    """执行 rounds 轮训练；拒绝只记录不中断"""
    for _ in range(rounds):
        state.rounds_completed += 1
        _run_round(state, state.rounds_completed)
    # 延迟投递（例如窗口外重放）在运行结束时处理
    drain(state)
    return state.transcript


def check_safety(state: SimState) -> bool:
    """按通过验证的更新重新计算每轮聚合，确认被拒绝的信封没有影响全局模型"""
    for record in state.records:
        if record.aggregate is None:
            continue
        if not set(record.accepted) <= set(record.submitted):
            logger.error(f"第 {record.round} 轮接受了不是参与者提交的更新")
            return False
        if record.accepted:
            names = sorted(record.accepted)
            if any(record.accepted[n] != record.submitted[n] for n in names):
                logger.error(f"第 {record.round} 轮接受的更新与参与者提交的不一致")
                return False
            expected = np.mean(np.stack([record.submitted[n].weights for n in names]), axis=0)
            if not np.allclose(record.aggregate.weights, expected, rtol=0.0, atol=1e-12):
                logger.error(f"第 {record.round} 轮聚合结果与通过验证的更新均值不符")
                return False
    return True
