"""
攻击者模型

每个攻击者都是信道上的变换：on_send 接收一次投递，返回实际进入事件队列的
投递列表（可以原样放行、篡改、丢弃或追加伪造消息）。伪造策略是固定的脚本
族：随机 eta、复用正常流量中的 A、以及缺少某个秘密时的代数重排。
"""
import logging
import random
from dataclasses import replace
from typing import List, Tuple

from app.crypto.clpa import (
    FullKeyPair,
    Pseudonym,
    PublicKey,
    SignedEnvelope,
    SystemParams,
    challenge_hashes,
    compute_theta,
    request_pseudonym,
    sign,
)
from app.crypto.group_core import BITSTRING_SIZE, Scalar, random_scalar, scalar_mul
from app.exceptions import ConfigError, UpdateFormatError
from app.fl.fl_core import ModelVector, decode_update, encode_update
from app.schemas.schemas import AttackKind, AttackScenario
from app.sim.events import KIND_BROADCAST, Delivery

# 设置日志
logger = logging.getLogger(__name__)

ADVERSARY_NAME = "adversary"
FAKE_SERVER_NAME = "fake-server"


def field_spans(data: bytes) -> List[Tuple[int, int]]:
    """返回长度前缀编码中每个字段内容的 [start, end) 区间"""
    spans = []
    offset = 0
    while offset + 4 <= len(data):
        length = int.from_bytes(data[offset:offset + 4], "big")
        start = offset + 4
        spans.append((start, start + length))
        offset = start + length
    return spans


def flip_bit(data: bytes, field_index: int, rng: random.Random) -> bytes:
    """翻转指定字段内的随机一位"""
    start, end = field_spans(data)[field_index]
    if end <= start:
        raise ValueError(f"字段 {field_index} 为空，无法翻转")
    position = rng.randrange(start, end)
    flipped = bytearray(data)
    flipped[position] ^= 1 << rng.randrange(8)
    return bytes(flipped)


def poison_payload(m: bytes) -> bytes:
    """把模型更新改写为恶意更新；非模型负载则加前缀"""
    try:
        model = decode_update(m)
    except UpdateFormatError:
        return b"forged:" + m
    return encode_update(ModelVector(model.weights * -10.0 + 5.0, model.round))


def self_minted_credential(params: SystemParams, rng: random.Random, now: int) -> Tuple[Pseudonym, FullKeyPair]:
    """未经TRA/KGC的自造身份与密钥：lambda 是随机数而不是 k + theta*beta"""
    curve = params.curve
    _, aid1 = request_pseudonym(params, rng)
    aid = Pseudonym(aid1=aid1, aid2=rng.getrandbits(8 * BITSTRING_SIZE).to_bytes(BITSTRING_SIZE, "big"), t_issue=now)
    U = scalar_mul(random_scalar(curve, rng), params.generator)
    theta = compute_theta(params, aid, U)
    mu = random_scalar(curve, rng)
    keypair = FullKeyPair(
        mu=mu,
        lam=random_scalar(curve, rng),
        pk=PublicKey(X=scalar_mul(mu, params.generator), U=U),
        theta=theta,
    )
    return aid, keypair


def a1_forgeries(
    params: SystemParams, env: SignedEnvelope, m: bytes, rng: random.Random, attempts: int
) -> List[SignedEnvelope]:
    """替换公钥的攻击者：掌握替换后的秘密值，但不知道 lambda"""
    curve = params.curve
    forged = []
    for attempt in range(attempts):
        x_sub = random_scalar(curve, rng)
        X_sub = scalar_mul(x_sub, params.generator)
        strategy = attempt % 3
        if strategy == 0:
            # 替换 X，猜测 lambda
            kp = FullKeyPair(mu=x_sub, lam=random_scalar(curve, rng), pk=PublicKey(X_sub, env.pk.U), theta=env.theta)
            forged.append(sign(params, env.aid, kp, m, env.t, rng))
        elif strategy == 1:
            # 同时替换 U 并重算 theta，但没有 beta
            k_sub = random_scalar(curve, rng)
            U_sub = scalar_mul(k_sub, params.generator)
            theta = compute_theta(params, env.aid, U_sub)
            kp = FullKeyPair(mu=x_sub, lam=k_sub, pk=PublicKey(X_sub, U_sub), theta=theta)
            forged.append(sign(params, env.aid, kp, m, env.t, rng))
        else:
            # 复用截获的 (eta, A)
            forged.append(replace(env, m=m, pk=PublicKey(X_sub, env.pk.U)))
    return forged


def a2_forgeries(
    params: SystemParams, beta: Scalar, env: SignedEnvelope, m: bytes, rng: random.Random, attempts: int
) -> List[SignedEnvelope]:
    """掌握主私钥 beta 的攻击者：不能替换 X，也不知道 mu"""
    curve = params.curve
    q = curve.q
    forged = []
    for attempt in range(attempts):
        strategy = attempt % 3
        if strategy == 0:
            # 用 beta 为目标 AID 自签一份合法 PSK，mu 只能猜
            k_sub = random_scalar(curve, rng)
            U_sub = scalar_mul(k_sub, params.generator)
            theta = compute_theta(params, env.aid, U_sub)
            kp = FullKeyPair(
                mu=random_scalar(curve, rng),
                lam=(k_sub + theta * beta) % q,
                pk=PublicKey(env.pk.X, U_sub),
                theta=theta,
            )
            forged.append(sign(params, env.aid, kp, m, env.t, rng))
        elif strategy == 1:
            # 复用 A，eta 随机
            forged.append(replace(env, m=m, eta=random_scalar(curve, rng)))
        else:
            # 只用 beta 相关项重排 eta，缺少 mu 与 k
            a = random_scalar(curve, rng)
            A = scalar_mul(a, params.generator)
            _, h2 = challenge_hashes(params, m, env.aid, env.pk, A, env.t)
            eta = (a - h2 * env.theta * beta) % q
            forged.append(replace(env, m=m, eta=eta, A=A))
    return forged


class Adversary:
    """默认放行全部投递"""

    kind = AttackKind.NONE

    def __init__(self, scenario: AttackScenario, params: SystemParams, rng: random.Random):
        self.scenario = scenario
        self.params = params
        self.rng = rng

    def active(self, round_index: int) -> bool:
        return round_index >= self.scenario.target_round

    def targets(self, delivery: Delivery) -> bool:
        """目标实体发出或收到的正常投递；未被选中参与的用户仍会收到广播"""
        target = self.scenario.target_entity
        return (
            not delivery.adversarial
            and target in (delivery.sender, delivery.receiver)
            and self.active(delivery.round)
        )

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        return [delivery]

    def _decode(self, delivery: Delivery) -> SignedEnvelope:
        return SignedEnvelope.from_wire(self.params.curve, delivery.wire)


class FakeServerAdversary(Adversary):
    """冒充服务器，用自造密钥签发伪造的全局模型"""

    kind = AttackKind.FAKE_SERVER

    def __init__(self, scenario: AttackScenario, params: SystemParams, rng: random.Random):
        super().__init__(scenario, params, rng)
        self._credential = None

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        if delivery.kind != KIND_BROADCAST or delivery.round != self.scenario.target_round or delivery.adversarial:
            return [delivery]
        if self._credential is None:
            self._credential = self_minted_credential(self.params, self.rng, delivery.time)
            logger.info(f"伪造服务器在第 {delivery.round} 轮发起冒充")
        aid, keypair = self._credential
        env = self._decode(delivery)
        forged = sign(self.params, aid, keypair, poison_payload(env.m), delivery.time, self.rng)
        return [delivery, delivery.tampered(forged.to_wire(), sender=FAKE_SERVER_NAME)]


class ModificationAdversary(Adversary):
    """在传输中翻转已签名信封的比特"""

    kind = AttackKind.CLIENT_MODIFICATION

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        if not self.targets(delivery):
            return [delivery]
        spans = field_spans(delivery.wire)
        field_index = self.rng.choice([i for i, (start, end) in enumerate(spans) if end > start])
        return [delivery.tampered(flip_bit(delivery.wire, field_index, self.rng))]


class ReplayAdversary(Adversary):
    """截获一条消息，窗口内原样重放一次，窗口外再重放一次"""

    kind = AttackKind.REPLAY

    def __init__(self, scenario: AttackScenario, params: SystemParams, rng: random.Random):
        super().__init__(scenario, params, rng)
        self.captured = False

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        if self.captured or not self.targets(delivery):
            return [delivery]
        self.captured = True
        env = self._decode(delivery)
        duplicate = replace(delivery, sender=ADVERSARY_NAME, adversarial=True)
        stale = replace(duplicate, time=env.t + self.params.freshness_window + 1)
        logger.info(f"重放攻击者截获第 {delivery.round} 轮来自 {delivery.sender} 的消息")
        return [delivery, duplicate, stale]


class PkReplacementAdversary(Adversary):
    """A1：替换公钥并尝试重新签名"""

    kind = AttackKind.A1_PK_REPLACEMENT

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        if not self.targets(delivery):
            return [delivery]
        env = self._decode(delivery)
        forgeries = a1_forgeries(self.params, env, poison_payload(env.m), self.rng, self.scenario.attempts_per_round)
        return [delivery.tampered(forged.to_wire()) for forged in forgeries]


class MasterKeyAdversary(Adversary):
    """A2：持有 KGC 主私钥 beta，但没有用户秘密值 mu"""

    kind = AttackKind.A2_MASTER_KEY

    def __init__(self, scenario: AttackScenario, params: SystemParams, rng: random.Random, beta: Scalar):
        super().__init__(scenario, params, rng)
        self._beta = beta

    def on_send(self, delivery: Delivery) -> List[Delivery]:
        if not self.targets(delivery):
            return [delivery]
        env = self._decode(delivery)
        forgeries = a2_forgeries(
            self.params, self._beta, env, poison_payload(env.m), self.rng, self.scenario.attempts_per_round
        )
        return [delivery.tampered(forged.to_wire()) for forged in forgeries]


def make_adversary(scenario: AttackScenario, params: SystemParams, rng: random.Random, beta: Scalar) -> Adversary:
    kind = scenario.kind
    if kind == AttackKind.NONE:
        return Adversary(scenario, params, rng)
    if kind == AttackKind.FAKE_SERVER:
        return FakeServerAdversary(scenario, params, rng)
    if kind == AttackKind.CLIENT_MODIFICATION:
        return ModificationAdversary(scenario, params, rng)
    if kind == AttackKind.REPLAY:
        return ReplayAdversary(scenario, params, rng)
    if kind == AttackKind.A1_PK_REPLACEMENT:
        return PkReplacementAdversary(scenario, params, rng)
    if kind == AttackKind.A2_MASTER_KEY:
        return MasterKeyAdversary(scenario, params, rng, beta)
    raise ConfigError(f"未知攻击场景: {kind}")
