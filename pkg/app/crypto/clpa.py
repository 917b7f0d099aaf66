"""
无证书假名认证协议

系统建立、身份匿名化与追踪、部分私钥签发、完整密钥提取、消息签名与验证。
所有随机性通过显式的 random.Random 传入，时间戳均为仿真时钟的秒数。
"""
import enum
import heapq
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from app.crypto.group_core import (
    BITSTRING_BITS,
    BITSTRING_SIZE,
    TAG_H0,
    TAG_H1,
    TAG_H2,
    TAG_H3,
    CurveSpec,
    GroupElement,
    Scalar,
    decode_element,
    decode_scalar,
    digest,
    encode_element,
    encode_scalar,
    encode_timestamp,
    frame,
    hash_to_bits,
    hash_to_scalar,
    multi_scalar_mul,
    random_scalar,
    scalar_mul,
    unframe,
    xor_bits,
)
from app.exceptions import (
    CurveError,
    DecodeError,
    PskInvalidError,
    RegistrationError,
    UnknownPseudonymError,
)

# 设置日志
logger = logging.getLogger(__name__)

# 默认时间窗口（仿真秒）
DEFAULT_FRESHNESS_WINDOW = 300
DEFAULT_PSEUDONYM_LIFETIME = 24 * 3600

# 信封中的字段数量
ENVELOPE_FIELD_COUNT = 10


class RejectReason(str, enum.Enum):
    STALE = "stale"
    REPLAY = "replay"
    THETA_MISMATCH = "theta-mismatch"
    EQUATION_FAILURE = "equation-failure"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class Verdict:
    """验证结果"""

    accepted: bool
    reason: Optional[RejectReason] = None

    @classmethod
    def accept(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def reject(cls, reason: RejectReason) -> "Verdict":
        return cls(False, reason)

    @property
    def label(self) -> str:
        return "accept" if self.accepted else "reject"


@dataclass(frozen=True)
class SystemParams:
    """公开的系统参数 params = {G, q, P, H0..H3, T_pub, P_pub}"""

    curve: CurveSpec
    t_pub: GroupElement
    p_pub: GroupElement
    n: int = BITSTRING_BITS
    freshness_window: int = DEFAULT_FRESHNESS_WINDOW
    pseudonym_lifetime: int = DEFAULT_PSEUDONYM_LIFETIME

    @property
    def generator(self) -> GroupElement:
        return self.curve.generator

    def encode(self) -> bytes:
        return frame(
            self.curve.name.encode("utf-8"),
            encode_element(self.generator),
            encode_element(self.t_pub),
            encode_element(self.p_pub),
            self.n.to_bytes(4, "big"),
            encode_timestamp(self.freshness_window),
            encode_timestamp(self.pseudonym_lifetime),
        )


@dataclass(frozen=True)
class RealIdentity:
    """真实身份 RID：UTF-8 名称，右侧补零至 n 比特"""

    bits: bytes

    def __post_init__(self):
        if len(self.bits) != BITSTRING_SIZE:
            raise ValueError(f"RID 必须为 {BITSTRING_SIZE} 字节")

    @classmethod
    def from_name(cls, name: str) -> "RealIdentity":
        raw = name.encode("utf-8")
        if not raw or len(raw) > BITSTRING_SIZE or b"\x00" in raw:
            raise ValueError(f"无效的身份名称: {name!r}")
        return cls(raw.ljust(BITSTRING_SIZE, b"\x00"))

    @property
    def name(self) -> str:
        return self.bits.rstrip(b"\x00").decode("utf-8", errors="replace")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Pseudonym:
    """匿名身份 AID = {AID_1, AID_2, T_i}"""

    aid1: GroupElement
    aid2: bytes
    t_issue: int

    def __post_init__(self):
        if self.aid1.is_identity:
            raise DecodeError("AID_1 不能是单位元")
        if len(self.aid2) != BITSTRING_SIZE:
            raise DecodeError(f"AID_2 必须为 {BITSTRING_SIZE} 字节")

    def to_bytes(self) -> bytes:
        """哈希内使用的序列化：AID_1 编码 || AID_2 || 8字节 T_i"""
        return encode_element(self.aid1) + self.aid2 + encode_timestamp(self.t_issue)

    @property
    def hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_bytes(cls, curve: CurveSpec, data: bytes) -> "Pseudonym":
        size = curve.element_size
        if len(data) != size + BITSTRING_SIZE + 8:
            raise DecodeError("AID 编码长度错误")
        return cls(
            aid1=decode_element(curve, data[:size]),
            aid2=data[size:size + BITSTRING_SIZE],
            t_issue=int.from_bytes(data[size + BITSTRING_SIZE:], "big"),
        )

    @classmethod
    def from_hex(cls, curve: CurveSpec, text: str) -> "Pseudonym":
        try:
            data = bytes.fromhex(text.strip())
        except ValueError:
            raise DecodeError(f"AID 不是十六进制字符串: {text!r}") from None
        return cls.from_bytes(curve, data)


@dataclass(frozen=True)
class PublicKey:
    """PK = {X, U}"""

    X: GroupElement
    U: GroupElement

    def to_bytes(self) -> bytes:
        return encode_element(self.X) + encode_element(self.U)


@dataclass(frozen=True)
class PartialSecretKey:
    lam: Scalar
    U: GroupElement


@dataclass(frozen=True)
class FullKeyPair:
    mu: Scalar
    lam: Scalar
    pk: PublicKey
    theta: Scalar


@dataclass(frozen=True)
class SignedEnvelope:
    """广播元组 (m, AID, theta, PK, (eta, A), t)"""

    m: bytes
    aid: Pseudonym
    theta: Scalar
    pk: PublicKey
    eta: Scalar
    A: GroupElement
    t: int

    def to_wire(self) -> bytes:
        """线格式：按 (m, aid1, aid2, T_i, theta, X, U, eta, A, t) 顺序逐字段加长度前缀"""
        curve = self.A.curve
        return frame(
            self.m,
            encode_element(self.aid.aid1),
            self.aid.aid2,
            encode_timestamp(self.aid.t_issue),
            encode_scalar(curve, self.theta),
            encode_element(self.pk.X),
            encode_element(self.pk.U),
            encode_scalar(curve, self.eta),
            encode_element(self.A),
            encode_timestamp(self.t),
        )

    @classmethod
    def from_wire(cls, curve: CurveSpec, data: bytes) -> "SignedEnvelope":
        fields = unframe(data, ENVELOPE_FIELD_COUNT)
        m, aid1, aid2, t_issue, theta, x, u, eta, a, t = fields
        if len(t_issue) != 8 or len(t) != 8:
            raise DecodeError("时间戳字段长度错误")
        return cls(
            m=m,
            aid=Pseudonym(decode_element(curve, aid1), aid2, int.from_bytes(t_issue, "big")),
            theta=decode_scalar(curve, theta),
            pk=PublicKey(decode_element(curve, x), decode_element(curve, u)),
            eta=decode_scalar(curve, eta),
            A=decode_element(curve, a),
            t=int.from_bytes(t, "big"),
        )


class IssuanceList:
    """TRA 签发、KGC 只读的假名列表"""

    def __init__(self):
        self._aids: Set[bytes] = set()

    def add(self, aid: Pseudonym) -> None:
        self._aids.add(aid.to_bytes())

    def __contains__(self, aid: Pseudonym) -> bool:
        return aid.to_bytes() in self._aids

    def __len__(self) -> int:
        return len(self._aids)


@dataclass
class TraState:
    """追踪机构状态：主私钥 alpha、注册名册与签发记录"""

    curve: CurveSpec
    alpha: Scalar
    t_pub: GroupElement
    roster: Set[RealIdentity] = field(default_factory=set)
    issued: Dict[bytes, Tuple[RealIdentity, int]] = field(default_factory=dict)
    issuance_list: IssuanceList = field(default_factory=IssuanceList)

    def register(self, rids: Iterable[RealIdentity]) -> None:
        for rid in rids:
            self.roster.add(rid)

    def __repr__(self) -> str:
        return f"TraState(curve={self.curve.name}, roster={len(self.roster)}, issued={len(self.issued)})"


@dataclass
class KgcState:
    """密钥生成中心状态：主私钥 beta 与来自TRA的签发列表"""

    beta: Scalar
    issuance_list: IssuanceList = field(default_factory=IssuanceList)

    def __repr__(self) -> str:
        return f"KgcState(issuance_list={len(self.issuance_list)})"


@dataclass(frozen=True)
class TraceResult:
    """追踪结果；traced 为 False 时表示不可追踪"""

    traced: bool
    rid: Optional[RealIdentity] = None

    def __str__(self) -> str:
        return self.rid.name if self.traced else "untraceable"


def setup(
    curve: CurveSpec,
    rng: random.Random,
    freshness_window: int = DEFAULT_FRESHNESS_WINDOW,
    pseudonym_lifetime: int = DEFAULT_PSEUDONYM_LIFETIME,
) -> Tuple[SystemParams, TraState, KgcState]:
    """系统建立：TRA 选取 alpha，KGC 选取 beta，公布 params"""
    try:
        curve.validate()
    except CurveError:
        logger.error(f"系统建立失败，曲线 {curve.name} 无效")
        raise
    alpha = random_scalar(curve, rng)
    beta = random_scalar(curve, rng)
    t_pub = scalar_mul(alpha, curve.generator)
    p_pub = scalar_mul(beta, curve.generator)
    params = SystemParams(
        curve=curve,
        t_pub=t_pub,
        p_pub=p_pub,
        freshness_window=freshness_window,
        pseudonym_lifetime=pseudonym_lifetime,
    )
    tra = TraState(curve=curve, alpha=alpha, t_pub=t_pub)
    # KGC 与 TRA 共享同一个签发列表对象
    kgc = KgcState(beta=beta, issuance_list=tra.issuance_list)
    logger.info(f"系统参数已发布 (curve={curve.name}, n={params.n})")
    return params, tra, kgc


def request_pseudonym(params: SystemParams, rng: random.Random) -> Tuple[Scalar, GroupElement]:
    """请求者选取 r 并计算 AID_1 = rP"""
    r = random_scalar(params.curve, rng)
    return r, scalar_mul(r, params.generator)


def _pseudonym_mask(tra: TraState, aid1: GroupElement, t_issue: int) -> bytes:
    shared = scalar_mul(tra.alpha, aid1)
    material = frame(encode_element(shared), encode_element(tra.t_pub), encode_timestamp(t_issue))
    return hash_to_bits(TAG_H0, material)


def issue_pseudonym(tra: TraState, rid: RealIdentity, aid1: GroupElement, now: int) -> Pseudonym:
    """TRA 计算 AID_2 = RID xor H0(alpha*AID_1, T_pub, T_i)"""
    if rid not in tra.roster:
        logger.warning(f"身份 {rid} 未注册，TRA 拒绝签发假名")
        raise RegistrationError(f"身份 {rid} 未在名册中注册")
    if aid1.is_identity or aid1.curve != tra.curve:
        raise DecodeError("AID_1 无效")
    aid2 = xor_bits(rid.bits, _pseudonym_mask(tra, aid1, now))
    aid = Pseudonym(aid1=aid1, aid2=aid2, t_issue=now)
    tra.issued[aid.to_bytes()] = (rid, now)
    tra.issuance_list.add(aid)
    logger.debug(f"已为 {rid} 签发假名 (T_i={now})")
    return aid


def trace(tra: TraState, aid: Pseudonym) -> TraceResult:
    """TRA 恢复真实身份；结果不在名册中时报告不可追踪"""
    candidate = RealIdentity(xor_bits(aid.aid2, _pseudonym_mask(tra, aid.aid1, aid.t_issue)))
    if candidate in tra.roster:
        return TraceResult(traced=True, rid=candidate)
    return TraceResult(traced=False)


def compute_theta(params: SystemParams, aid: Pseudonym, U: GroupElement) -> Scalar:
    """theta = H1(AID, U, P_pub)"""
    material = frame(aid.to_bytes(), encode_element(U), encode_element(params.p_pub))
    return hash_to_scalar(params.curve, TAG_H1, material)


def issue_psk(kgc: KgcState, params: SystemParams, aid: Pseudonym, rng: random.Random) -> PartialSecretKey:
    """KGC 计算 U = kP，lambda = k + theta*beta (mod q)"""
    if aid not in kgc.issuance_list:
        logger.warning("KGC 签发列表中不存在该假名，拒绝签发部分私钥")
        raise UnknownPseudonymError("假名未由TRA签发")
    curve = params.curve
    k = random_scalar(curve, rng)
    U = scalar_mul(k, params.generator)
    theta = compute_theta(params, aid, U)
    lam = (k + theta * kgc.beta) % curve.q
    return PartialSecretKey(lam=lam, U=U)


def check_psk(params: SystemParams, aid: Pseudonym, psk: PartialSecretKey) -> Optional[Scalar]:
    """校验 lambda*P = U + theta*P_pub；成功时返回 theta"""
    theta = compute_theta(params, aid, psk.U)
    lhs = scalar_mul(psk.lam, params.generator)
    rhs = psk.U + scalar_mul(theta, params.p_pub)
    return theta if lhs == rhs else None


def extract_usk(params: SystemParams, aid: Pseudonym, psk: PartialSecretKey, rng: random.Random) -> FullKeyPair:
    """校验部分私钥并生成完整密钥对 PK = {X, U}"""
    theta = check_psk(params, aid, psk)
    if theta is None:
        logger.warning("部分私钥校验失败，关闭当前会话")
        raise PskInvalidError("lambda*P != U + theta*P_pub")
    mu = random_scalar(params.curve, rng)
    X = scalar_mul(mu, params.generator)
    return FullKeyPair(mu=mu, lam=psk.lam, pk=PublicKey(X=X, U=psk.U), theta=theta)


def challenge_hashes(
    params: SystemParams, m: bytes, aid: Pseudonym, pk: PublicKey, A: GroupElement, t: int
) -> Tuple[Scalar, Scalar]:
    """h1 = H2(m, AID, PK, A, P_pub, t)，h2 = H3(m, AID, PK, A, P_pub, h1)"""
    curve = params.curve
    head = (m, aid.to_bytes(), pk.to_bytes(), encode_element(A), encode_element(params.p_pub))
    h1 = hash_to_scalar(curve, TAG_H2, frame(*head, encode_timestamp(t)))
    h2 = hash_to_scalar(curve, TAG_H3, frame(*head, encode_scalar(curve, h1)))
    return h1, h2


def sign(
    params: SystemParams, aid: Pseudonym, kp: FullKeyPair, m: bytes, t: int, rng: random.Random
) -> SignedEnvelope:
    """eta = a - h1*mu - h2*lambda (mod q)，签名 (eta, A)"""
    curve = params.curve
    a = random_scalar(curve, rng)
    A = scalar_mul(a, params.generator)
    h1, h2 = challenge_hashes(params, m, aid, kp.pk, A, t)
    eta = (a - h1 * kp.mu - h2 * kp.lam) % curve.q
    return SignedEnvelope(m=m, aid=aid, theta=kp.theta, pk=kp.pk, eta=eta, A=A, t=t)


class ReplayCache:
    """记录窗口内已接受的 (AID, t, digest(m))，完全相同的重复消息即使新鲜也拒绝"""

    def __init__(self, window: int):
        self.window = window
        self._seen: Set[Tuple[bytes, int, bytes]] = set()
        # 按 t 排序的小顶堆，与插入顺序无关
        self._expiry: List[Tuple[int, Tuple[bytes, int, bytes]]] = []

    @staticmethod
    def key(env: SignedEnvelope) -> Tuple[bytes, int, bytes]:
        return env.aid.to_bytes(), env.t, digest(b"RC:", env.m)

    def prune(self, now: int) -> None:
        while self._expiry and now - self._expiry[0][0] > self.window:
            _, key = heapq.heappop(self._expiry)
            self._seen.discard(key)

    def seen(self, env: SignedEnvelope) -> bool:
        return self.key(env) in self._seen

    def remember(self, env: SignedEnvelope) -> None:
        key = self.key(env)
        if key not in self._seen:
            self._seen.add(key)
            heapq.heappush(self._expiry, (env.t, key))

    def __len__(self) -> int:
        return len(self._seen)


def is_fresh(params: SystemParams, env: SignedEnvelope, now: int) -> bool:
    """t 与 T_i 都必须新鲜；超前于当前时钟的时间戳同样视为不新鲜"""
    if abs(now - env.t) > params.freshness_window:
        return False
    if env.aid.t_issue > now or now - env.aid.t_issue > params.pseudonym_lifetime:
        return False
    return True


def verify(
    params: SystemParams, env: SignedEnvelope, now: int, replay_cache: Optional[ReplayCache] = None
) -> Verdict:
    """按顺序执行：新鲜性、重放、theta 一致性、签名方程"""
    try:
        if not is_fresh(params, env, now):
            return Verdict.reject(RejectReason.STALE)
        if replay_cache is not None:
            replay_cache.prune(now)
            if replay_cache.seen(env):
                return Verdict.reject(RejectReason.REPLAY)
        # 信封中的 theta 不可信，必须重新计算比对
        if env.theta != compute_theta(params, env.aid, env.pk.U):
            return Verdict.reject(RejectReason.THETA_MISMATCH)
        h1, h2 = challenge_hashes(params, env.m, env.aid, env.pk, env.A, env.t)
        q = params.curve.q
        expected = multi_scalar_mul(
            [
                (env.eta, params.generator),
                (h1, env.pk.X),
                (h2, env.pk.U),
                (h2 * env.theta % q, params.p_pub),
            ]
        )
        if expected != env.A:
            return Verdict.reject(RejectReason.EQUATION_FAILURE)
    except (DecodeError, ValueError) as e:
        logger.debug(f"信封格式错误: {e}")
        return Verdict.reject(RejectReason.MALFORMED)
    if replay_cache is not None:
        replay_cache.remember(env)
    return Verdict.accept()


def verify_wire(
    params: SystemParams, data: bytes, now: int, replay_cache: Optional[ReplayCache] = None
) -> Tuple[Verdict, Optional[SignedEnvelope]]:
    """从线格式解码后验证；解码失败返回 malformed，不抛异常"""
    try:
        env = SignedEnvelope.from_wire(params.curve, data)
    except (DecodeError, ValueError) as e:
        logger.debug(f"信封解码失败: {e}")
        return Verdict.reject(RejectReason.MALFORMED), None
    return verify(params, env, now, replay_cache), env


def replenish_pseudonyms(
    tra: TraState,
    kgc: KgcState,
    params: SystemParams,
    rid: RealIdentity,
    count: int,
    rng: random.Random,
    now: int,
) -> List[Tuple[Pseudonym, PartialSecretKey]]:
    """补充一批 (AID, PSK)"""
    batch = []
    for _ in range(count):
        _, aid1 = request_pseudonym(params, rng)
        aid = issue_pseudonym(tra, rid, aid1, now)
        batch.append((aid, issue_psk(kgc, params, aid, rng)))
    if count:
        logger.info(f"已为 {rid} 补充 {count} 个假名")
    return batch
