"""
基于证书的PKI基线方案

CA 用离散对数（Schnorr）签名为用户公钥签发证书，消息签名使用同一曲线上
同一套群运算，便于与无证书方案比较协议结构本身的开销。
证书字段参照 X.509 的必要字段与常用扩展（序列号、算法标识、颁发者、主体、
有效期、主体公钥、颁发者/主体密钥标识）。
"""
import enum
import logging
import random
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from app.crypto.group_core import (
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
    hash_to_scalar,
    multi_scalar_mul,
    random_scalar,
    scalar_mul,
    unframe,
)
from app.exceptions import DecodeError

# 设置日志
logger = logging.getLogger(__name__)

SIGNATURE_ALGORITHM = b"schnorr-sha256"
TAG_SCHNORR = b"S0:"
SERIAL_SIZE = 20
KEY_ID_SIZE = 20

CERTIFICATE_FIELD_COUNT = 11
MESSAGE_FIELD_COUNT = 5

# 每条消息的签名/验证操作次数
SIGN_OPS_PER_MESSAGE = 1
VERIFY_OPS_PER_MESSAGE = 2


class BaselineRejectReason(str, enum.Enum):
    MALFORMED = "malformed"
    CERT_SIGNATURE = "cert-signature"
    EXPIRED = "expired"
    STALE = "stale"
    SIGNATURE = "signature"


@dataclass(frozen=True)
class BaselineVerdict:
    accepted: bool
    reason: Optional[BaselineRejectReason] = None


@dataclass(frozen=True)
class SchnorrSignature:
    R: GroupElement
    s: Scalar


def key_identifier(pt: GroupElement) -> bytes:
    return digest(b"KI:", encode_element(pt))[:KEY_ID_SIZE]


def schnorr_sign(curve: CurveSpec, secret: Scalar, public: GroupElement, m: bytes, rng: random.Random) -> SchnorrSignature:
    k = random_scalar(curve, rng)
    R = scalar_mul(k, curve.generator)
    e = hash_to_scalar(curve, TAG_SCHNORR, frame(encode_element(R), encode_element(public), m))
    return SchnorrSignature(R=R, s=(k + e * secret) % curve.q)


def schnorr_verify(curve: CurveSpec, public: GroupElement, m: bytes, sig: SchnorrSignature) -> bool:
    """检验 sP - eX == R"""
    if sig.R.is_identity or public.is_identity:
        return False
    e = hash_to_scalar(curve, TAG_SCHNORR, frame(encode_element(sig.R), encode_element(public), m))
    return multi_scalar_mul([(sig.s, curve.generator), (-e, public)]) == sig.R


@dataclass(frozen=True)
class Certificate:
    serial: bytes
    issuer: str
    subject: str
    not_before: int
    not_after: int
    subject_public_key: GroupElement
    authority_key_id: bytes
    subject_key_id: bytes
    signature: SchnorrSignature
    signature_algorithm: bytes = SIGNATURE_ALGORITHM

    def tbs_bytes(self) -> bytes:
        """待签名部分"""
        return frame(
            self.serial,
            self.signature_algorithm,
            self.issuer.encode("utf-8"),
            self.subject.encode("utf-8"),
            encode_timestamp(self.not_before),
            encode_timestamp(self.not_after),
            encode_element(self.subject_public_key),
            self.authority_key_id,
            self.subject_key_id,
        )

    def to_wire(self) -> bytes:
        curve = self.subject_public_key.curve
        return frame(
            self.serial,
            self.signature_algorithm,
            self.issuer.encode("utf-8"),
            self.subject.encode("utf-8"),
            encode_timestamp(self.not_before),
            encode_timestamp(self.not_after),
            encode_element(self.subject_public_key),
            self.authority_key_id,
            self.subject_key_id,
            encode_element(self.signature.R),
            encode_scalar(curve, self.signature.s),
        )

    @classmethod
    def from_wire(cls, curve: CurveSpec, data: bytes) -> "Certificate":
        serial, alg, issuer, subject, nb, na, pk, akid, skid, r, s = unframe(data, CERTIFICATE_FIELD_COUNT)
        if len(nb) != 8 or len(na) != 8:
            raise DecodeError("证书有效期字段长度错误")
        try:
            issuer_name = issuer.decode("utf-8")
            subject_name = subject.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"证书名称不是UTF-8: {e}") from None
        return cls(
            serial=serial,
            issuer=issuer_name,
            subject=subject_name,
            not_before=int.from_bytes(nb, "big"),
            not_after=int.from_bytes(na, "big"),
            subject_public_key=decode_element(curve, pk),
            authority_key_id=akid,
            subject_key_id=skid,
            signature=SchnorrSignature(decode_element(curve, r), decode_scalar(curve, s)),
            signature_algorithm=alg,
        )


class CertificateAuthority:
    """单级CA"""

    def __init__(self, curve: CurveSpec, rng: random.Random, name: str = "catfl-root-ca"):
        self.curve = curve
        self.name = name
        self._secret = random_scalar(curve, rng)
        self.public_key = scalar_mul(self._secret, curve.generator)
        self.key_id = key_identifier(self.public_key)
        logger.info(f"基线CA {name} 已初始化 (curve={curve.name})")

    def issue(
        self, subject: str, subject_public_key: GroupElement, not_before: int, not_after: int, rng: random.Random
    ) -> Certificate:
        unsigned = Certificate(
            serial=rng.getrandbits(8 * SERIAL_SIZE).to_bytes(SERIAL_SIZE, "big"),
            issuer=self.name,
            subject=subject,
            not_before=not_before,
            not_after=not_after,
            subject_public_key=subject_public_key,
            authority_key_id=self.key_id,
            subject_key_id=key_identifier(subject_public_key),
            signature=SchnorrSignature(self.curve.generator, 0),
        )
        sig = schnorr_sign(self.curve, self._secret, self.public_key, unsigned.tbs_bytes(), rng)
        return replace(unsigned, signature=sig)


@dataclass(frozen=True)
class BaselineHolder:
    """持有CA证书的用户"""

    secret: Scalar
    certificate: Certificate


@dataclass(frozen=True)
class BaselineMessage:
    m: bytes
    t: int
    certificate: Certificate
    signature: SchnorrSignature

    def signed_bytes(self) -> bytes:
        return frame(self.m, encode_timestamp(self.t))

    def to_wire(self) -> bytes:
        curve = self.certificate.subject_public_key.curve
        return frame(
            self.m,
            encode_timestamp(self.t),
            self.certificate.to_wire(),
            encode_element(self.signature.R),
            encode_scalar(curve, self.signature.s),
        )

    @classmethod
    def from_wire(cls, curve: CurveSpec, data: bytes) -> "BaselineMessage":
        m, t, cert, r, s = unframe(data, MESSAGE_FIELD_COUNT)
        if len(t) != 8:
            raise DecodeError("时间戳字段长度错误")
        return cls(
            m=m,
            t=int.from_bytes(t, "big"),
            certificate=Certificate.from_wire(curve, cert),
            signature=SchnorrSignature(decode_element(curve, r), decode_scalar(curve, s)),
        )


def baseline_enroll(
    ca: CertificateAuthority, subject: str, rng: random.Random, now: int, validity: int
) -> BaselineHolder:
    secret = random_scalar(ca.curve, rng)
    public = scalar_mul(secret, ca.curve.generator)
    return BaselineHolder(secret=secret, certificate=ca.issue(subject, public, now, now + validity, rng))


def baseline_sign(holder: BaselineHolder, m: bytes, t: int, rng: random.Random) -> BaselineMessage:
    """对 (m, t) 签名并附带证书"""
    cert = holder.certificate
    curve = cert.subject_public_key.curve
    unsigned = BaselineMessage(m=m, t=t, certificate=cert, signature=SchnorrSignature(curve.generator, 0))
    sig = schnorr_sign(curve, holder.secret, cert.subject_public_key, unsigned.signed_bytes(), rng)
    return replace(unsigned, signature=sig)


def baseline_verify(
    ca_public_key: GroupElement, msg: BaselineMessage, now: int, freshness_window: int
) -> BaselineVerdict:
    """依次检查证书签名、证书有效期、消息时间戳、消息签名"""
    curve = ca_public_key.curve
    cert = msg.certificate
    if not schnorr_verify(curve, ca_public_key, cert.tbs_bytes(), cert.signature):
        return BaselineVerdict(False, BaselineRejectReason.CERT_SIGNATURE)
    if not cert.not_before <= now <= cert.not_after:
        return BaselineVerdict(False, BaselineRejectReason.EXPIRED)
    if abs(now - msg.t) > freshness_window:
        return BaselineVerdict(False, BaselineRejectReason.STALE)
    if not schnorr_verify(curve, cert.subject_public_key, msg.signed_bytes(), msg.signature):
        return BaselineVerdict(False, BaselineRejectReason.SIGNATURE)
    return BaselineVerdict(True)


def baseline_verify_wire(
    ca_public_key: GroupElement, data: bytes, now: int, freshness_window: int
) -> Tuple[BaselineVerdict, Optional[BaselineMessage]]:
    try:
        msg = BaselineMessage.from_wire(ca_public_key.curve, data)
    except (DecodeError, ValueError) as e:
        logger.debug(f"基线消息解码失败: {e}")
        return BaselineVerdict(False, BaselineRejectReason.MALFORMED), None
    return baseline_verify(ca_public_key, msg, now, freshness_window), msg
