"""
素数阶椭圆曲线群运算

提供点加、标量乘、规范编码以及带域分离标签的哈希函数。
对外接口全部使用仿射坐标；标量乘在内部使用雅可比坐标以减少模逆次数，
结果仍转换回仿射坐标。
"""
import logging
import random
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from cryptography.hazmat.primitives import hashes

from app.exceptions import ContextMismatchError, CurveError, DecodeError

# 设置日志
logger = logging.getLogger(__name__)

# 标量始终是 [0, q) 内的整数
Scalar = int

# 哈希输出长度（字节）
DIGEST_SIZE = 32

# 比特串 {0,1}^n 的长度
BITSTRING_BITS = 128
BITSTRING_SIZE = BITSTRING_BITS // 8

# 域分离标签
TAG_H0 = b"H0:"
TAG_H1 = b"H1:"
TAG_H2 = b"H2:"
TAG_H3 = b"H3:"

# 编码标志字节
_IDENTITY_FLAG = 0x00
_UNCOMPRESSED_FLAG = 0x04

# 雅可比坐标下的无穷远点
_JACOBIAN_INFINITY = (1, 1, 0)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin 素性检测（固定前若干个素数作为基）"""
    if n < 2:
        return False
    small_primes = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)
    for prime in small_primes:
        if n % prime == 0:
            return n == prime
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for base in small_primes:
        x = pow(base, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class CurveSpec:
    """短Weierstrass曲线 y^2 = x^3 + ax + b (mod p)，生成元阶为 q"""

    name: str
    p: int
    a: int
    b: int
    gx: int
    gy: int
    q: int
    cofactor: int = 1

    @property
    def coordinate_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    def element_size(self) -> int:
        """非无穷远点的编码长度"""
        return 1 + 2 * self.coordinate_size

    @cached_property
    def generator(self) -> "GroupElement":
        return GroupElement(self, self.gx, self.gy)

    @cached_property
    def identity(self) -> "GroupElement":
        return GroupElement(self, None, None)

    def contains(self, x: int, y: int) -> bool:
        """判断 (x, y) 是否满足曲线方程"""
        if not (0 <= x < self.p and 0 <= y < self.p):
            return False
        return (y * y - (x * x * x + self.a * x + self.b)) % self.p == 0

    def validate(self) -> None:
        """检查曲线参数，失败时抛出 CurveError"""
        if not is_probable_prime(self.p):
            raise CurveError(f"曲线 {self.name}: p 不是素数")
        # 非奇异条件 4a^3 + 27b^2 != 0 (mod p)
        if (4 * pow(self.a, 3, self.p) + 27 * pow(self.b, 2, self.p)) % self.p == 0:
            raise CurveError(f"曲线 {self.name} 是奇异曲线")
        if not self.contains(self.gx, self.gy):
            raise CurveError(f"曲线 {self.name}: 生成元不在曲线上")
        if not is_probable_prime(self.q):
            raise CurveError(f"曲线 {self.name}: q 不是素数")
        if self.cofactor < 1:
            raise CurveError(f"曲线 {self.name}: 余因子必须为正整数")
        # 标量乘会先对 q 取模，因此用 (q-1)P + P 检验阶
        if not point_add(scalar_mul(self.q - 1, self.generator), self.generator).is_identity:
            raise CurveError(f"曲线 {self.name}: q*P 不是单位元")


@dataclass(frozen=True)
class GroupElement:
    """群元素；x 和 y 同为 None 时表示单位元（无穷远点）"""

    curve: CurveSpec
    x: Optional[int]
    y: Optional[int]

    def __post_init__(self):
        if (self.x is None) != (self.y is None):
            raise DecodeError("群元素坐标不完整")
        if self.x is not None and not self.curve.contains(self.x, self.y):
            raise DecodeError(f"点 ({self.x}, {self.y}) 不在曲线 {self.curve.name} 上")

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def __add__(self, other: "GroupElement") -> "GroupElement":
        return point_add(self, other)

    def __neg__(self) -> "GroupElement":
        if self.is_identity:
            return self
        return GroupElement(self.curve, self.x, (-self.y) % self.curve.p)

    def __sub__(self, other: "GroupElement") -> "GroupElement":
        return point_add(self, -other)

    def __rmul__(self, k: int) -> "GroupElement":
        return scalar_mul(k, self)

    def encode(self) -> bytes:
        return encode_element(self)

    def __repr__(self) -> str:
        if self.is_identity:
            return f"GroupElement({self.curve.name}, identity)"
        return f"GroupElement({self.curve.name}, x={self.x:#x}, y={self.y:#x})"


def _check_context(lhs: GroupElement, rhs: GroupElement) -> None:
    if lhs.curve is not rhs.curve and lhs.curve != rhs.curve:
        raise ContextMismatchError(f"曲线不一致: {lhs.curve.name} 与 {rhs.curve.name}")


def point_add(lhs: GroupElement, rhs: GroupElement) -> GroupElement:
    """仿射坐标下的群加法"""
    _check_context(lhs, rhs)
    if lhs.is_identity:
        return rhs
    if rhs.is_identity:
        return lhs
    curve = lhs.curve
    p = curve.p
    if lhs.x == rhs.x:
        if (lhs.y + rhs.y) % p == 0:
            return curve.identity
        slope = (3 * lhs.x * lhs.x + curve.a) * pow(2 * lhs.y, -1, p) % p
    else:
        slope = (rhs.y - lhs.y) * pow(rhs.x - lhs.x, -1, p) % p
    x3 = (slope * slope - lhs.x - rhs.x) % p
    y3 = (slope * (lhs.x - x3) - lhs.y) % p
    return GroupElement(curve, x3, y3)


def _jacobian_double(curve: CurveSpec, pt: Tuple[int, int, int]) -> Tuple[int, int, int]:
    x, y, z = pt
    if z == 0 or y == 0:
        return _JACOBIAN_INFINITY
    p = curve.p
    yy = y * y % p
    s = 4 * x * yy % p
    m = 3 * x * x
    if curve.a:
        m += curve.a * pow(z, 4, p)
    m %= p
    x3 = (m * m - 2 * s) % p
    y3 = (m * (s - x3) - 8 * yy * yy) % p
    z3 = 2 * y * z % p
    return x3, y3, z3


def _jacobian_add(curve: CurveSpec, lhs: Tuple[int, int, int], rhs: Tuple[int, int, int]) -> Tuple[int, int, int]:
    x1, y1, z1 = lhs
    x2, y2, z2 = rhs
    if z1 == 0:
        return rhs
    if z2 == 0:
        return lhs
    p = curve.p
    z1z1 = z1 * z1 % p
    z2z2 = z2 * z2 % p
    u1 = x1 * z2z2 % p
    u2 = x2 * z1z1 % p
    s1 = y1 * z2 * z2z2 % p
    s2 = y2 * z1 * z1z1 % p
    if u1 == u2:
        if s1 != s2:
            return _JACOBIAN_INFINITY
        return _jacobian_double(curve, lhs)
    h = (u2 - u1) % p
    r = (s2 - s1) % p
    hh = h * h % p
    hhh = h * hh % p
    v = u1 * hh % p
    x3 = (r * r - hhh - 2 * v) % p
    y3 = (r * (v - x3) - s1 * hhh) % p
    z3 = h * z1 * z2 % p
    return x3, y3, z3


def _to_affine(curve: CurveSpec, pt: Tuple[int, int, int]) -> GroupElement:
    x, y, z = pt
    if z == 0:
        return curve.identity
    p = curve.p
    z_inv = pow(z, -1, p)
    z_inv2 = z_inv * z_inv % p
    return GroupElement(curve, x * z_inv2 % p, y * z_inv2 * z_inv % p)


def multi_scalar_mul(terms: Sequence[Tuple[int, GroupElement]]) -> GroupElement:
    """计算 sum(k_i * P_i)，各项共享倍点运算（交错的 Shamir 技巧）"""
    if not terms:
        raise ValueError("至少需要一项")
    curve = terms[0][1].curve
    prepared = []
    for k, pt in terms:
        _check_context(terms[0][1], pt)
        k %= curve.q
        if k == 0 or pt.is_identity:
            continue
        prepared.append((k, (pt.x, pt.y, 1)))
    if not prepared:
        return curve.identity
    acc = _JACOBIAN_INFINITY
    for bit in range(max(k.bit_length() for k, _ in prepared) - 1, -1, -1):
        acc = _jacobian_double(curve, acc)
        for k, jac in prepared:
            if (k >> bit) & 1:
                acc = _jacobian_add(curve, acc, jac)
    return _to_affine(curve, acc)


def scalar_mul(k: int, pt: GroupElement) -> GroupElement:
    """标量乘 k*pt；0*pt 与 q*pt 均为单位元"""
    return multi_scalar_mul([(k, pt)])


def random_scalar(curve: CurveSpec, rng: random.Random) -> Scalar:
    """从 Z_q^* 中均匀抽取，永不为0"""
    return rng.randrange(1, curve.q)


def digest(tag: bytes, material: bytes) -> bytes:
    """SHA-256(tag || material)"""
    h = hashes.Hash(hashes.SHA256())
    h.update(tag)
    h.update(material)
    return h.finalize()


def frame(*fields: bytes) -> bytes:
    """每个字段前置4字节大端长度后拼接"""
    return b"".join(len(field).to_bytes(4, "big") + field for field in fields)


def unframe(data: bytes, count: int) -> List[bytes]:
    """frame 的逆操作，要求恰好 count 个字段且无多余字节"""
    fields = []
    offset = 0
    for _ in range(count):
        if offset + 4 > len(data):
            raise DecodeError("长度前缀被截断")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise DecodeError("字段内容被截断")
        fields.append(data[offset:offset + length])
        offset += length
    if offset != len(data):
        raise DecodeError("编码末尾存在多余字节")
    return fields


def hash_to_scalar(curve: CurveSpec, domain_tag: bytes, material: bytes) -> Scalar:
    """哈希到 Z_q^*：摘要模 q，结果为0时映射为1"""
    value = int.from_bytes(digest(domain_tag, material), "big") % curve.q
    return value or 1


def hash_to_bits(domain_tag: bytes, material: bytes) -> bytes:
    """哈希到 {0,1}^128（取摘要前16字节）"""
    return digest(domain_tag, material)[:BITSTRING_SIZE]


def xor_bits(lhs: bytes, rhs: bytes) -> bytes:
    if len(lhs) != len(rhs):
        raise ValueError("比特串长度不一致")
    return bytes(a ^ b for a, b in zip(lhs, rhs))


def encode_element(pt: GroupElement) -> bytes:
    """规范编码：单位元为单个0字节，其余为 0x04 || x || y（定长大端）"""
    if pt.is_identity:
        return bytes([_IDENTITY_FLAG])
    size = pt.curve.coordinate_size
    return bytes([_UNCOMPRESSED_FLAG]) + pt.x.to_bytes(size, "big") + pt.y.to_bytes(size, "big")


def decode_element(curve: CurveSpec, data: bytes) -> GroupElement:
    """解码群元素；任何不在曲线上的输入都会被拒绝"""
    if data == bytes([_IDENTITY_FLAG]):
        return curve.identity
    size = curve.coordinate_size
    if len(data) != 1 + 2 * size or data[0] != _UNCOMPRESSED_FLAG:
        raise DecodeError(f"群元素编码长度或标志错误 (len={len(data)})")
    x = int.from_bytes(data[1:1 + size], "big")
    y = int.from_bytes(data[1 + size:], "big")
    if not curve.contains(x, y):
        raise DecodeError("解码的点不在曲线上")
    pt = GroupElement(curve, x, y)
    if curve.cofactor != 1 and not point_add(scalar_mul(curve.q - 1, pt), pt).is_identity:
        raise DecodeError("解码的点不在素数阶子群中")
    return pt


def encode_scalar(curve: CurveSpec, k: Scalar) -> bytes:
    return (k % curve.q).to_bytes(curve.scalar_size, "big")


def decode_scalar(curve: CurveSpec, data: bytes) -> Scalar:
    if len(data) != curve.scalar_size:
        raise DecodeError(f"标量编码长度错误 (len={len(data)})")
    value = int.from_bytes(data, "big")
    if value >= curve.q:
        raise DecodeError("标量未约减到 [0, q)")
    return value


def encode_timestamp(t: int) -> bytes:
    """时间戳编码为8字节大端无符号整数"""
    if not 0 <= t < 1 << 64:
        raise ValueError(f"时间戳越界: {t}")
    return t.to_bytes(8, "big")


# 测试用小曲线：y^2 = x^3 + 2x + 2 over F_17，生成元 (5, 1)，阶 19
TOY_CURVE = CurveSpec(name="toy", p=17, a=2, b=2, gx=5, gy=1, q=19)

# 生产曲线 secp256k1
SECP256K1 = CurveSpec(
    name="prod",
    p=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F,
    a=0,
    b=7,
    gx=0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    gy=0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
    q=0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141,
)

CURVES = {TOY_CURVE.name: TOY_CURVE, SECP256K1.name: SECP256K1}


def get_curve(name: str) -> CurveSpec:
    """按名称取内置曲线；不是内置名称时当作曲线参数文件路径"""
    if name in CURVES:
        return CURVES[name]
    if Path(name).is_file():
        return load_curve_file(name)
    raise CurveError(f"未知曲线: {name}（可选: {', '.join(CURVES)}，或曲线参数文件路径）")


def parse_curve_spec(lines: Iterable[str], name: str = "custom") -> CurveSpec:
    """解析曲线参数文本：p, a, b, Px, Py, q 各占一行（十进制）"""
    values = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            values.append(int(line, 10))
        except ValueError:
            raise CurveError(f"曲线参数不是十进制整数: {line!r}") from None
    if len(values) != 6:
        raise CurveError(f"曲线参数文件需要6个字段，实际 {len(values)} 个")
    p, a, b, gx, gy, q = values
    curve = CurveSpec(name=name, p=p, a=a % p, b=b % p, gx=gx, gy=gy, q=q)
    curve.validate()
    return curve


def load_curve_file(path: Union[str, Path]) -> CurveSpec:
    path = Path(path)
    logger.info(f"从文件加载曲线参数: {path}")
    with path.open("r", encoding="utf-8") as handle:
        return parse_curve_spec(handle, name=path.stem)
