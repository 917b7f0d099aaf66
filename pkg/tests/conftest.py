"""
共享测试夹具
"""
import random
from dataclasses import dataclass
from pathlib import Path

import pytest

from app.crypto import clpa
from app.crypto.clpa import FullKeyPair, KgcState, Pseudonym, RealIdentity, SystemParams, TraState
from app.crypto.group_core import SECP256K1, TOY_CURVE, GroupElement

DATA_DIR = Path(__file__).parent / "data"


def naive_add(p, a, lhs, rhs):
    """教科书仿射加法，作为独立的群运算参照"""
    if lhs is None:
        return rhs
    if rhs is None:
        return lhs
    (x1, y1), (x2, y2) = lhs, rhs
    if x1 == x2 and (y1 + y2) % p == 0:
        return None
    if lhs == rhs:
        slope = (3 * x1 * x1 + a) * pow(2 * y1, -1, p) % p
    else:
        slope = (y2 - y1) * pow(x2 - x1, -1, p) % p
    x3 = (slope * slope - x1 - x2) % p
    return x3, (slope * (x1 - x3) - y1) % p


def toy_multiples():
    """k*G (k = 0..18) 的暴力计算"""
    c = TOY_CURVE
    multiples = [None]
    for _ in range(c.q - 1):
        multiples.append(naive_add(c.p, c.a, multiples[-1], (c.gx, c.gy)))
    return multiples


def as_tuple(pt: GroupElement):
    return None if pt.is_identity else (pt.x, pt.y)


def toy_log(pt: GroupElement) -> int:
    """玩具曲线上的离散对数（查表）"""
    return toy_multiples().index(as_tuple(pt))


@dataclass
class ProtocolContext:
    params: SystemParams
    tra: TraState
    kgc: KgcState
    rid: RealIdentity
    aid: Pseudonym
    keypair: FullKeyPair
    rng: random.Random


def make_context(curve, seed: int = 7, now: int = 1000) -> ProtocolContext:
    rng = random.Random(seed)
    params, tra, kgc = clpa.setup(curve, rng)
    rid = RealIdentity.from_name("user-01")
    tra.register([rid, RealIdentity.from_name("user-02"), RealIdentity.from_name("cs")])
    _, aid1 = clpa.request_pseudonym(params, rng)
    aid = clpa.issue_pseudonym(tra, rid, aid1, now)
    psk = clpa.issue_psk(kgc, params, aid, rng)
    keypair = clpa.extract_usk(params, aid, psk, rng)
    return ProtocolContext(params, tra, kgc, rid, aid, keypair, rng)


@pytest.fixture
def toy_curve():
    return TOY_CURVE


@pytest.fixture
def prod_curve():
    return SECP256K1


@pytest.fixture
def rng():
    return random.Random(20240601)


@pytest.fixture
def prod_context():
    return make_context(SECP256K1)


@pytest.fixture
def toy_context():
    return make_context(TOY_CURVE)


@pytest.fixture
def data_dir():
    return DATA_DIR
