import random
from dataclasses import replace

import pytest

from app.crypto import baseline
from app.crypto.baseline import BaselineMessage, BaselineRejectReason, CertificateAuthority, Certificate
from app.crypto.group_core import SECP256K1, TOY_CURVE, scalar_mul

WINDOW = 300


@pytest.fixture
def ca():
    return CertificateAuthority(SECP256K1, random.Random(1))


@pytest.fixture
def holder(ca):
    return baseline.baseline_enroll(ca, "user-01", random.Random(2), now=0, validity=10_000)


def test_honest_message_accepted(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(3))
    verdict = baseline.baseline_verify(ca.public_key, msg, 100, WINDOW)
    assert verdict.accepted and verdict.reason is None


def test_wire_round_trip(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(3))
    decoded = BaselineMessage.from_wire(SECP256K1, msg.to_wire())
    assert decoded == msg
    verdict, _ = baseline.baseline_verify_wire(ca.public_key, msg.to_wire(), 100, WINDOW)
    assert verdict.accepted


def test_expired_certificate(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 10_001, random.Random(3))
    assert baseline.baseline_verify(ca.public_key, msg, 10_001, WINDOW).reason == BaselineRejectReason.EXPIRED


def test_stale_message(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(3))
    assert baseline.baseline_verify(ca.public_key, msg, 100 + WINDOW + 1, WINDOW).reason == BaselineRejectReason.STALE


def test_tampered_certificate_public_key(ca, holder):
    rng = random.Random(4)
    intruder = scalar_mul(12345, SECP256K1.generator)
    msg = baseline.baseline_sign(holder, b"update", 100, rng)
    forged = replace(msg, certificate=replace(msg.certificate, subject_public_key=intruder))
    assert baseline.baseline_verify(ca.public_key, forged, 100, WINDOW).reason == BaselineRejectReason.CERT_SIGNATURE


def test_certificate_field_tampering_rejected(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(5))
    cert = msg.certificate
    tampered = [
        replace(cert, subject="user-02"),
        replace(cert, not_after=cert.not_after + 1),
        replace(cert, serial=bytes(len(cert.serial))),
        replace(cert, subject_key_id=bytes(len(cert.subject_key_id))),
        replace(cert, signature=replace(cert.signature, s=(cert.signature.s + 1) % SECP256K1.q)),
    ]
    for forged in tampered:
        decoded = Certificate.from_wire(SECP256K1, forged.to_wire())
        verdict = baseline.baseline_verify(ca.public_key, replace(msg, certificate=decoded), 100, WINDOW)
        assert verdict.reason == BaselineRejectReason.CERT_SIGNATURE


def test_message_signature_checked(ca, holder):
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(3))
    forged = replace(msg, m=b"poisoned")
    assert baseline.baseline_verify(ca.public_key, forged, 100, WINDOW).reason == BaselineRejectReason.SIGNATURE


def test_foreign_ca_rejected(holder):
    other = CertificateAuthority(SECP256K1, random.Random(99))
    msg = baseline.baseline_sign(holder, b"update", 100, random.Random(3))
    assert baseline.baseline_verify(other.public_key, msg, 100, WINDOW).reason == BaselineRejectReason.CERT_SIGNATURE


def test_malformed_wire(ca):
    verdict, msg = baseline.baseline_verify_wire(ca.public_key, b"\x00\x00", 100, WINDOW)
    assert verdict.reason == BaselineRejectReason.MALFORMED and msg is None


def test_operation_counts():
    assert baseline.SIGN_OPS_PER_MESSAGE == 1
    assert baseline.VERIFY_OPS_PER_MESSAGE == 2


def test_toy_curve_baseline():
    ca = CertificateAuthority(TOY_CURVE, random.Random(1))
    holder = baseline.baseline_enroll(ca, "user-01", random.Random(2), now=0, validity=100)
    msg = baseline.baseline_sign(holder, b"m", 10, random.Random(3))
    assert baseline.baseline_verify(ca.public_key, msg, 10, WINDOW).accepted
