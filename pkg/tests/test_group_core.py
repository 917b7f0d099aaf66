import random

import pytest

from app.crypto.group_core import (
    SECP256K1,
    TOY_CURVE,
    TAG_H1,
    TAG_H2,
    CurveSpec,
    GroupElement,
    decode_element,
    decode_scalar,
    encode_element,
    encode_scalar,
    encode_timestamp,
    frame,
    get_curve,
    load_curve_file,
    hash_to_bits,
    hash_to_scalar,
    multi_scalar_mul,
    parse_curve_spec,
    point_add,
    random_scalar,
    scalar_mul,
    unframe,
    xor_bits,
)
from app.exceptions import ContextMismatchError, CurveError, DecodeError
from tests.conftest import as_tuple, naive_add, toy_multiples


def test_toy_curve_has_nineteen_points():
    c = TOY_CURVE
    affine = {(x, y) for x in range(c.p) for y in range(c.p) if c.contains(x, y)}
    assert len(affine) + 1 == 19
    assert {m for m in toy_multiples() if m is not None} == affine


@pytest.mark.parametrize("k", range(0, 40))
def test_toy_scalar_mul_matches_oracle(k):
    expected = toy_multiples()[k % 19]
    assert as_tuple(scalar_mul(k, TOY_CURVE.generator)) == expected


def test_toy_addition_table_matches_oracle():
    c = TOY_CURVE
    multiples = toy_multiples()
    for i in range(19):
        for j in range(19):
            lhs = scalar_mul(i, c.generator)
            rhs = scalar_mul(j, c.generator)
            assert as_tuple(point_add(lhs, rhs)) == naive_add(c.p, c.a, multiples[i], multiples[j])


def test_group_laws(rng):
    for curve in (TOY_CURVE, SECP256K1):
        G = curve.generator
        for _ in range(5):
            a, b = random_scalar(curve, rng), random_scalar(curve, rng)
            A, B = a * G, b * G
            assert A + B == B + A
            assert (A + B) + G == A + (B + G)
            assert A + curve.identity == A
            assert A + (-A) == curve.identity
            assert (a + b) * G == A + B
            assert scalar_mul(a, B) == scalar_mul(b, A)


def test_order_of_generator():
    for curve in (TOY_CURVE, SECP256K1):
        assert scalar_mul(curve.q, curve.generator).is_identity
        assert point_add(scalar_mul(curve.q - 1, curve.generator), curve.generator).is_identity
        assert not scalar_mul(curve.q - 1, curve.generator).is_identity


def test_multi_scalar_mul_matches_sum(rng):
    curve = SECP256K1
    terms = [(random_scalar(curve, rng), random_scalar(curve, rng) * curve.generator) for _ in range(4)]
    expected = curve.identity
    for k, pt in terms:
        expected = expected + scalar_mul(k, pt)
    assert multi_scalar_mul(terms) == expected
    assert multi_scalar_mul([(0, curve.generator)]).is_identity


def test_context_mismatch():
    with pytest.raises(ContextMismatchError):
        point_add(TOY_CURVE.generator, SECP256K1.generator)


def test_validate_rejects_bad_curves():
    TOY_CURVE.validate()
    SECP256K1.validate()
    with pytest.raises(CurveError):
        CurveSpec(name="singular", p=17, a=0, b=0, gx=0, gy=0, q=19).validate()
    with pytest.raises(CurveError):
        CurveSpec(name="off-curve", p=17, a=2, b=2, gx=5, gy=2, q=19).validate()
    with pytest.raises(CurveError):
        CurveSpec(name="wrong-order", p=17, a=2, b=2, gx=5, gy=1, q=17).validate()
    with pytest.raises(CurveError):
        get_curve("p521")


def test_parse_curve_spec():
    curve = parse_curve_spec(["# toy", "17", "2", "2", "", "5", "1", "19  # order"], name="toy2")
    assert curve.q == 19 and curve.generator == GroupElement(curve, 5, 1)
    with pytest.raises(CurveError):
        parse_curve_spec(["17", "2", "2"])


def test_element_encoding():
    curve = SECP256K1
    G = curve.generator
    encoded = encode_element(G)
    assert len(encoded) == 65 and encoded[0] == 0x04
    assert decode_element(curve, encoded) == G
    assert encode_element(curve.identity) == b"\x00"
    assert decode_element(curve, b"\x00").is_identity
    assert encode_element(TOY_CURVE.generator) == bytes([4, 5, 1])


def test_decode_rejects_off_curve_points():
    with pytest.raises(DecodeError):
        decode_element(TOY_CURVE, bytes([4, 5, 2]))
    with pytest.raises(DecodeError):
        decode_element(TOY_CURVE, bytes([2, 5, 1]))
    with pytest.raises(DecodeError):
        decode_element(SECP256K1, encode_element(SECP256K1.generator)[:-1])


def test_scalar_encoding():
    assert encode_scalar(SECP256K1, 1) == bytes(31) + b"\x01"
    assert decode_scalar(SECP256K1, encode_scalar(SECP256K1, 12345)) == 12345
    with pytest.raises(DecodeError):
        decode_scalar(TOY_CURVE, bytes([19]))
    with pytest.raises(DecodeError):
        decode_scalar(SECP256K1, b"\x01")


def test_timestamp_encoding():
    assert encode_timestamp(1) == bytes(7) + b"\x01"
    with pytest.raises(ValueError):
        encode_timestamp(-1)


def test_frame_is_unambiguous():
    assert frame(b"ab", b"c") != frame(b"a", b"bc")
    assert frame(b"ab") == b"\x00\x00\x00\x02ab"
    assert unframe(frame(b"x", b"", b"yz"), 3) == [b"x", b"", b"yz"]
    with pytest.raises(DecodeError):
        unframe(frame(b"x") + b"\x00", 1)
    with pytest.raises(DecodeError):
        unframe(b"\x00\x00\x00\x05ab", 1)


def test_hash_domain_separation():
    material = frame(b"same input")
    assert hash_to_scalar(SECP256K1, b"H1:", material) != hash_to_scalar(SECP256K1, b"H2:", material)
    assert hash_to_bits(b"H0:", material) != hash_to_bits(b"H1:", material)
    assert len(hash_to_bits(b"H0:", material)) == 16


def test_hash_to_scalar_never_zero():
    seen = {hash_to_scalar(TOY_CURVE, b"H1:", i.to_bytes(4, "big")) for i in range(2000)}
    assert 0 not in seen
    assert seen == set(range(1, 19))


def test_random_scalar_covers_toy_range():
    rng = random.Random(3)
    draws = {random_scalar(TOY_CURVE, rng) for _ in range(10_000)}
    assert draws == set(range(1, 19))


def test_xor_bits():
    a, b = bytes(range(16)), bytes([0xFF] * 16)
    assert xor_bits(xor_bits(a, b), b) == a
    with pytest.raises(ValueError):
        xor_bits(a, b[:8])


def test_load_curve_file(tmp_path):
    path = tmp_path / "toy17.curve"
    path.write_text("# y^2 = x^3 + 2x + 2 over F17\n17\n2\n2\n5\n1\n19\n", encoding="utf-8")
    curve = load_curve_file(path)
    assert curve.name == "toy17"
    assert (curve.p, curve.a, curve.b, curve.q) == (17, 2, 2, 19)
    assert scalar_mul(19, curve.generator).is_identity
    assert get_curve(str(path)).q == 19

    bad = tmp_path / "bad.curve"
    bad.write_text("17\n2\n2\n5\n2\n19\n", encoding="utf-8")
    with pytest.raises(CurveError):
        load_curve_file(bad)
    with pytest.raises(CurveError):
        get_curve(str(tmp_path / "absent.curve"))


def test_random_scalar_deterministic_per_seed():
    def draws(seed):
        rng = random.Random(seed)
        return [random_scalar(SECP256K1, rng) for _ in range(20)]

    assert draws(5) == draws(5)
    assert draws(5) != draws(6)


def test_h1_and_h2_differ_on_random_material():
    rng = random.Random(8)
    for _ in range(100):
        material = rng.getrandbits(8 * 48).to_bytes(48, "big")
        assert hash_to_scalar(SECP256K1, TAG_H1, material) != hash_to_scalar(SECP256K1, TAG_H2, material)
