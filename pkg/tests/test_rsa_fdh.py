"""Signature primitive: hash expansion, key generation, sign/verify, key files."""

from __future__ import annotations

import hashlib
import random

import pytest

from oblivion import rsa_fdh
from oblivion.encoding import WireFormatError
from oblivion.rsa_fdh import (
    ConfigurationError,
    FullDomainHash,
    MalformedSignatureError,
    SigningKey,
    VerificationKey,
    count_modexps,
    decode_key_file,
    encode_key_file,
    init,
    keygen,
    keygen_with_factors,
    keypair_from_primes,
    load_signing_key,
    load_verification_key,
    save_key,
    sign,
    verify,
)

# Golden value frozen from an independent bitstring-prefix implementation of
# the hash expansion (see _fdh_oracle below), computed once.
FDH_GOLDEN_A_3233 = 1135
FDH_GOLDEN_A_LARGE = int(
    "74323975713188104062512397376673113227046341217524367176732348660700"
    "99137766029046378675376055639320815341564440960938531989502401448913"
    "720944968844863359"
)
LARGE_MODULUS = (1 << 512) + 9

# Frozen from a plain repeated-multiplication oracle: 123^2753 mod 3233.
TOY_MODPOW_GOLDEN = 2746


def _fdh_oracle(message: bytes, modulus: int) -> int:
    """Independent reimplementation: counter-mode SHA-256 as a bitstring,
    first bitlen(N)-1 bits."""
    k = modulus.bit_length() - 1
    bits = ""
    counter = 0
    while len(bits) < k:
        block = hashlib.sha256(message + counter.to_bytes(4, "big")).digest()
        bits += "".join(f"{byte:08b}" for byte in block)
        counter += 1
    return int(bits[:k], 2)


def _modpow_oracle(base: int, exponent: int, modulus: int) -> int:
    """Schoolbook square-and-multiply, independent of pow/gmpy2."""
    result = 1
    base %= modulus
    while exponent:
        if exponent & 1:
            result = result * base % modulus
        base = base * base % modulus
        exponent >>= 1
    return result


# ---------------------------------------------------------------------------
# Full-domain hash
# ---------------------------------------------------------------------------

def test_fdh_deterministic():
    fdh = init(128)
    assert fdh.digest(b"a", 3233) == fdh.digest(b"a", 3233)
    assert fdh.digest(b"payload", LARGE_MODULUS) == fdh.digest(b"payload", LARGE_MODULUS)


def test_fdh_range():
    fdh = init(128)
    rng = random.Random(0)
    for modulus in (3233, 4757, LARGE_MODULUS):
        for _ in range(50):
            message = rng.randbytes(rng.randrange(0, 64))
            assert 0 <= fdh.digest(message, modulus) < modulus


def test_fdh_golden_vectors():
    fdh = init(128)
    assert fdh.digest(b"a", 3233) == FDH_GOLDEN_A_3233
    assert fdh.digest(b"a", LARGE_MODULUS) == FDH_GOLDEN_A_LARGE


def test_fdh_matches_independent_oracle():
    fdh = init(128)
    rng = random.Random(1)
    for modulus in (3233, 1 << 64, LARGE_MODULUS, (1 << 2048) + 297):
        for _ in range(20):
            message = rng.randbytes(rng.randrange(0, 200))
            assert fdh.digest(message, modulus) == _fdh_oracle(message, modulus)


def test_init_rejects_bad_security_levels():
    with pytest.raises(ConfigurationError):
        init(127)
    with pytest.raises(ConfigurationError):
        init(64)
    with pytest.raises(ConfigurationError):
        init(384)
    assert isinstance(init(128), FullDomainHash)
    assert isinstance(init(256), FullDomainHash)


# ---------------------------------------------------------------------------
# Key generation
# ---------------------------------------------------------------------------

def test_toy_keypair_hand_check():
    sk, vk = keypair_from_primes(61, 53, 17)
    assert (vk.e, vk.modulus) == (17, 3233)
    assert sk.d == 2753
    assert 17 * 2753 % ((61 - 1) * (53 - 1)) == 1


def test_keygen_consistency_with_retained_factors():
    sk, vk, p, q = keygen_with_factors(512, rng=random.Random(7))
    assert p != q
    assert p * q == vk.modulus == sk.modulus
    assert vk.modulus.bit_length() == 512
    phi = (p - 1) * (q - 1)
    assert vk.e * sk.d % phi == 1
    assert sk.vk == vk


def test_keygen_distinct_moduli():
    sk1, _ = keygen(512)
    sk2, _ = keygen(512)
    assert sk1.modulus != sk2.modulus


def test_keygen_unsupported_bits():
    with pytest.raises(ConfigurationError):
        keygen(768)
    with pytest.raises(ConfigurationError):
        keygen(256)


def test_keygen_random_exponent():
    sk, vk, p, q = keygen_with_factors(
        512, public_exponent=rsa_fdh.RANDOM_EXPONENT, rng=random.Random(3)
    )
    phi = (p - 1) * (q - 1)
    assert vk.e % 2 == 1 and 3 <= vk.e < phi
    assert vk.e * sk.d % phi == 1
    assert vk.e != 65537


def test_keypair_from_primes_validation():
    with pytest.raises(ConfigurationError):
        keypair_from_primes(61, 61, 17)  # equal primes
    with pytest.raises(ConfigurationError):
        keypair_from_primes(60, 53, 17)  # not prime
    with pytest.raises(ConfigurationError):
        keypair_from_primes(61, 53, 15)  # gcd(15, 3120) != 1


# ---------------------------------------------------------------------------
# Sign / verify
# ---------------------------------------------------------------------------

def test_sign_matches_modpow_oracle(toy_keys):
    assert _modpow_oracle(123, 2753, 3233) == TOY_MODPOW_GOLDEN
    sk, vk = toy_keys[0]
    fdh = rsa_fdh.DEFAULT_FDH
    rng = random.Random(2)
    for _ in range(25):
        message = rng.randbytes(rng.randrange(0, 40))
        digest = fdh.digest(message, sk.modulus)
        assert sign(sk, message) == _modpow_oracle(digest, sk.d, sk.modulus)


def test_sign_verify_roundtrip(toy_keys, keys_512):
    rng = random.Random(3)
    for sk, vk in [*toy_keys, keys_512]:
        for _ in range(20):
            message = rng.randbytes(rng.randrange(0, 100))
            assert verify(vk, sign(sk, message), message)


def test_sign_deterministic(keys_512):
    sk, _ = keys_512
    assert sign(sk, b"same message") == sign(sk, b"same message")


def test_bit_flip_rejects(keys_512):
    sk, vk = keys_512
    signature = sign(sk, b"msg")
    mutated = signature ^ 1
    if mutated >= vk.modulus:
        mutated = signature ^ 2
    assert not verify(vk, mutated, b"msg")
    assert not verify(vk, signature, b"other msg")


def test_cross_key_rejects_exhaustively(toy_keys):
    """A signature under key A must never verify under key B."""
    message = b"cross key check"
    for i, (sk_a, _) in enumerate(toy_keys):
        signature = sign(sk_a, message)
        for j, (_, vk_b) in enumerate(toy_keys):
            if i == j:
                continue
            try:
                assert not verify(vk_b, signature, message)
            except MalformedSignatureError:
                pass  # signature exceeds the other modulus: also a rejection


def test_malformed_signature_distinct_from_failure(keys_512):
    _, vk = keys_512
    with pytest.raises(MalformedSignatureError):
        verify(vk, vk.modulus, b"m")
    with pytest.raises(MalformedSignatureError):
        verify(vk, -1, b"m")


def test_exponentiation_accounting(keys_512):
    sk, vk = keys_512
    signature = sign(sk, b"count me")
    with count_modexps() as verifying:
        assert verify(vk, signature, b"count me")
    assert verifying.count == 1
    with count_modexps() as signing:
        sign(sk, b"count me")
    assert signing.count == 1
    with count_modexps() as outer:
        with count_modexps() as inner:
            verify(vk, signature, b"count me")
        assert inner.count == 1
    assert outer.count == 0


def test_signature_range_invariant(toy_keys):
    rng = random.Random(4)
    for sk, vk in toy_keys:
        for _ in range(30):
            message = rng.randbytes(8)
            assert 0 <= sign(sk, message) < sk.modulus


def test_correctness_thousand_messages_per_key_size():
    """Sign-then-verify accepts for 1000 random messages at every supported
    key size."""
    for bits in sorted(rsa_fdh.SUPPORTED_KEY_BITS):
        rng = random.Random(bits)
        sk, vk = keygen(bits, rng=rng)
        for _ in range(1000):
            message = rng.randbytes(rng.randrange(0, 256))
            assert verify(vk, sign(sk, message), message), bits


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

def test_key_file_golden_layout(toy_keys):
    _, vk = toy_keys[0]
    encoded = encode_key_file(vk)
    # magic, version 0x01, role 0x02, then length-prefixed modulus and exponent
    expected = (
        b"OBLV-KEY" + bytes((0x01, 0x02))
        + (2).to_bytes(4, "big") + (3233).to_bytes(2, "big")
        + (1).to_bytes(4, "big") + (17).to_bytes(1, "big")
    )
    assert encoded == expected


def test_key_file_roundtrip(tmp_path, keys_512):
    sk, vk = keys_512
    save_key(sk, tmp_path / "sk.key")
    save_key(vk, tmp_path / "vk.key")
    loaded_sk = load_signing_key(tmp_path / "sk.key")
    loaded_vk = load_verification_key(tmp_path / "vk.key")
    assert (loaded_sk.d, loaded_sk.modulus) == (sk.d, sk.modulus)
    assert loaded_vk == vk
    assert loaded_sk.vk is None  # the public half is not in the signing file


def test_key_file_role_and_corruption_errors(tmp_path, keys_512):
    sk, vk = keys_512
    save_key(vk, tmp_path / "vk.key")
    with pytest.raises(WireFormatError):
        load_signing_key(tmp_path / "vk.key")
    data = encode_key_file(vk)
    with pytest.raises(WireFormatError):
        decode_key_file(data[:-1])
    with pytest.raises(WireFormatError):
        decode_key_file(data + b"\x00")
    with pytest.raises(WireFormatError):
        decode_key_file(b"NOT-A-KEY" + data)


def test_signing_key_rejects_mismatched_pair(keys_512, user_keys_512):
    sk, _ = keys_512
    _, other_vk = user_keys_512
    with pytest.raises(ConfigurationError):
        SigningKey(d=sk.d, modulus=sk.modulus, bits=sk.bits, vk=other_vk)
    with pytest.raises(ConfigurationError):
        VerificationKey(e=4, modulus=3233)
