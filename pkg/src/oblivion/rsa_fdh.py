"""RSA signatures over a full-domain hash.

Signing computes H(M)^d mod N and verification checks H(M) = sig^e mod N,
where H maps arbitrary byte strings into [0, N).  H expands SHA-256 in
counter mode -- H(M) is the integer formed by the first bitlen(N)-1 bits of
sha256(M || 0) || sha256(M || 1) || ... (4-byte big-endian counters) -- so
digests are always below the modulus without rejection sampling.

All operations are pure functions of their inputs; key generation takes a
caller-supplied randomness source.  Modular exponentiations performed by
sign / verify / batch verification can be counted per invocation via
:func:`count_modexps` (used to assert single-exponentiation claims without
relying on wall clocks).
"""

from __future__ import annotations

import hashlib
import math
import secrets
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

from .encoding import Reader, WireFormatError, pack_int

try:
    # Substantially faster big-integer arithmetic when available.
    from gmpy2 import mpz as _bigint, powmod as _powmod
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _powmod = pow
    _bigint = int

SUPPORTED_KEY_BITS = frozenset((512, 1024, 2048, 4096))

DEFAULT_PUBLIC_EXPONENT = 65537

#: Marker for :func:`keygen` requesting a uniformly random public exponent.
RANDOM_EXPONENT = "random"

_MILLER_RABIN_ROUNDS = 40  # error probability <= 4**-40 = 2**-80


class ConfigurationError(ValueError):
    """Unsupported parameter (key size, security level, exponent)."""


class MalformedSignatureError(ValueError):
    """Signature value outside [0, N); distinct from a failed verification."""


def _sieve(limit: int) -> list[int]:
    flags = bytearray([1]) * limit
    flags[0:2] = b"\x00\x00"
    for i in range(2, int(limit ** 0.5) + 1):
        if flags[i]:
            flags[i * i::i] = b"\x00" * len(flags[i * i::i])
    return [i for i, f in enumerate(flags) if f]


_SMALL_PRIMES = _sieve(2048)


# ---------------------------------------------------------------------------
# Exponentiation accounting
# ---------------------------------------------------------------------------

@dataclass
class ModExpCounter:
    """Counts modular exponentiations inside a :func:`count_modexps` scope."""

    count: int = 0


_ACTIVE_COUNTER: ContextVar[ModExpCounter | None] = ContextVar(
    "oblivion_modexp_counter", default=None
)


@contextmanager
def count_modexps() -> Iterator[ModExpCounter]:
    """Scope within which signature-related modular exponentiations are counted.

    Scoped to the current thread / context; concurrent verifications each see
    their own counter.
    """
    counter = ModExpCounter()
    token = _ACTIVE_COUNTER.set(counter)
    try:
        yield counter
    finally:
        _ACTIVE_COUNTER.reset(token)


def _modexp(base: int, exponent: int, modulus: int) -> int:
    counter = _ACTIVE_COUNTER.get()
    if counter is not None:
        counter.count += 1
    return int(_powmod(base, exponent, modulus))


# ---------------------------------------------------------------------------
# Key material
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerificationKey:
    """Public half of a key pair: exponent e and modulus N."""

    e: int
    modulus: int

    def __post_init__(self):
        if self.e < 3 or self.e % 2 == 0:
            raise ConfigurationError("public exponent must be odd and >= 3")
        if self.modulus <= self.e:
            raise ConfigurationError("modulus too small for exponent")


@dataclass(frozen=True)
class SigningKey:
    """Private half of a key pair.

    Carries the paired verification key when produced by key generation, so
    holders can publish it and derive key identifiers; keys loaded from a
    signing-key file have ``vk=None`` until the public half is attached.
    The prime factors are discarded after generation.
    """

    d: int
    modulus: int
    bits: int
    vk: VerificationKey | None = None

    def __post_init__(self):
        if not (0 < self.d < self.modulus):
            raise ConfigurationError("private exponent out of range")
        if self.vk is not None and self.vk.modulus != self.modulus:
            raise ConfigurationError("paired verification key has a different modulus")


Key = Union[SigningKey, VerificationKey]


def _is_probable_prime(n: int, rng) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(_MILLER_RABIN_ROUNDS):
        a = rng.randrange(2, n - 1)
        x = int(_powmod(a, d, n))
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng) -> int:
    # Top two bits set so the product of two such primes has full bit length.
    top = (1 << (bits - 1)) | (1 << (bits - 2))
    while True:
        candidate = rng.getrandbits(bits) | top | 1
        if _is_probable_prime(candidate, rng):
            return candidate


def keygen_with_factors(
    bits: int,
    *,
    public_exponent: int | str = DEFAULT_PUBLIC_EXPONENT,
    rng=None,
) -> tuple[SigningKey, VerificationKey, int, int]:
    """Like :func:`keygen` but also returns the prime factors (test use only)."""
    if bits not in SUPPORTED_KEY_BITS:
        raise ConfigurationError(
            f"unsupported key size {bits}; supported: {sorted(SUPPORTED_KEY_BITS)}"
        )
    if rng is None:
        rng = secrets.SystemRandom()
    half = bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(half, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        phi = (p - 1) * (q - 1)
        if public_exponent == RANDOM_EXPONENT:
            while True:
                e = rng.randrange(3, phi) | 1
                if math.gcd(e, phi) == 1:
                    break
        else:
            e = int(public_exponent)
            if math.gcd(e, phi) != 1:
                continue
        d = pow(e, -1, phi)
        vk = VerificationKey(e=e, modulus=n)
        return SigningKey(d=d, modulus=n, bits=bits, vk=vk), vk, p, q


def keygen(
    bits: int,
    *,
    public_exponent: int | str = DEFAULT_PUBLIC_EXPONENT,
    rng=None,
) -> tuple[SigningKey, VerificationKey]:
    """Generate an RSA key pair with a modulus of exactly ``bits`` bits.

    ``public_exponent`` defaults to 65537; pass :data:`RANDOM_EXPONENT` to draw
    a uniformly random exponent as some deployments do.  ``rng`` defaults to a
    system randomness source; pass a seeded ``random.Random`` for reproducible
    keys in tests.
    """
    sk, vk, _, _ = keygen_with_factors(bits, public_exponent=public_exponent, rng=rng)
    return sk, vk


def keypair_from_primes(p: int, q: int, e: int) -> tuple[SigningKey, VerificationKey]:
    """Build a key pair from explicit primes (toy keys, reproducible vectors).

    Any odd exponent coprime to (p-1)(q-1) is accepted, and the modulus may be
    arbitrarily small; intended for tests, not deployment.
    """
    import random

    check_rng = random.Random(0)
    if p == q:
        raise ConfigurationError("p and q must be distinct")
    for prime in (p, q):
        if prime < 3 or not _is_probable_prime(prime, check_rng):
            raise ConfigurationError(f"{prime} is not an odd prime")
    phi = (p - 1) * (q - 1)
    if math.gcd(e, phi) != 1:
        raise ConfigurationError("exponent not coprime to (p-1)(q-1)")
    n = p * q
    vk = VerificationKey(e=e, modulus=n)
    sk = SigningKey(d=pow(e, -1, phi), modulus=n, bits=n.bit_length(), vk=vk)
    return sk, vk


# ---------------------------------------------------------------------------
# Full-domain hash
# ---------------------------------------------------------------------------

class FullDomainHash:
    """Deterministic hash from byte strings onto [0, 2^(bitlen(N)-1)) < N."""

    def __init__(self, security_bits: int = 128):
        if security_bits < 128:
            raise ConfigurationError("security parameter below the 128-bit minimum")
        if security_bits > 256:
            raise ConfigurationError("digest family is fixed at 256 bits")
        self.security_bits = security_bits

    def digest(self, message: bytes, modulus: int) -> int:
        if modulus < 4:
            raise ValueError("modulus too small to hash into")
        out_bits = modulus.bit_length() - 1
        out_bytes = (out_bits + 7) // 8
        base = hashlib.sha256(message)
        blocks = []
        counter = 0
        while out_bytes > 32 * len(blocks):
            block = base.copy()
            block.update(counter.to_bytes(4, "big"))
            blocks.append(block.digest())
            counter += 1
        stream = b"".join(blocks)[:out_bytes]
        return int.from_bytes(stream, "big") >> (out_bytes * 8 - out_bits)

    __call__ = digest


DEFAULT_FDH = FullDomainHash()


def init(security_parameter: int = 128) -> FullDomainHash:
    """Initialize the scheme: returns the full-domain hash for the given level."""
    return FullDomainHash(security_parameter)


# ---------------------------------------------------------------------------
# Sign / verify
# ---------------------------------------------------------------------------

def sign(sk: SigningKey, message: bytes, *, fdh: FullDomainHash | None = None) -> int:
    """Deterministic signature H(M)^d mod N, an integer in [0, N)."""
    h = (fdh or DEFAULT_FDH).digest(message, sk.modulus)
    return _modexp(h, sk.d, sk.modulus)


def verify(
    vk: VerificationKey,
    signature: int,
    message: bytes,
    *,
    fdh: FullDomainHash | None = None,
) -> bool:
    """Accept iff sig^e mod N equals H(M).  Exactly one modular exponentiation.

    Raises :class:`MalformedSignatureError` for values outside [0, N), which a
    caller must not conflate with an ordinary failed verification.
    """
    if not 0 <= signature < vk.modulus:
        raise MalformedSignatureError("signature outside [0, N)")
    expected = (fdh or DEFAULT_FDH).digest(message, vk.modulus)
    return _modexp(signature, vk.e, vk.modulus) == expected


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

KEY_MAGIC = b"OBLV-KEY"
KEY_FORMAT_VERSION = 0x01
_ROLE_SIGNING = 0x01
_ROLE_VERIFICATION = 0x02


def encode_key_file(key: Key) -> bytes:
    """Serialize a key: magic, version, role byte, then modulus and exponent."""
    if isinstance(key, SigningKey):
        role, exponent = _ROLE_SIGNING, key.d
    else:
        role, exponent = _ROLE_VERIFICATION, key.e
    return (
        KEY_MAGIC
        + bytes((KEY_FORMAT_VERSION, role))
        + pack_int(key.modulus)
        + pack_int(exponent)
    )


def decode_key_file(data: bytes) -> Key:
    reader = Reader(data)
    reader.expect(KEY_MAGIC, "key file magic")
    if reader.u8() != KEY_FORMAT_VERSION:
        raise WireFormatError("unsupported key file version")
    role = reader.u8()
    modulus = reader.int_field()
    exponent = reader.int_field()
    reader.finish()
    if role == _ROLE_SIGNING:
        return SigningKey(d=exponent, modulus=modulus, bits=modulus.bit_length())
    if role == _ROLE_VERIFICATION:
        return VerificationKey(e=exponent, modulus=modulus)
    raise WireFormatError(f"unknown key role byte {role:#x}")


def save_key(key: Key, path: Path | str) -> None:
    Path(path).write_bytes(encode_key_file(key))


def load_signing_key(path: Path | str) -> SigningKey:
    key = decode_key_file(Path(path).read_bytes())
    if not isinstance(key, SigningKey):
        raise WireFormatError(f"{path} holds a verification key, not a signing key")
    return key


def load_verification_key(path: Path | str) -> VerificationKey:
    key = decode_key_file(Path(path).read_bytes())
    if not isinstance(key, VerificationKey):
        raise WireFormatError(f"{path} holds a signing key, not a verification key")
    return key
