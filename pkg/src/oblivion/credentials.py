"""Attribute credentials: issuance, packing, and batch verification.

An issuing authority signs each user attribute concatenated with the user's
verification key, binding the credential to that user.  Any subset of signed
attributes can be packed into a single value (their modular product), which a
verifier checks against the product of the per-attribute digests using one
modular exponentiation regardless of subset size.

Concatenation is made injective by length-prefixed canonical encodings of
both the attribute and the key, so no two distinct (attribute, key) pairs
produce the same signing input.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable

from . import rsa_fdh
from .encoding import Reader, WireFormatError, pack_bytes, pack_int, pack_str
from .rsa_fdh import (
    FullDomainHash,
    MalformedSignatureError,
    SigningKey,
    VerificationKey,
    _bigint,
    _modexp,
)

DATE_FORMAT = "%d.%m.%Y"

#: Attribute names an issuer certifies out of the box; extensible at runtime.
DEFAULT_ATTRIBUTE_NAMES = (
    "Full Name",
    "Date of Birth",
    "Place of Birth",
    "Current Residence",
    "Nationality",
    "ID Picture",
)

_registered_names: set[str] = set(DEFAULT_ATTRIBUTE_NAMES)

#: Attributes that on their own identify a person (used by disambiguation).
IDENTIFYING_ATTRIBUTES = frozenset({"Full Name", "ID Picture"})


class CredentialError(ValueError):
    """Invalid attribute sets or inconsistent credential material."""


def register_attribute_name(name: str) -> None:
    """Add a name to the attribute vocabulary accepted by :class:`Attribute`."""
    if not name:
        raise CredentialError("attribute name must be non-empty")
    _registered_names.add(name)


def registered_attribute_names() -> frozenset[str]:
    return frozenset(_registered_names)


def parse_dotted_date(text: str) -> date:
    """Parse the DD.MM.YYYY calendar-date format used in attribute values."""
    if len(text) != 10 or text[2] != "." or text[5] != ".":
        raise CredentialError(f"not a DD.MM.YYYY date: {text!r}")
    try:
        return datetime.strptime(text, DATE_FORMAT).date()
    except ValueError as exc:
        raise CredentialError(f"not a valid calendar date: {text!r}") from exc


def format_dotted_date(value: date) -> str:
    return value.strftime(DATE_FORMAT)


class AttributeKind(str, Enum):
    TEXT = "text"
    DATE = "date"
    PICTURE = "picture"


@dataclass(frozen=True)
class Attribute:
    """A named fact about a user: ``value`` is UTF-8 text for text and date
    kinds and raw image bytes for pictures."""

    name: str
    value: bytes
    kind: AttributeKind

    def __post_init__(self):
        if not self.name:
            raise CredentialError("attribute name must be non-empty")
        if self.name not in _registered_names:
            raise CredentialError(
                f"unknown attribute name {self.name!r}; register it first"
            )
        if self.kind is AttributeKind.DATE:
            parse_dotted_date(self.text())

    @classmethod
    def text_attribute(cls, name: str, value: str) -> "Attribute":
        return cls(name, value.encode("utf-8"), AttributeKind.TEXT)

    @classmethod
    def date_attribute(cls, name: str, value: str | date) -> "Attribute":
        if isinstance(value, date):
            value = format_dotted_date(value)
        return cls(name, value.encode("utf-8"), AttributeKind.DATE)

    @classmethod
    def picture_attribute(cls, name: str, image_bytes: bytes) -> "Attribute":
        return cls(name, image_bytes, AttributeKind.PICTURE)

    def text(self) -> str:
        if self.kind is AttributeKind.PICTURE:
            raise CredentialError("picture attributes have no text value")
        return self.value.decode("utf-8")

    def date_value(self) -> date:
        if self.kind is not AttributeKind.DATE:
            raise CredentialError(f"{self.name} is not a date attribute")
        return parse_dotted_date(self.text())


@dataclass(frozen=True)
class SignedAttribute:
    """An attribute signed by the issuing authority, bound to one user key."""

    attribute: Attribute
    signature: int
    ca_key_id: bytes
    bound_user_key: VerificationKey


@dataclass(frozen=True)
class PackedSignature:
    """Modular product of signed-attribute values; ``count`` is the subset size."""

    value: int
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise CredentialError("packed signature must cover at least one attribute")
        if self.value < 0:
            raise CredentialError("packed value must be non-negative")


# ---------------------------------------------------------------------------
# Canonical encodings
# ---------------------------------------------------------------------------

def encode_attribute(attribute: Attribute) -> bytes:
    """Injective encoding: length-prefixed kind, name, value."""
    return (
        pack_str(attribute.kind.value)
        + pack_str(attribute.name)
        + pack_bytes(attribute.value)
    )


def decode_attribute(data: bytes) -> Attribute:
    reader = Reader(data)
    attribute = read_attribute(reader)
    reader.finish()
    return attribute


def read_attribute(reader: Reader) -> Attribute:
    kind_text = reader.str_field()
    try:
        kind = AttributeKind(kind_text)
    except ValueError as exc:
        raise WireFormatError(f"unknown attribute kind {kind_text!r}") from exc
    name = reader.str_field()
    value = reader.bytes_field()
    return Attribute(name, value, kind)


def encode_key(vk: VerificationKey) -> bytes:
    """Canonical public-key bytes used inside signing inputs: modulus, exponent."""
    return pack_int(vk.modulus) + pack_int(vk.e)


def decode_key(data: bytes) -> VerificationKey:
    reader = Reader(data)
    vk = read_key(reader)
    reader.finish()
    return vk


def read_key(reader: Reader) -> VerificationKey:
    modulus = reader.int_field()
    e = reader.int_field()
    return VerificationKey(e=e, modulus=modulus)


def key_digest(vk: VerificationKey) -> bytes:
    """32-byte identifier of a verification key."""
    return hashlib.sha256(encode_key(vk)).digest()


def signing_input(attribute: Attribute, user_key: VerificationKey) -> bytes:
    """The byte string an issuer signs: attribute encoding || user-key encoding."""
    return encode_attribute(attribute) + encode_key(user_key)


# ---------------------------------------------------------------------------
# Issuance
# ---------------------------------------------------------------------------

def _check_unique_names(attributes: Iterable[Attribute]) -> list[Attribute]:
    attrs = list(attributes)
    if not attrs:
        raise CredentialError("attribute list must be non-empty")
    names = [a.name for a in attrs]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CredentialError(f"duplicate attribute names: {dupes}")
    return attrs


def ca_sign_attributes(
    sk_ca: SigningKey,
    user_key: VerificationKey,
    attributes: Iterable[Attribute],
    *,
    fdh: FullDomainHash | None = None,
) -> list[SignedAttribute]:
    """Sign each attribute bound to ``user_key``; order is preserved.

    The issuer is assumed to have validated the attribute evidence out of
    band (the simulator models that with an explicit flag).
    """
    attrs = _check_unique_names(attributes)
    if sk_ca.vk is None:
        raise CredentialError("issuer signing key is missing its verification half")
    ca_id = key_digest(sk_ca.vk)
    return [
        SignedAttribute(
            attribute=a,
            signature=rsa_fdh.sign(sk_ca, signing_input(a, user_key), fdh=fdh),
            ca_key_id=ca_id,
            bound_user_key=user_key,
        )
        for a in attrs
    ]


def verify_attribute(
    vk_ca: VerificationKey,
    signed: SignedAttribute,
    *,
    fdh: FullDomainHash | None = None,
) -> bool:
    """Verify one signed attribute individually (one exponentiation each)."""
    return rsa_fdh.verify(
        vk_ca,
        signed.signature,
        signing_input(signed.attribute, signed.bound_user_key),
        fdh=fdh,
    )


# ---------------------------------------------------------------------------
# Packing and batch verification
# ---------------------------------------------------------------------------

def pack(vk_ca: VerificationKey, signed: Iterable[SignedAttribute]) -> PackedSignature:
    """Multiply signatures mod N (no exponentiations).

    All elements must come from the same issuer, be bound to the same user
    key, and carry distinct attribute names; packing is order-independent.
    """
    items = list(signed)
    if not items:
        raise CredentialError("cannot pack an empty set")
    _check_unique_names(s.attribute for s in items)
    expected_ca = key_digest(vk_ca)
    user_key = items[0].bound_user_key
    product = 1
    for item in items:
        if item.ca_key_id != expected_ca:
            raise CredentialError("signed attributes from different issuers")
        if item.bound_user_key != user_key:
            raise CredentialError("signed attributes bound to different user keys")
        if not 0 <= item.signature < vk_ca.modulus:
            raise MalformedSignatureError("signature outside [0, N)")
        product = product * item.signature % vk_ca.modulus
    return PackedSignature(value=product, count=len(items))


def verify_packed(
    vk_ca: VerificationKey,
    user_key: VerificationKey,
    packed: PackedSignature,
    attributes: Iterable[Attribute],
    *,
    fdh: FullDomainHash | None = None,
) -> bool:
    """Accept iff prod H(a_i || user_key) = packed^e mod N.

    Exactly one modular exponentiation regardless of the number of
    attributes.  A count mismatch rejects before any cryptography; a packed
    value outside [0, N) raises :class:`MalformedSignatureError`.
    """
    attrs = _check_unique_names(attributes)
    if len(attrs) != packed.count:
        return False
    if not 0 <= packed.value < vk_ca.modulus:
        raise MalformedSignatureError("packed value outside [0, N)")
    hash_fn = fdh or rsa_fdh.DEFAULT_FDH
    key_bytes = encode_key(user_key)
    modulus = _bigint(vk_ca.modulus)
    digest_product = _bigint(1)
    for a in attrs:
        digest = hash_fn.digest(encode_attribute(a) + key_bytes, vk_ca.modulus)
        digest_product = digest_product * digest % modulus
    return _modexp(packed.value, vk_ca.e, vk_ca.modulus) == digest_product


# ---------------------------------------------------------------------------
# Signed-attribute files
# ---------------------------------------------------------------------------

ATTR_MAGIC = b"OBLV-ATTR"
ATTR_FORMAT_VERSION = 0x01


def encode_signed_attribute(signed: SignedAttribute) -> bytes:
    return (
        ATTR_MAGIC
        + bytes((ATTR_FORMAT_VERSION,))
        + pack_bytes(encode_attribute(signed.attribute))
        + pack_int(signed.signature)
        + pack_bytes(signed.ca_key_id)
        + pack_bytes(encode_key(signed.bound_user_key))
    )


def decode_signed_attribute(data: bytes) -> SignedAttribute:
    reader = Reader(data)
    reader.expect(ATTR_MAGIC, "signed-attribute magic")
    if reader.u8() != ATTR_FORMAT_VERSION:
        raise WireFormatError("unsupported signed-attribute version")
    attribute = decode_attribute(reader.bytes_field())
    signature = reader.int_field()
    ca_key_id = reader.bytes_field()
    user_key = decode_key(reader.bytes_field())
    reader.finish()
    return SignedAttribute(
        attribute=attribute,
        signature=signature,
        ca_key_id=ca_key_id,
        bound_user_key=user_key,
    )


def save_signed_attribute(signed: SignedAttribute, path: Path | str) -> None:
    Path(path).write_bytes(encode_signed_attribute(signed))


def load_signed_attribute(path: Path | str) -> SignedAttribute:
    return decode_signed_attribute(Path(path).read_bytes())
