"""Three-phase removal protocol: claims, ownership tokens, and reports.

A user assembles a removal request from the attributes that actually matched
the contested article (never more -- minimal disclosure), packs their
signatures, and signs the whole message.  The verifier checks, in a fixed
order chosen so failures are attributable and cheap checks precede expensive
ones at equal evidence: message signature, timestamp freshness and replay,
packed credentials, match reproduction, affectedness.  Verified requests earn
a signed ownership token binding the user key to the article digest and URL;
an indexing system honours a token only for the exact digest it was issued
for and only before expiry.

Every message uses the ``OBLV-MSG`` wire format: magic, version byte, type
byte, then length-prefixed fields in a fixed per-type order; signatures cover
all encoded bytes before the trailing signature field.  All operations take
``now`` explicitly; nothing reads an ambient clock.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable

from . import rsa_fdh
from .credentials import (
    Attribute,
    PackedSignature,
    SignedAttribute,
    encode_attribute,
    encode_key,
    key_digest,
    pack,
    read_attribute,
    read_key,
    verify_packed,
)
from .encoding import Reader, WireFormatError, pack_bytes, pack_int, pack_str
from .matching import (
    Article,
    DEFAULT_THRESHOLD,
    Match,
    MatchKind,
    MatchReport,
    SynonymTable,
    disambiguate,
    disambiguation_score,
    parse_dotted_date,
    tag_article,
)
from .rsa_fdh import MalformedSignatureError, SigningKey, VerificationKey

DEFAULT_FRESHNESS_WINDOW = 300  # seconds
DEFAULT_TOKEN_VALIDITY = 30 * 24 * 3600  # seconds


class CannotClaimError(ValueError):
    """No matched attribute is claimable (nothing matched, or missing credentials)."""


class RejectionCode(str, Enum):
    """Why a request, token, or report was refused; stable over the wire."""

    BAD_SIGNATURE = "bad-signature"
    STALE_TIMESTAMP = "stale-timestamp"
    REPLAYED = "replayed"
    BAD_CREDENTIALS = "bad-credentials"
    TAG_MISMATCH = "tag-mismatch"
    NOT_AFFECTED = "not-affected"
    EXPIRED = "expired"
    DIGEST_MISMATCH = "digest-mismatch"
    NOT_INDEXED = "not indexed"
    MALFORMED = "malformed"


# ---------------------------------------------------------------------------
# Message types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RemovalRequest:
    """The signed claim message: timestamp, user key, claimed attribute
    subset, packed signature, the article itself, and the match report."""

    timestamp: int
    user_key: VerificationKey
    claimed_attributes: tuple[Attribute, ...]
    packed_signature: PackedSignature
    article: Article
    match_report: MatchReport
    signature: int


@dataclass(frozen=True)
class OwnershipToken:
    """Verifier-signed statement that a user key owns an article's content."""

    user_key: VerificationKey
    article_digest: bytes
    article_url: str
    issued_at: int
    expiry: int
    ocp_signature: int

    def __post_init__(self):
        if self.expiry <= self.issued_at:
            raise ValueError("token expiry must lie after issuance")


class AckStatus(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class Acknowledgment:
    status: AckStatus
    reason: str = ""

    def __post_init__(self):
        if self.status is AckStatus.FAILURE and not self.reason:
            raise ValueError("failure acknowledgments need a reason")

    @property
    def ok(self) -> bool:
        return self.status is AckStatus.SUCCESS


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------

MSG_MAGIC = b"OBLV-MSG"
WIRE_VERSION = 0x01
TYPE_REQUEST = 0x01
TYPE_TOKEN = 0x02
TYPE_REPORT = 0x03
TYPE_ACK = 0x04


def _header(msg_type: int) -> bytes:
    return MSG_MAGIC + bytes((WIRE_VERSION, msg_type))


def _read_header(reader: Reader, expected_type: int) -> None:
    reader.expect(MSG_MAGIC, "message magic")
    if reader.u8() != WIRE_VERSION:
        raise WireFormatError("unsupported wire version")
    msg_type = reader.u8()
    if msg_type != expected_type:
        raise WireFormatError(f"unexpected message type {msg_type:#x}")


def peek_message_type(data: bytes) -> int:
    reader = Reader(data)
    reader.expect(MSG_MAGIC, "message magic")
    if reader.u8() != WIRE_VERSION:
        raise WireFormatError("unsupported wire version")
    return reader.u8()


def _encode_article(article: Article) -> bytes:
    out = pack_str(article.url) + pack_str(article.body)
    if article.publication_date is None:
        out += pack_bytes(b"")
    else:
        out += pack_str(article.publication_date.strftime("%d.%m.%Y"))
    out += pack_int(len(article.images))
    for image_id, data in article.images:
        out += pack_str(image_id) + pack_bytes(data)
    return out


def _read_article(reader: Reader) -> Article:
    url = reader.str_field()
    body = reader.str_field()
    date_text = reader.str_field()
    publication_date: date | None = None
    if date_text:
        publication_date = parse_dotted_date(date_text)
    images = []
    for _ in range(reader.int_field()):
        image_id = reader.str_field()
        data = reader.bytes_field()
        images.append((image_id, data))
    return Article(url=url, body=body, publication_date=publication_date,
                   images=tuple(images))


def _encode_match(match: Match) -> bytes:
    out = pack_str(match.attribute_name) + pack_str(match.kind.value)
    if match.image_id is not None:
        out += pack_bytes(b"\x01") + pack_str(match.image_id)
    else:
        out += pack_bytes(b"\x00") + pack_int(match.start) + pack_int(match.end)
    return out + pack_str(match.matched_text)


def _read_match(reader: Reader) -> Match:
    name = reader.str_field()
    kind = MatchKind(reader.str_field())
    selector = reader.bytes_field()
    if selector == b"\x01":
        image_id = reader.str_field()
        start = end = None
    elif selector == b"\x00":
        image_id = None
        start = reader.int_field()
        end = reader.int_field()
    else:
        raise WireFormatError("bad match span selector")
    text = reader.str_field()
    return Match(name, kind, start, end, image_id, text)


def _encode_report_body(report: MatchReport) -> bytes:
    out = pack_bytes(report.article_digest)
    out += pack_int(len(report.claimed_attributes))
    for name in report.claimed_attributes:
        out += pack_str(name)
    out += pack_int(len(report.matches))
    for match in report.matches:
        out += pack_bytes(_encode_match(match))
    out += pack_int(len(report.warnings))
    for warning in report.warnings:
        out += pack_str(warning)
    return out


def _read_report_body(reader: Reader) -> MatchReport:
    digest = reader.bytes_field()
    claimed = tuple(reader.str_field() for _ in range(reader.int_field()))
    matches = []
    for _ in range(reader.int_field()):
        match_reader = Reader(reader.bytes_field())
        matches.append(_read_match(match_reader))
        match_reader.finish()
    warnings = tuple(reader.str_field() for _ in range(reader.int_field()))
    return MatchReport(article_digest=digest, claimed_attributes=claimed,
                       matches=tuple(matches), warnings=warnings)


def _request_prefix(
    timestamp: int,
    user_key: VerificationKey,
    claimed: tuple[Attribute, ...],
    packed: PackedSignature,
    article: Article,
    report: MatchReport,
) -> bytes:
    out = _header(TYPE_REQUEST)
    out += pack_int(timestamp)
    out += pack_bytes(encode_key(user_key))
    out += pack_int(len(claimed))
    for attribute in claimed:
        out += pack_bytes(encode_attribute(attribute))
    out += pack_int(packed.value) + pack_int(packed.count)
    out += pack_bytes(_encode_article(article))
    out += pack_bytes(_encode_report_body(report))
    return out


def request_signing_bytes(request: RemovalRequest) -> bytes:
    """The bytes covered by the request signature (all but the signature)."""
    return _request_prefix(
        request.timestamp,
        request.user_key,
        request.claimed_attributes,
        request.packed_signature,
        request.article,
        request.match_report,
    )


def encode_request(request: RemovalRequest) -> bytes:
    return request_signing_bytes(request) + pack_int(request.signature)


def decode_request(data: bytes) -> RemovalRequest:
    reader = Reader(data)
    _read_header(reader, TYPE_REQUEST)
    timestamp = reader.int_field()
    key_reader = Reader(reader.bytes_field())
    user_key = read_key(key_reader)
    key_reader.finish()
    claimed = []
    for _ in range(reader.int_field()):
        attr_reader = Reader(reader.bytes_field())
        claimed.append(read_attribute(attr_reader))
        attr_reader.finish()
    packed = PackedSignature(value=reader.int_field(), count=reader.int_field())
    article_reader = Reader(reader.bytes_field())
    article = _read_article(article_reader)
    article_reader.finish()
    report_reader = Reader(reader.bytes_field())
    report = _read_report_body(report_reader)
    report_reader.finish()
    signature = reader.int_field()
    reader.finish()
    return RemovalRequest(
        timestamp=timestamp,
        user_key=user_key,
        claimed_attributes=tuple(claimed),
        packed_signature=packed,
        article=article,
        match_report=report,
        signature=signature,
    )


def token_signing_bytes(
    user_key: VerificationKey,
    article_digest: bytes,
    article_url: str,
    issued_at: int,
    expiry: int,
) -> bytes:
    return (
        _header(TYPE_TOKEN)
        + pack_bytes(encode_key(user_key))
        + pack_bytes(article_digest)
        + pack_str(article_url)
        + pack_int(issued_at)
        + pack_int(expiry)
    )


def encode_token(token: OwnershipToken) -> bytes:
    return token_signing_bytes(
        token.user_key, token.article_digest, token.article_url,
        token.issued_at, token.expiry,
    ) + pack_int(token.ocp_signature)


def decode_token(data: bytes) -> OwnershipToken:
    reader = Reader(data)
    _read_header(reader, TYPE_TOKEN)
    key_reader = Reader(reader.bytes_field())
    user_key = read_key(key_reader)
    key_reader.finish()
    digest = reader.bytes_field()
    url = reader.str_field()
    issued_at = reader.int_field()
    expiry = reader.int_field()
    signature = reader.int_field()
    reader.finish()
    return OwnershipToken(
        user_key=user_key, article_digest=digest, article_url=url,
        issued_at=issued_at, expiry=expiry, ocp_signature=signature,
    )


def encode_report_message(token: OwnershipToken, url: str) -> bytes:
    return _header(TYPE_REPORT) + pack_bytes(encode_token(token)) + pack_str(url)


def decode_report_message(data: bytes) -> tuple[OwnershipToken, str]:
    reader = Reader(data)
    _read_header(reader, TYPE_REPORT)
    token = decode_token(reader.bytes_field())
    url = reader.str_field()
    reader.finish()
    return token, url


def encode_ack(ack: Acknowledgment) -> bytes:
    return _header(TYPE_ACK) + pack_str(ack.status.value) + pack_str(ack.reason)


def decode_ack(data: bytes) -> Acknowledgment:
    reader = Reader(data)
    _read_header(reader, TYPE_ACK)
    status = AckStatus(reader.str_field())
    reason = reader.str_field()
    reader.finish()
    return Acknowledgment(status=status, reason=reason)


def message_digest(request: RemovalRequest) -> bytes:
    """Identifier of the exact request bytes; keys the replay cache."""
    return hashlib.sha256(encode_request(request)).digest()


# ---------------------------------------------------------------------------
# Replay protection
# ---------------------------------------------------------------------------

class ReplayCache:
    """Remembers message digests seen inside the freshness window.

    ``check_and_insert`` is atomic: of two concurrent calls with the same
    digest, exactly one wins.  Entries older than the window are evicted on
    the way in.
    """

    def __init__(self, window: int = DEFAULT_FRESHNESS_WINDOW):
        if window <= 0:
            raise ValueError("window must be positive")
        self.window = window
        self._seen: dict[bytes, tuple[bytes, int]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._seen)

    def check_and_insert(
        self, digest: bytes, user_key_id: bytes, timestamp: int, now: int
    ) -> bool:
        """True iff the digest was fresh (and is now recorded)."""
        with self._lock:
            horizon = now - self.window
            stale = [d for d, (_, ts) in self._seen.items() if ts < horizon]
            for d in stale:
                del self._seen[d]
            if digest in self._seen:
                return False
            self._seen[digest] = (user_key_id, timestamp)
            return True


# ---------------------------------------------------------------------------
# Claim construction (user side)
# ---------------------------------------------------------------------------

def build_request(
    sk_user: SigningKey,
    user_key: VerificationKey,
    signed_attributes: Iterable[SignedAttribute],
    article: Article,
    match_report: MatchReport,
    now: int,
    *,
    ca_key: VerificationKey,
) -> RemovalRequest:
    """Assemble and sign a removal request from the matched attributes.

    Claims exactly the attributes with a match in ``match_report`` -- no
    unmatched attribute (nor its name) is ever serialized.  Raises
    :class:`CannotClaimError` when nothing matched or a matched attribute has
    no credential.
    """
    if match_report.article_digest != article.content_digest:
        raise CannotClaimError("match report was not derived from this article")
    matched_names: list[str] = []
    for match in match_report.matches:
        if match.attribute_name not in matched_names:
            matched_names.append(match.attribute_name)
    if not matched_names:
        raise CannotClaimError("no attribute matched the article")
    by_name = {sa.attribute.name: sa for sa in signed_attributes}
    missing = [name for name in matched_names if name not in by_name]
    if missing:
        raise CannotClaimError(f"matched attributes without credentials: {missing}")

    chosen = [by_name[name] for name in matched_names]
    # Canonical order over the wire: sort by encoded attribute bytes.
    chosen.sort(key=lambda sa: encode_attribute(sa.attribute))
    claimed = tuple(sa.attribute for sa in chosen)
    packed = pack(ca_key, chosen)

    claimed_names = {a.name for a in claimed}
    wire_report = MatchReport(
        article_digest=match_report.article_digest,
        claimed_attributes=tuple(a.name for a in claimed),
        matches=tuple(m for m in match_report.matches
                      if m.attribute_name in claimed_names),
        warnings=(),
    )

    prefix = _request_prefix(now, user_key, claimed, packed, article, wire_report)
    signature = rsa_fdh.sign(sk_user, prefix)
    return RemovalRequest(
        timestamp=now,
        user_key=user_key,
        claimed_attributes=claimed,
        packed_signature=packed,
        article=article,
        match_report=wire_report,
        signature=signature,
    )


# ---------------------------------------------------------------------------
# Request verification (verifier side)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VerifiedRequest:
    """A request that passed every check, plus the verifier's own evidence."""

    request: RemovalRequest
    report: MatchReport
    score: float


@dataclass(frozen=True)
class OcpDecision:
    verified: VerifiedRequest | None
    code: RejectionCode | None

    @property
    def accepted(self) -> bool:
        return self.verified is not None


def _reject(code: RejectionCode) -> OcpDecision:
    return OcpDecision(verified=None, code=code)


def ocp_verify_request(
    ca_key: VerificationKey,
    request: RemovalRequest,
    replay_cache: ReplayCache,
    now: int,
    *,
    window: int | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    synonyms: SynonymTable | None = None,
    age_tolerance: int = 0,
) -> OcpDecision:
    """Run the full verification chain; the first failing check names the
    rejection.  Order: message signature, freshness and replay, packed
    credentials, match reproduction, affectedness."""
    window = replay_cache.window if window is None else window

    # (1) message signature
    try:
        if not rsa_fdh.verify(request.user_key, request.signature,
                              request_signing_bytes(request)):
            return _reject(RejectionCode.BAD_SIGNATURE)
    except MalformedSignatureError:
        return _reject(RejectionCode.BAD_SIGNATURE)

    # (2) freshness, then replay (check-and-insert is atomic)
    if abs(now - request.timestamp) > window:
        return _reject(RejectionCode.STALE_TIMESTAMP)
    if not replay_cache.check_and_insert(
        message_digest(request), key_digest(request.user_key),
        request.timestamp, now,
    ):
        return _reject(RejectionCode.REPLAYED)

    # (3) packed credentials, bound to this user key
    try:
        if not verify_packed(ca_key, request.user_key, request.packed_signature,
                             request.claimed_attributes):
            return _reject(RejectionCode.BAD_CREDENTIALS)
    except (MalformedSignatureError, ValueError):
        return _reject(RejectionCode.BAD_CREDENTIALS)

    # (4) re-run matching; every claimed attribute and every claimed match
    # must reproduce against the article as received
    if request.match_report.article_digest != request.article.content_digest:
        return _reject(RejectionCode.TAG_MISMATCH)
    fresh = tag_article(request.article, request.claimed_attributes, synonyms,
                        age_tolerance=age_tolerance)
    fresh_matches = set(fresh.matches)
    if any(m not in fresh_matches for m in request.match_report.matches):
        return _reject(RejectionCode.TAG_MISMATCH)
    if not all(a.name in fresh.matched_names() for a in request.claimed_attributes):
        return _reject(RejectionCode.TAG_MISMATCH)

    # (5) affectedness
    if not disambiguate(fresh, threshold):
        return _reject(RejectionCode.NOT_AFFECTED)

    return OcpDecision(
        verified=VerifiedRequest(request=request, report=fresh,
                                 score=disambiguation_score(fresh)),
        code=None,
    )


# ---------------------------------------------------------------------------
# Tokens (verifier issues, indexing system checks)
# ---------------------------------------------------------------------------

def issue_token(
    sk_ocp: SigningKey,
    verified: VerifiedRequest,
    now: int,
    validity: int = DEFAULT_TOKEN_VALIDITY,
) -> OwnershipToken:
    """Sign an ownership token for a verified request.  Non-interactive: no
    further round trip with the user is needed.

    Passing anything but a :class:`VerifiedRequest` is a programming error,
    not a protocol rejection.
    """
    if not isinstance(verified, VerifiedRequest):
        raise TypeError("issue_token requires a VerifiedRequest from ocp_verify_request")
    if validity <= 0:
        raise ValueError("validity must be positive")
    request = verified.request
    issued_at = now
    expiry = now + validity
    signature = rsa_fdh.sign(
        sk_ocp,
        token_signing_bytes(
            request.user_key, request.article.content_digest,
            request.article.url, issued_at, expiry,
        ),
    )
    return OwnershipToken(
        user_key=request.user_key,
        article_digest=request.article.content_digest,
        article_url=request.article.url,
        issued_at=issued_at,
        expiry=expiry,
        ocp_signature=signature,
    )


def token_rejection(
    ocp_key: VerificationKey,
    token: OwnershipToken,
    article_digest: bytes,
    now: int,
) -> RejectionCode | None:
    """None when the token is valid for this digest now; otherwise why not."""
    try:
        good = rsa_fdh.verify(
            ocp_key,
            token.ocp_signature,
            token_signing_bytes(token.user_key, token.article_digest,
                                token.article_url, token.issued_at, token.expiry),
        )
    except MalformedSignatureError:
        return RejectionCode.BAD_SIGNATURE
    if not good:
        return RejectionCode.BAD_SIGNATURE
    if token.article_digest != article_digest:
        return RejectionCode.DIGEST_MISMATCH
    if now >= token.expiry:
        return RejectionCode.EXPIRED
    return None


def is_token_valid(
    ocp_key: VerificationKey,
    token: OwnershipToken,
    article_digest: bytes,
    now: int,
) -> bool:
    return token_rejection(ocp_key, token, article_digest, now) is None


# ---------------------------------------------------------------------------
# Link index and report handling (indexing-system side)
# ---------------------------------------------------------------------------

class LinkIndex:
    """URLs the indexing system currently serves, with their content digests.

    Mutations are serialized; delisting is atomic check-and-remove.
    """

    def __init__(self):
        self._entries: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def add(self, url: str, article_digest: bytes) -> None:
        with self._lock:
            self._entries[url] = article_digest

    def digest_for(self, url: str) -> bytes | None:
        with self._lock:
            return self._entries.get(url)

    def is_indexed(self, url: str) -> bool:
        return self.digest_for(url) is not None

    def delist(self, url: str) -> bool:
        with self._lock:
            return self._entries.pop(url, None) is not None

    def __len__(self) -> int:
        return len(self._entries)


def handle_report(
    index: LinkIndex,
    ocp_key: VerificationKey,
    token: OwnershipToken,
    url: str,
    now: int,
) -> Acknowledgment:
    """Delist ``url`` if the token is valid for exactly its indexed content.

    All failures fold into a failure acknowledgment with the rejection code
    as the reason.
    """
    try:
        good = rsa_fdh.verify(
            ocp_key,
            token.ocp_signature,
            token_signing_bytes(token.user_key, token.article_digest,
                                token.article_url, token.issued_at, token.expiry),
        )
    except MalformedSignatureError:
        good = False
    if not good:
        return Acknowledgment(AckStatus.FAILURE, RejectionCode.BAD_SIGNATURE.value)
    if now >= token.expiry:
        return Acknowledgment(AckStatus.FAILURE, RejectionCode.EXPIRED.value)
    indexed_digest = index.digest_for(url)
    if indexed_digest is None:
        return Acknowledgment(AckStatus.FAILURE, RejectionCode.NOT_INDEXED.value)
    if token.article_digest != indexed_digest:
        return Acknowledgment(AckStatus.FAILURE, RejectionCode.DIGEST_MISMATCH.value)
    if not index.delist(url):
        return Acknowledgment(AckStatus.FAILURE, RejectionCode.NOT_INDEXED.value)
    return Acknowledgment(AckStatus.SUCCESS)
