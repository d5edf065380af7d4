"""Runnable parties and a deterministic protocol simulator.

The simulator schedules messages between users, the certifying authority,
the verifier, and the indexing system, with an adversarial scheduler that
can drop, duplicate, reorder, delay, tamper with, or cross-user-substitute
messages -- but cannot forge signatures.  Every party appends to a shared
ordered trace; security properties are asserted over traces: an ``Affected``
event must be preceded by a ``VerifiedOwnership`` event for the same key and
article, which in turn must be preceded by registration covering every
claimed attribute.

The same party logic can be served over loopback TCP sockets; a scenario
executed in-process and over sockets yields the same event sequence.
"""

from __future__ import annotations

import random
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import timedelta
from enum import Enum
from typing import Callable, Iterable, Mapping

from . import protocol, rsa_fdh
from .credentials import (
    Attribute,
    AttributeKind,
    CredentialError,
    SignedAttribute,
    ca_sign_attributes,
    key_digest,
)
from .encoding import WireFormatError
from .matching import Article, DEFAULT_THRESHOLD, SynonymTable, tag_article
from .protocol import (
    Acknowledgment,
    AckStatus,
    CannotClaimError,
    DEFAULT_FRESHNESS_WINDOW,
    DEFAULT_TOKEN_VALIDITY,
    LinkIndex,
    OwnershipToken,
    RejectionCode,
    RemovalRequest,
    ReplayCache,
    build_request,
    decode_ack,
    decode_report_message,
    decode_request,
    decode_token,
    encode_ack,
    encode_report_message,
    encode_request,
    encode_token,
    issue_token,
    ocp_verify_request,
    peek_message_type,
)
from .rsa_fdh import SigningKey, VerificationKey


class ScenarioError(ValueError):
    """Malformed scenario: unknown party, message kind, or mutation."""


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

class Role(str, Enum):
    CA = "CA"
    OCP = "OCP"
    IS = "IS"
    USER = "User"
    ADVERSARY = "Adversary"


class EventType(str, Enum):
    REGISTERED = "Registered"
    CLAIMED = "Claimed"
    VERIFIED_OWNERSHIP = "VerifiedOwnership"
    TOKEN_ISSUED = "TokenIssued"
    REPORTED = "Reported"
    AFFECTED = "Affected"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class TraceEvent:
    """One protocol event; ``attributes`` carries the certified or claimed
    attribute names for registration and ownership-verification events."""

    seq: int
    actor: Role
    event: EventType
    subject_key: bytes
    article_digest: bytes = b""
    code: RejectionCode | None = None
    attributes: tuple[str, ...] = ()

    def line(self) -> str:
        return "\t".join((
            str(self.seq),
            self.actor.value,
            self.event.value,
            self.code.value if self.code else "",
            self.subject_key.hex(),
            self.article_digest.hex(),
            ",".join(self.attributes),
        ))

    def signature(self) -> tuple:
        """Event identity without the sequence number (for cross-transport
        comparison)."""
        return (self.actor.value, self.event.value,
                self.code.value if self.code else "",
                self.subject_key, self.article_digest, self.attributes)


class Trace:
    """Ordered, thread-safe event log with strictly increasing sequence."""

    def __init__(self):
        self._events: list[TraceEvent] = []
        self._lock = threading.Lock()

    def emit(
        self,
        actor: Role,
        event: EventType,
        subject_key: bytes,
        article_digest: bytes = b"",
        *,
        code: RejectionCode | None = None,
        attributes: tuple[str, ...] = (),
    ) -> TraceEvent:
        with self._lock:
            ev = TraceEvent(
                seq=len(self._events) + 1,
                actor=actor,
                event=event,
                subject_key=subject_key,
                article_digest=article_digest,
                code=code,
                attributes=attributes,
            )
            self._events.append(ev)
            return ev

    def events(self) -> tuple[TraceEvent, ...]:
        with self._lock:
            return tuple(self._events)

    def __iter__(self):
        return iter(self.events())

    def __len__(self) -> int:
        return len(self.events())

    def to_text(self) -> str:
        return "\n".join(ev.line() for ev in self.events()) + "\n"

    def signature(self) -> tuple:
        return tuple(ev.signature() for ev in self.events())

    def count(self, event: EventType) -> int:
        return sum(1 for ev in self.events() if ev.event is event)


def check_censorship_resistance(trace: Iterable[TraceEvent]) -> TraceEvent | None:
    """None when the ordering property holds; otherwise the first violation.

    Every Affected(key, article) must be preceded by
    VerifiedOwnership(key, article), and every VerifiedOwnership must be
    preceded by registration events covering all attributes it claims.
    """
    registered: dict[bytes, set[str]] = {}
    verified: set[tuple[bytes, bytes]] = set()
    for ev in trace:
        if ev.event is EventType.REGISTERED:
            registered.setdefault(ev.subject_key, set()).update(ev.attributes)
        elif ev.event is EventType.VERIFIED_OWNERSHIP:
            have = registered.get(ev.subject_key, set())
            if not set(ev.attributes) <= have:
                return ev
            verified.add((ev.subject_key, ev.article_digest))
        elif ev.event is EventType.AFFECTED:
            if (ev.subject_key, ev.article_digest) not in verified:
                return ev
    return None


# ---------------------------------------------------------------------------
# Clock
# ---------------------------------------------------------------------------

class SimClock:
    """Deterministic logical clock shared by a simulation's parties."""

    def __init__(self, start: int = 1_700_000_000):
        self._now = start

    def __call__(self) -> int:
        return self._now

    def tick(self, step: int = 1) -> int:
        self._now += step
        return self._now

    def advance(self, seconds: int) -> None:
        self._now += seconds


def _wall_clock() -> int:
    return int(time.time())


# ---------------------------------------------------------------------------
# Parties
# ---------------------------------------------------------------------------

class CertificationAuthority:
    """Issues signed attributes after out-of-band evidence validation,
    modeled here as a per-attribute boolean."""

    def __init__(self, signing_key: SigningKey, trace: Trace):
        if signing_key.vk is None:
            raise ValueError("authority signing key needs its verification half")
        self.sk = signing_key
        self.vk = signing_key.vk
        self.trace = trace

    def register(
        self,
        user_key: VerificationKey,
        attributes: Iterable[Attribute],
        evidence: Mapping[str, bool] | None = None,
    ) -> list[SignedAttribute] | None:
        attrs = list(attributes)
        subject = key_digest(user_key)
        if evidence is not None:
            unproven = [a.name for a in attrs if not evidence.get(a.name, False)]
            if unproven:
                self.trace.emit(Role.CA, EventType.REJECTED, subject,
                                code=RejectionCode.BAD_CREDENTIALS,
                                attributes=tuple(unproven))
                return None
        try:
            signed = ca_sign_attributes(self.sk, user_key, attrs)
        except CredentialError:
            self.trace.emit(Role.CA, EventType.REJECTED, subject,
                            code=RejectionCode.BAD_CREDENTIALS)
            return None
        self.trace.emit(Role.CA, EventType.REGISTERED, subject,
                        attributes=tuple(a.name for a in attrs))
        return signed


class OwnershipCertificationParty:
    """Verifies removal requests and issues ownership tokens."""

    def __init__(
        self,
        signing_key: SigningKey,
        ca_key: VerificationKey,
        trace: Trace,
        *,
        synonyms: SynonymTable | None = None,
        window: int = DEFAULT_FRESHNESS_WINDOW,
        threshold: float = DEFAULT_THRESHOLD,
        validity: int = DEFAULT_TOKEN_VALIDITY,
        age_tolerance: int = 0,
        clock: Callable[[], int] = _wall_clock,
    ):
        if signing_key.vk is None:
            raise ValueError("verifier signing key needs its verification half")
        self.sk = signing_key
        self.vk = signing_key.vk
        self.ca_key = ca_key
        self.trace = trace
        self.synonyms = synonyms
        self.threshold = threshold
        self.validity = validity
        self.age_tolerance = age_tolerance
        self.clock = clock
        self.replay_cache = ReplayCache(window)

    def handle_claim(
        self, request: RemovalRequest, now: int | None = None
    ) -> OwnershipToken | Acknowledgment:
        now = self.clock() if now is None else now
        subject = key_digest(request.user_key)
        article_digest = request.article.content_digest
        decision = ocp_verify_request(
            self.ca_key, request, self.replay_cache, now,
            threshold=self.threshold, synonyms=self.synonyms,
            age_tolerance=self.age_tolerance,
        )
        if not decision.accepted:
            self.trace.emit(Role.OCP, EventType.REJECTED, subject, article_digest,
                            code=decision.code)
            return Acknowledgment(AckStatus.FAILURE, decision.code.value)
        self.trace.emit(
            Role.OCP, EventType.VERIFIED_OWNERSHIP, subject, article_digest,
            attributes=tuple(a.name for a in request.claimed_attributes),
        )
        token = issue_token(self.sk, decision.verified, now, self.validity)
        self.trace.emit(Role.OCP, EventType.TOKEN_ISSUED, subject, article_digest)
        return token

    def handle_frame(self, payload: bytes) -> bytes:
        try:
            request = decode_request(payload)
        except (WireFormatError, ValueError):
            return encode_ack(Acknowledgment(AckStatus.FAILURE,
                                             RejectionCode.MALFORMED.value))
        result = self.handle_claim(request)
        if isinstance(result, OwnershipToken):
            return encode_token(result)
        return encode_ack(result)


class IndexingSystem:
    """Holds the link index and honours valid ownership tokens."""

    def __init__(
        self,
        ocp_key: VerificationKey,
        trace: Trace,
        *,
        index: LinkIndex | None = None,
        clock: Callable[[], int] = _wall_clock,
    ):
        self.ocp_key = ocp_key
        self.trace = trace
        self.index = index if index is not None else LinkIndex()
        self.clock = clock

    def handle_report(
        self, token: OwnershipToken, url: str, now: int | None = None
    ) -> Acknowledgment:
        now = self.clock() if now is None else now
        subject = key_digest(token.user_key)
        ack = protocol.handle_report(self.index, self.ocp_key, token, url, now)
        if ack.ok:
            self.trace.emit(Role.IS, EventType.AFFECTED, subject,
                            token.article_digest)
        else:
            try:
                code = RejectionCode(ack.reason)
            except ValueError:
                code = RejectionCode.MALFORMED
            self.trace.emit(Role.IS, EventType.REJECTED, subject,
                            token.article_digest, code=code)
        return ack

    def handle_frame(self, payload: bytes) -> bytes:
        try:
            token, url = decode_report_message(payload)
        except (WireFormatError, ValueError):
            return encode_ack(Acknowledgment(AckStatus.FAILURE,
                                             RejectionCode.MALFORMED.value))
        return encode_ack(self.handle_report(token, url))


class UserAgent:
    """A user client: holds credentials, tags articles, claims, reports."""

    def __init__(
        self,
        name: str,
        signing_key: SigningKey,
        attributes: Iterable[Attribute],
        *,
        synonyms: SynonymTable | None = None,
        age_tolerance: int = 0,
    ):
        if signing_key.vk is None:
            raise ValueError("user signing key needs its verification half")
        self.name = name
        self.sk = signing_key
        self.vk = signing_key.vk
        self.attributes = list(attributes)
        self.synonyms = synonyms
        self.age_tolerance = age_tolerance
        self.credentials: list[SignedAttribute] = []
        self.tokens: dict[bytes, OwnershipToken] = {}

    def register_with(
        self, ca: CertificationAuthority,
        evidence: Mapping[str, bool] | None = None,
    ) -> bool:
        signed = ca.register(self.vk, self.attributes, evidence)
        if signed is None:
            return False
        self.credentials = signed
        return True

    def build_claim(
        self, article: Article, ca_key: VerificationKey, now: int
    ) -> RemovalRequest | None:
        """Tag the article against all credentials and claim what matched;
        None when there is nothing claimable."""
        if not self.credentials:
            return None
        report = tag_article(
            article, [sa.attribute for sa in self.credentials], self.synonyms,
            age_tolerance=self.age_tolerance,
        )
        try:
            return build_request(
                self.sk, self.vk, self.credentials, article, report, now,
                ca_key=ca_key,
            )
        except CannotClaimError:
            return None

    def accept_token(self, token: OwnershipToken) -> None:
        self.tokens[token.article_digest] = token

    def token_for(self, article: Article) -> OwnershipToken | None:
        return self.tokens.get(article.content_digest)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

MUTATIONS = (
    "drop", "duplicate", "reorder", "delay",
    "tamper-signature", "tamper-timestamp", "tamper-attribute",
    "tamper-article", "substitute-key",
)

_MESSAGE_RECEIVER = {"REGISTER": "ca", "CLAIM": "ocp", "REPORT": "is"}


@dataclass(frozen=True)
class ScenarioStep:
    number: int
    sender: str
    receiver: str
    message: str  # REGISTER, or CLAIM/<article>, REPORT/<article>
    mutation: str | None = None

    @property
    def kind(self) -> str:
        return self.message.split("/", 1)[0]

    @property
    def article_key(self) -> str:
        parts = self.message.split("/", 1)
        return parts[1] if len(parts) > 1 else "a1"


@dataclass(frozen=True)
class Scenario:
    """A replayable schedule; the seed also keys randomized world choices."""

    steps: tuple[ScenarioStep, ...]
    seed: int = 0


def format_scenario(scenario: Scenario) -> str:
    lines = [f"# seed {scenario.seed}"]
    for step in scenario.steps:
        line = f"STEP {step.number} SEND {step.sender} {step.receiver} {step.message}"
        if step.mutation:
            line += f" MUTATE {step.mutation.upper()}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    steps = []
    seed = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            parts = stripped[1:].split()
            if len(parts) == 2 and parts[0] == "seed":
                seed = int(parts[1])
            continue
        parts = stripped.split()
        if len(parts) not in (6, 8) or parts[0] != "STEP" or parts[2] != "SEND":
            raise ScenarioError(f"line {lineno}: expected "
                                f"'STEP <n> SEND <from> <to> <msg>[ MUTATE <op>]'")
        mutation = None
        if len(parts) == 8:
            if parts[6] != "MUTATE":
                raise ScenarioError(f"line {lineno}: expected MUTATE")
            mutation = parts[7].lower()
        steps.append(ScenarioStep(
            number=int(parts[1]), sender=parts[3], receiver=parts[4],
            message=parts[5], mutation=mutation,
        ))
    return Scenario(steps=tuple(steps), seed=seed)


def honest_scenario(user: str = "alice", article: str = "a1") -> Scenario:
    """The canonical three-send flow: register, claim, report."""
    return Scenario(steps=(
        ScenarioStep(1, user, "ca", "REGISTER"),
        ScenarioStep(2, user, "ocp", f"CLAIM/{article}"),
        ScenarioStep(3, user, "is", f"REPORT/{article}"),
    ))


def random_scenario(
    seed: int,
    *,
    users: tuple[str, ...] = ("alice", "bob"),
    articles: tuple[str, ...] = ("a1", "a2"),
    max_steps: int = 8,
    mutation_rate: float = 0.7,
) -> Scenario:
    """Seeded random schedule with at most one adversarial mutation."""
    rng = random.Random(seed)
    count = rng.randint(1, max_steps)
    steps = []
    for number in range(1, count + 1):
        sender = rng.choice(users)
        kind = rng.choice(("REGISTER", "CLAIM", "REPORT"))
        message = "REGISTER" if kind == "REGISTER" else f"{kind}/{rng.choice(articles)}"
        steps.append(ScenarioStep(
            number=number, sender=sender,
            receiver=_MESSAGE_RECEIVER[kind], message=message,
        ))
    if steps and rng.random() < mutation_rate:
        idx = rng.randrange(len(steps))
        steps[idx] = replace(steps[idx], mutation=rng.choice(MUTATIONS))
    return Scenario(steps=tuple(steps), seed=seed)


# ---------------------------------------------------------------------------
# World construction
# ---------------------------------------------------------------------------

def _fast_keypair(rng: random.Random, half_bits: int = 64) -> SigningKey:
    """Small honest key pair for simulation speed; not a supported key size."""
    while True:
        p = rsa_fdh._random_prime(half_bits, rng)
        q = rsa_fdh._random_prime(half_bits, rng)
        if p == q:
            continue
        phi = (p - 1) * (q - 1)
        if phi % 65537 == 0:
            continue
        sk, _ = rsa_fdh.keypair_from_primes(p, q, 65537)
        return sk


@dataclass(frozen=True)
class WorldKeys:
    """Key material for one simulation world; reusable across runs since
    runs differ only in state, never in keys."""

    ca: SigningKey
    ocp: SigningKey
    users: dict[str, SigningKey]
    adversary: SigningKey


def generate_world_keys(
    seed: int = 0,
    user_names: Iterable[str] = ("alice", "bob"),
    *,
    key_bits: int | None = None,
) -> WorldKeys:
    """Deterministic key material; ``key_bits=None`` means small fast keys."""
    rng = random.Random(seed)

    def make_key() -> SigningKey:
        if key_bits is None:
            return _fast_keypair(rng)
        sk, _ = rsa_fdh.keygen(key_bits, rng=rng)
        return sk

    ca = make_key()
    ocp = make_key()
    users = {name: make_key() for name in user_names}
    return WorldKeys(ca=ca, ocp=ocp, users=users, adversary=make_key())


@dataclass
class World:
    """Everything one simulation run touches, built deterministically."""

    ca: CertificationAuthority
    ocp: OwnershipCertificationParty
    indexing: IndexingSystem
    users: dict[str, UserAgent]
    articles: dict[str, Article]
    adversary_key: SigningKey
    trace: Trace
    clock: SimClock
    split_ocp_is: bool = False
    servers: list["PartyServer"] = field(default_factory=list)


def build_world(
    seed: int = 0,
    *,
    user_specs: Mapping[str, tuple[list[Attribute], Article]] | None = None,
    synonyms: SynonymTable | None = None,
    window: int = DEFAULT_FRESHNESS_WINDOW,
    threshold: float = DEFAULT_THRESHOLD,
    key_bits: int | None = None,
    keys: WorldKeys | None = None,
    split_ocp_is: bool = False,
) -> World:
    """Deterministic world: keys from the seed, demo users and articles by
    default.  ``key_bits=None`` uses small fast keys; pass a supported size
    for realistic material, or ``keys`` to reuse generated material.

    By default the verifier and the indexing system are co-located (one
    organization): the indexing system trusts the verifier key directly.
    With ``split_ocp_is`` the trust link is the same but tokens must be
    routed between distinct endpoints (exercised by the socket transport).
    """
    from .corpus import demo_synonym_table, demo_user_specs

    if user_specs is None:
        user_specs = demo_user_specs()
    if synonyms is None:
        synonyms = demo_synonym_table()
    if keys is None:
        keys = generate_world_keys(seed, user_specs.keys(), key_bits=key_bits)

    trace = Trace()
    clock = SimClock()
    ca = CertificationAuthority(keys.ca, trace)
    ocp = OwnershipCertificationParty(
        keys.ocp, ca.vk, trace, synonyms=synonyms, window=window,
        threshold=threshold, clock=clock,
    )
    indexing = IndexingSystem(ocp.vk, trace, clock=clock)

    users: dict[str, UserAgent] = {}
    articles: dict[str, Article] = {}
    for i, (name, (attributes, article)) in enumerate(user_specs.items()):
        if name not in keys.users:
            raise ScenarioError(f"no key material for user {name!r}")
        users[name] = UserAgent(name, keys.users[name], attributes,
                                synonyms=synonyms)
        articles[f"a{i + 1}"] = article
        indexing.index.add(article.url, article.content_digest)

    return World(
        ca=ca, ocp=ocp, indexing=indexing, users=users, articles=articles,
        adversary_key=keys.adversary, trace=trace, clock=clock,
        split_ocp_is=split_ocp_is,
    )


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------

class InProcessTransport:
    def __init__(self, world: World):
        self._world = world

    def claim(self, request: RemovalRequest) -> OwnershipToken | Acknowledgment:
        return self._world.ocp.handle_claim(request)

    def report(self, token: OwnershipToken, url: str) -> Acknowledgment:
        return self._world.indexing.handle_report(token, url)


class SocketTransport:
    """Routes claims and reports through served endpoints."""

    def __init__(self, ocp_address: tuple[str, int], is_address: tuple[str, int]):
        self.ocp_address = ocp_address
        self.is_address = is_address

    def claim(self, request: RemovalRequest) -> OwnershipToken | Acknowledgment:
        reply = roundtrip(self.ocp_address, encode_request(request))
        if peek_message_type(reply) == protocol.TYPE_TOKEN:
            return decode_token(reply)
        return decode_ack(reply)

    def report(self, token: OwnershipToken, url: str) -> Acknowledgment:
        reply = roundtrip(self.is_address, encode_report_message(token, url))
        return decode_ack(reply)


# ---------------------------------------------------------------------------
# Scenario execution
# ---------------------------------------------------------------------------

def _validate_scenario(scenario: Scenario, world: World) -> None:
    for step in scenario.steps:
        if step.sender not in world.users:
            raise ScenarioError(f"unknown sender {step.sender!r}")
        if step.kind not in _MESSAGE_RECEIVER:
            raise ScenarioError(f"unknown message kind {step.kind!r}")
        if _MESSAGE_RECEIVER[step.kind] != step.receiver:
            raise ScenarioError(
                f"{step.kind} goes to {_MESSAGE_RECEIVER[step.kind]}, "
                f"not {step.receiver!r}"
            )
        if step.kind != "REGISTER" and step.article_key not in world.articles:
            raise ScenarioError(f"unknown article {step.article_key!r}")
        if step.mutation is not None and step.mutation not in MUTATIONS:
            raise ScenarioError(f"unknown mutation {step.mutation!r}")


def _mutate_claim(
    request: RemovalRequest, mutation: str, world: World
) -> RemovalRequest | None:
    if mutation == "drop":
        return None
    if mutation == "tamper-signature":
        return replace(request, signature=request.signature ^ 1)
    if mutation == "tamper-timestamp":
        return replace(request, timestamp=request.timestamp + 7)
    if mutation == "tamper-attribute":
        # Keep the tampered attribute well-formed so it survives decoding;
        # only its value changes.
        attrs = list(request.claimed_attributes)
        victim = attrs[0]
        if victim.kind is AttributeKind.DATE:
            flipped = victim.date_value() + timedelta(days=1)
            attrs[0] = Attribute.date_attribute(victim.name, flipped)
        else:
            attrs[0] = Attribute(victim.name, victim.value + b"x", victim.kind)
        return replace(request, claimed_attributes=tuple(attrs))
    if mutation == "tamper-article":
        altered = Article(
            url=request.article.url,
            body=request.article.body + " tampered",
            publication_date=request.article.publication_date,
            images=request.article.images,
        )
        return replace(request, article=altered)
    if mutation == "substitute-key":
        # The adversary swaps in its own key and re-signs; it cannot forge
        # the victim's signature nor the authority's credentials.
        adv = world.adversary_key
        resigned = replace(request, user_key=adv.vk)
        signature = rsa_fdh.sign(adv, protocol.request_signing_bytes(resigned))
        return replace(resigned, signature=signature)
    return request


def _mutate_report(
    token: OwnershipToken, url: str, mutation: str, world: World
) -> tuple[OwnershipToken, str] | None:
    if mutation == "drop":
        return None
    if mutation == "tamper-signature":
        return replace(token, ocp_signature=token.ocp_signature ^ 1), url
    if mutation == "substitute-key":
        adv = world.adversary_key
        return replace(token, user_key=adv.vk), url
    if mutation == "tamper-article":
        return token, url + "?other"
    return token, url


def run_scenario(
    scenario: Scenario,
    world: World | None = None,
    *,
    transport: InProcessTransport | SocketTransport | None = None,
) -> Trace:
    """Execute a schedule against a world; returns the world's trace.

    Deterministic: the same scenario and world seed reproduce a byte-identical
    trace.  Mutations model the adversarial scheduler.
    """
    if world is None:
        world = build_world(scenario.seed)
    if transport is None:
        transport = InProcessTransport(world)
    _validate_scenario(scenario, world)

    ordered = list(scenario.steps)
    for i, step in enumerate(ordered):
        if step.mutation == "reorder" and i + 1 < len(ordered):
            ordered[i], ordered[i + 1] = ordered[i + 1], ordered[i]

    for step in ordered:
        world.clock.tick()
        user = world.users[step.sender]
        mutation = step.mutation or ""

        if step.kind == "REGISTER":
            if mutation == "drop":
                continue
            repeats = 2 if mutation == "duplicate" else 1
            for _ in range(repeats):
                user.register_with(world.ca)
            continue

        article = world.articles[step.article_key]
        if step.kind == "CLAIM":
            request = user.build_claim(article, world.ca.vk, world.clock())
            if request is None:
                continue
            world.trace.emit(Role.USER, EventType.CLAIMED,
                             key_digest(user.vk), article.content_digest)
            if mutation == "delay":
                world.clock.advance(world.ocp.replay_cache.window + 60)
            mutated = _mutate_claim(request, mutation, world) if mutation else request
            if mutated is None:
                continue
            repeats = 2 if mutation == "duplicate" else 1
            for _ in range(repeats):
                result = transport.claim(mutated)
                if isinstance(result, OwnershipToken):
                    user.accept_token(result)
            continue

        # REPORT
        token = user.token_for(article)
        if token is None:
            continue
        world.trace.emit(Role.USER, EventType.REPORTED,
                         key_digest(user.vk), article.content_digest)
        if mutation == "delay":
            world.clock.advance(world.ocp.replay_cache.window + 60)
        mutated_report = (
            _mutate_report(token, article.url, mutation, world)
            if mutation else (token, article.url)
        )
        if mutated_report is None:
            continue
        sent_token, sent_url = mutated_report
        repeats = 2 if mutation == "duplicate" else 1
        for _ in range(repeats):
            transport.report(sent_token, sent_url)

    return world.trace


# ---------------------------------------------------------------------------
# Socket serving
# ---------------------------------------------------------------------------

_FRAME_LEN_BYTES = 4
_MAX_FRAME = 16 * 1024 * 1024


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    got = 0
    while got < n:
        chunk = sock.recv(n - got)
        if not chunk:
            return None
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def send_frame(sock: socket.socket, payload: bytes) -> None:
    sock.sendall(len(payload).to_bytes(_FRAME_LEN_BYTES, "big") + payload)


def recv_frame(sock: socket.socket) -> bytes | None:
    header = _recv_exact(sock, _FRAME_LEN_BYTES)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    if length > _MAX_FRAME:
        raise WireFormatError("frame too large")
    payload = _recv_exact(sock, length)
    if payload is None:
        raise WireFormatError("truncated frame")
    return payload


def roundtrip(address: tuple[str, int], payload: bytes) -> bytes:
    with socket.create_connection(address, timeout=30) as sock:
        send_frame(sock, payload)
        reply = recv_frame(sock)
    if reply is None:
        raise ConnectionError("server closed connection without a reply")
    return reply


class PartyServer:
    """Threaded TCP server answering wire-format frames with a party handler.

    A malformed or truncated frame earns a failure acknowledgment (sent best
    effort) and closes that connection; the server keeps serving.
    """

    def __init__(self, handler: Callable[[bytes], bytes],
                 host: str = "127.0.0.1", port: int = 0):
        outer = self

        class _Handler(socketserver.BaseRequestHandler):
            def handle(self):
                while True:
                    try:
                        frame = recv_frame(self.request)
                    except WireFormatError:
                        error = Acknowledgment(AckStatus.FAILURE,
                                               RejectionCode.MALFORMED.value)
                        try:
                            send_frame(self.request, encode_ack(error))
                        except OSError:
                            pass
                        return
                    if frame is None:
                        return
                    reply = outer._handler(frame)
                    try:
                        send_frame(self.request, reply)
                    except OSError:
                        return

        class _Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._handler = handler
        self._server = _Server((host, port), _Handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return str(host), int(port)

    def start(self) -> "PartyServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "PartyServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(
    party: OwnershipCertificationParty | IndexingSystem,
    host: str = "127.0.0.1",
    port: int = 0,
) -> PartyServer:
    """Expose a party's frame handler on a TCP endpoint (not yet started)."""
    return PartyServer(party.handle_frame, host, port)
