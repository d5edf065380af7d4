"""Data-ownership toolkit for link-removal requests.

Certified user attributes are bound to a user's key by an issuing
authority, packed multiplicatively, and verified in a single modular
exponentiation; a deterministic matcher locates the attributes inside a
contested article; and a three-phase protocol (claim, token, report) lets
an indexing system delist a link only for a provably affected user.

Layers, bottom up: :mod:`oblivion.rsa_fdh` (signatures over a full-domain
hash), :mod:`oblivion.credentials` (attribute issuance, packing, batch
verification), :mod:`oblivion.matching` (article tagging and the
affectedness decision), :mod:`oblivion.protocol` (messages, verification
chain, tokens, replay protection), :mod:`oblivion.services` (runnable
parties, the simulator, trace properties, socket serving), and
:mod:`oblivion.bench` (performance experiments).
"""

from .credentials import (
    Attribute,
    AttributeKind,
    PackedSignature,
    SignedAttribute,
    ca_sign_attributes,
    pack,
    verify_attribute,
    verify_packed,
)
from .matching import (
    Article,
    Match,
    MatchKind,
    MatchReport,
    SynonymTable,
    disambiguate,
    extract_candidates,
    match_attributes,
    match_picture,
    tag_article,
)
from .protocol import (
    Acknowledgment,
    CannotClaimError,
    OwnershipToken,
    RejectionCode,
    RemovalRequest,
    ReplayCache,
    build_request,
    is_token_valid,
    issue_token,
    ocp_verify_request,
)
from .rsa_fdh import (
    ConfigurationError,
    FullDomainHash,
    MalformedSignatureError,
    SigningKey,
    VerificationKey,
    count_modexps,
    init,
    keygen,
    keypair_from_primes,
    sign,
    verify,
)
from .services import (
    CertificationAuthority,
    IndexingSystem,
    OwnershipCertificationParty,
    Scenario,
    Trace,
    TraceEvent,
    UserAgent,
    build_world,
    check_censorship_resistance,
    run_scenario,
    serve,
)

__version__ = "0.1.0"
