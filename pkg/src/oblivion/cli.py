"""Command-line entry points: issuer, user client, and benchmarks.

Exit codes are stable: 0 success, 1 protocol rejection (including
cannot-claim), 2 usage or I/O errors.  ``OBLIVION_HOME`` names the default
directory for keys and fixtures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import bench as bench_mod
from . import rsa_fdh
from .credentials import (
    Attribute,
    AttributeKind,
    CredentialError,
    load_signed_attribute,
    register_attribute_name,
    save_signed_attribute,
    ca_sign_attributes,
)
from .corpus import load_corpus, write_corpus
from .encoding import WireFormatError
from .matching import (
    SynonymTable,
    disambiguate,
    disambiguation_score,
    load_article,
    tag_article,
)
from .protocol import (
    Acknowledgment,
    CannotClaimError,
    OwnershipToken,
    build_request,
    encode_request,
    encode_token,
)
from .rsa_fdh import ConfigurationError

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2


def _home(value: str | None) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("OBLIVION_HOME", "~/.oblivion")).expanduser()


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in name.lower())


def load_attributes_json(path: Path) -> list[Attribute]:
    """Attribute descriptions: a JSON list of {name, kind, value | file}.

    Picture attributes reference their image with ``file`` (relative paths
    resolve against the JSON file).  Names are registered on load.
    """
    entries = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(entries, list):
        raise ValueError("attributes file must hold a JSON list")
    attrs = []
    for entry in entries:
        name = entry["name"]
        kind = AttributeKind(entry.get("kind", "text"))
        register_attribute_name(name)
        if kind is AttributeKind.PICTURE:
            image_path = Path(entry["file"])
            if not image_path.is_absolute():
                image_path = path.parent / image_path
            attrs.append(Attribute.picture_attribute(name, image_path.read_bytes()))
        elif kind is AttributeKind.DATE:
            attrs.append(Attribute.date_attribute(name, entry["value"]))
        else:
            attrs.append(Attribute.text_attribute(name, entry["value"]))
    return attrs


# ---------------------------------------------------------------------------
# oblivion-ca
# ---------------------------------------------------------------------------

def main_ca(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="oblivion-ca",
        description="Issuer: generate keys and certify user attributes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init", help="generate the issuer key pair")
    p_init.add_argument("bits", type=int,
                        choices=sorted(rsa_fdh.SUPPORTED_KEY_BITS))
    p_init.add_argument("--home", help="key directory (default $OBLIVION_HOME)")
    p_init.add_argument("--seed", type=int,
                        help="deterministic key generation (tests only)")

    p_cert = sub.add_parser("certify", help="sign attributes for a user key")
    p_cert.add_argument("user_key", help="user verification-key file")
    p_cert.add_argument("attrs", help="attributes JSON file")
    p_cert.add_argument("--home", help="issuer key directory")
    p_cert.add_argument("--out-dir", help="where to write .attr files "
                                          "(default: <home>/issued)")

    args = parser.parse_args(argv)
    home = _home(args.home)

    if args.command == "init":
        import random

        rng = random.Random(args.seed) if args.seed is not None else None
        try:
            sk, vk = rsa_fdh.keygen(args.bits, rng=rng)
        except ConfigurationError as exc:
            return _fail(EXIT_USAGE, str(exc))
        home.mkdir(parents=True, exist_ok=True)
        rsa_fdh.save_key(sk, home / "ca_signing.key")
        rsa_fdh.save_key(vk, home / "ca_verification.key")
        print(f"wrote {home / 'ca_signing.key'}")
        print(f"wrote {home / 'ca_verification.key'}")
        return EXIT_OK

    # certify
    try:
        sk = rsa_fdh.load_signing_key(home / "ca_signing.key")
        vk = rsa_fdh.load_verification_key(home / "ca_verification.key")
        sk = rsa_fdh.SigningKey(d=sk.d, modulus=sk.modulus, bits=sk.bits, vk=vk)
        user_vk = rsa_fdh.load_verification_key(args.user_key)
        attributes = load_attributes_json(Path(args.attrs))
    except (OSError, WireFormatError, ValueError, KeyError) as exc:
        return _fail(EXIT_USAGE, str(exc))
    try:
        signed = ca_sign_attributes(sk, user_vk, attributes)
    except CredentialError as exc:
        return _fail(EXIT_REJECTED, str(exc))
    out_dir = Path(args.out_dir) if args.out_dir else home / "issued"
    out_dir.mkdir(parents=True, exist_ok=True)
    for item in signed:
        path = out_dir / f"{_slug(item.attribute.name)}.attr"
        save_signed_attribute(item, path)
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oblivion-user
# ---------------------------------------------------------------------------

def _print_report(report, threshold: float) -> None:
    for match in report.matches:
        where = (f"image:{match.image_id}" if match.image_id is not None
                 else f"{match.start}-{match.end}")
        print(f"match\t{match.attribute_name}\t{match.kind.value}\t{where}\t"
              f"{match.matched_text!r}")
    for warning in report.warnings:
        print(f"warning\t{warning}")
    print(f"score\t{disambiguation_score(report):.4f}")
    verdict = "affected" if disambiguate(report, threshold) else "not-affected"
    print(f"verdict\t{verdict}\t(threshold {threshold})")


def main_user(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="oblivion-user",
        description="User client: tag articles and build removal claims.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tag = sub.add_parser("tag", help="show which attributes an article matches")
    p_tag.add_argument("article", help="article fixture file")
    p_tag.add_argument("--attrs", required=True, help="attributes JSON file")
    p_tag.add_argument("--synonyms", help="synonym table file")
    p_tag.add_argument("--threshold", type=float, default=0.5)

    p_claim = sub.add_parser("claim", help="build (and optionally submit) a claim")
    p_claim.add_argument("article", help="article fixture file")
    p_claim.add_argument("--attr-files", nargs="+", required=True,
                         help="signed attribute (.attr) files")
    p_claim.add_argument("--signing-key", required=True)
    p_claim.add_argument("--verification-key", required=True)
    p_claim.add_argument("--ca-verification", required=True)
    p_claim.add_argument("--synonyms", help="synonym table file")
    p_claim.add_argument("--out", help="write the encoded request here")
    p_claim.add_argument("--token-out", help="write a received token here")
    p_claim.add_argument("--ocp", help="submit to a served verifier host:port")
    p_claim.add_argument("--report-to", help="report to a served indexing "
                                             "system host:port")
    p_claim.add_argument("--local", action="store_true",
                         help="run the claim against an in-process verifier "
                              "and indexing system")
    p_claim.add_argument("--window", type=int, default=300,
                         help="freshness window for --local")
    p_claim.add_argument("--threshold", type=float, default=0.5,
                         help="affectedness threshold for --local")
    p_claim.add_argument("--now", type=int, help="claim timestamp (default: clock)")

    args = parser.parse_args(argv)

    try:
        article = load_article(args.article)
        synonyms = SynonymTable.load(args.synonyms) if args.synonyms else None
    except (OSError, ValueError) as exc:
        return _fail(EXIT_USAGE, str(exc))

    if args.command == "tag":
        try:
            attributes = load_attributes_json(Path(args.attrs))
            report = tag_article(article, attributes, synonyms)
        except (OSError, ValueError) as exc:
            return _fail(EXIT_USAGE, str(exc))
        _print_report(report, args.threshold)
        return EXIT_OK

    # claim
    try:
        signed = [load_signed_attribute(p) for p in args.attr_files]
        sk = rsa_fdh.load_signing_key(args.signing_key)
        vk = rsa_fdh.load_verification_key(args.verification_key)
        sk = rsa_fdh.SigningKey(d=sk.d, modulus=sk.modulus, bits=sk.bits, vk=vk)
        ca_vk = rsa_fdh.load_verification_key(args.ca_verification)
    except (OSError, WireFormatError, ValueError) as exc:
        return _fail(EXIT_USAGE, str(exc))

    now = args.now if args.now is not None else int(time.time())
    report = tag_article(article, [s.attribute for s in signed], synonyms)
    try:
        request = build_request(sk, vk, signed, article, report, now, ca_key=ca_vk)
    except CannotClaimError as exc:
        return _fail(EXIT_REJECTED, f"cannot claim: {exc}")

    claimed = ", ".join(a.name for a in request.claimed_attributes)
    print(f"claiming {len(request.claimed_attributes)} attribute(s): {claimed}")
    if args.out:
        Path(args.out).write_bytes(encode_request(request))
        print(f"wrote {args.out}")

    result: OwnershipToken | Acknowledgment | None = None
    ack: Acknowledgment | None = None
    if args.local:
        from .services import (
            IndexingSystem, OwnershipCertificationParty, Trace,
        )

        trace = Trace()
        ocp_sk, _ = rsa_fdh.keygen(512)
        ocp = OwnershipCertificationParty(
            ocp_sk, ca_vk, trace, synonyms=synonyms, window=args.window,
            threshold=args.threshold, clock=lambda: now,
        )
        indexing = IndexingSystem(ocp.vk, trace, clock=lambda: now)
        indexing.index.add(article.url, article.content_digest)
        result = ocp.handle_claim(request, now)
        if isinstance(result, OwnershipToken):
            ack = indexing.handle_report(result, article.url, now)
    elif args.ocp:
        from .services import SocketTransport

        host, _, port = args.ocp.partition(":")
        transport = SocketTransport((host, int(port)), ("", 0))
        result = transport.claim(request)
        if isinstance(result, OwnershipToken) and args.report_to:
            rhost, _, rport = args.report_to.partition(":")
            transport = SocketTransport((host, int(port)), (rhost, int(rport)))
            ack = transport.report(result, article.url)

    if result is None:
        return EXIT_OK
    if isinstance(result, Acknowledgment):
        return _fail(EXIT_REJECTED, f"claim rejected: {result.reason}")
    print(f"token issued: expires {result.expiry} for {result.article_url}")
    if args.token_out:
        Path(args.token_out).write_bytes(encode_token(result))
        print(f"wrote {args.token_out}")
    if ack is not None:
        if not ack.ok:
            return _fail(EXIT_REJECTED, f"report failed: {ack.reason}")
        print("report acknowledged: success")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oblivion-bench
# ---------------------------------------------------------------------------

EXPERIMENTS = ("certify", "pack", "sign", "verify-msg", "verify-attrs",
               "throughput")


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _corpus_articles(args) -> list:
    corpus_dir = Path(args.corpus) if args.corpus else _home(None) / "corpus"
    if not corpus_dir.exists():
        print(f"generating fixture corpus in {corpus_dir} ...", file=sys.stderr)
        write_corpus(corpus_dir)
    return load_corpus(corpus_dir)


def main_bench(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="oblivion-bench",
        description="Performance experiments; one CSV row per parameter point.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--bits", default="512,1024,2048,4096",
                        help="comma-separated key sizes (single value for "
                             "sign/verify-msg/throughput)")
    parser.add_argument("--attrs", type=int, default=50,
                        help="maximum attribute count (sweeps 1..N)")
    parser.add_argument("--requests", default="2000",
                        help="comma-separated request counts for throughput")
    parser.add_argument("--reps", type=int, default=0,
                        help="repetitions per point (0 = experiment default)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="CSV output path (default stdout)")
    parser.add_argument("--corpus", help="article fixture directory "
                                         "(default $OBLIVION_HOME/corpus; "
                                         "generated when missing)")
    parser.add_argument("--articles", type=int, default=150,
                        help="articles to use for article-based experiments")
    parser.add_argument("--window", type=int, default=300,
                        help="accepted for parity with the served parties; "
                             "compute benchmarks exclude the replay path")
    parser.add_argument("--threshold", type=float, default=0.5,
                        help="accepted for parity with the served parties")
    args = parser.parse_args(argv)

    bits_list = _parse_int_list(args.bits)
    for bits in bits_list:
        if bits not in rsa_fdh.SUPPORTED_KEY_BITS:
            return _fail(EXIT_USAGE, f"unsupported key size {bits}")
    attr_counts = list(range(1, args.attrs + 1))
    reps = args.reps

    if args.experiment == "certify":
        results = bench_mod.run_certify(bits_list, attr_counts, reps or 3,
                                        args.seed)
    elif args.experiment == "pack":
        results = bench_mod.run_pack(bits_list, attr_counts, reps or 100,
                                     args.seed)
    elif args.experiment == "verify-attrs":
        results = bench_mod.run_verify_attrs(bits_list, attr_counts, reps or 10,
                                             args.seed)
    else:
        articles = _corpus_articles(args)[: args.articles]
        if not articles:
            return _fail(EXIT_USAGE, "fixture corpus is empty")
        bits = bits_list[0]
        if args.experiment == "sign":
            results = bench_mod.run_sign(articles, bits, reps or 10, args.seed)
        elif args.experiment == "verify-msg":
            results = bench_mod.run_verify_msg(articles, bits, reps or 10,
                                               args.seed)
        else:  # throughput
            counts = _parse_int_list(args.requests)
            results = bench_mod.run_throughput(
                counts, articles, attrs=min(args.attrs, 50), bits=bits,
                seed=args.seed,
            )

    csv_text = bench_mod.results_to_csv(results)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(csv_text, end="")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main_bench())
