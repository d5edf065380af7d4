"""Performance experiments: certification, packing, signing, verification,
and request throughput, with CSV output.

Methodology: warm-up iteration excluded, monotonic wall clock, single
thread by default, and no network in any compute measurement.  Counter
columns (modular exponentiations) are hardware-independent.  With a fixed
seed all non-timing columns are reproducible.
"""

from __future__ import annotations

import csv
import random
import time
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import rsa_fdh
from .credentials import (
    Attribute,
    ca_sign_attributes,
    pack,
    register_attribute_name,
    verify_attribute,
    verify_packed,
)
from .matching import Article, Match, MatchKind, MatchReport
from .protocol import (
    RemovalRequest,
    build_request,
    request_signing_bytes,
)
from .rsa_fdh import RANDOM_EXPONENT, count_modexps, keygen

DEFAULT_BITS_SWEEP = (512, 1024, 2048, 4096)
DEFAULT_MAX_ATTRS = 50
DEFAULT_REPS = 100

_FIELD_POOL_SIZE = 64


def _synthetic_names() -> list[str]:
    names = [f"Field-{i:02d}" for i in range(_FIELD_POOL_SIZE)]
    for name in names:
        register_attribute_name(name)
    return names


def synthetic_attributes(count: int, rng: random.Random) -> list[Attribute]:
    """Short random text attributes drawn from a registered name pool."""
    names = _synthetic_names()
    if count > len(names):
        raise ValueError(f"at most {len(names)} synthetic attributes")
    return [
        Attribute.text_attribute(names[i], rng.getrandbits(64).to_bytes(8, "big").hex())
        for i in range(count)
    ]


@dataclass
class BenchResult:
    """One parameter point: identifying params, samples, counter extras."""

    experiment: str
    params: dict[str, object]
    samples: list[float]
    extra: dict[str, object] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return sum(self.samples) / len(self.samples)

    @property
    def minimum(self) -> float:
        return min(self.samples)

    @property
    def maximum(self) -> float:
        return max(self.samples)

    def row(self) -> dict[str, object]:
        return {
            "experiment": self.experiment,
            **self.params,
            "reps": len(self.samples),
            "mean_s": f"{self.mean:.9f}",
            "min_s": f"{self.minimum:.9f}",
            "max_s": f"{self.maximum:.9f}",
            **self.extra,
        }


def measure(fn: Callable[[], object], reps: int) -> list[float]:
    """Run once unrecorded, then time ``reps`` runs."""
    fn()
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return samples


def measure_sweep(
    point_fns: dict[object, Callable[[], object]], reps: int
) -> dict[object, list[float]]:
    """Time a parameter sweep with repetitions interleaved across points.

    Background-load bursts then touch every point roughly equally instead of
    poisoning a few, which matters when fitting scaling curves.
    """
    for fn in point_fns.values():  # warm-up round, unrecorded
        fn()
    samples: dict[object, list[float]] = {key: [] for key in point_fns}
    for _ in range(reps):
        for key, fn in point_fns.items():
            start = time.perf_counter()
            fn()
            samples[key].append(time.perf_counter() - start)
    return samples


def fit_linear(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, r_squared)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    predicted = slope * x + intercept
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_certify(
    bits_sweep: Iterable[int] = DEFAULT_BITS_SWEEP,
    attr_counts: Iterable[int] | None = None,
    reps: int = 3,
    seed: int = 0,
) -> list[BenchResult]:
    """Time signing l attributes for one user at each key size."""
    attr_counts = list(attr_counts or range(1, DEFAULT_MAX_ATTRS + 1))
    results = []
    for bits in bits_sweep:
        rng = random.Random(seed)
        ca_sk, _ = keygen(bits, rng=rng)
        _, user_vk = keygen(bits, rng=rng)
        attrs = synthetic_attributes(max(attr_counts), rng)
        points = {
            count: (lambda subset=attrs[:count]:
                    ca_sign_attributes(ca_sk, user_vk, subset))
            for count in attr_counts
        }
        samples = measure_sweep(points, reps)
        results.extend(
            BenchResult("certify", {"bits": bits, "attrs": count},
                        samples[count])
            for count in attr_counts
        )
    return results


def run_pack(
    bits_sweep: Iterable[int] = DEFAULT_BITS_SWEEP,
    attr_counts: Iterable[int] | None = None,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
) -> list[BenchResult]:
    """Time packing l signed attributes (multiplications only)."""
    attr_counts = list(attr_counts or range(1, DEFAULT_MAX_ATTRS + 1))
    results = []
    for bits in bits_sweep:
        rng = random.Random(seed)
        ca_sk, ca_vk = keygen(bits, rng=rng)
        _, user_vk = keygen(bits, rng=rng)
        signed = ca_sign_attributes(
            ca_sk, user_vk, synthetic_attributes(max(attr_counts), rng)
        )
        points = {
            count: (lambda subset=signed[:count]: pack(ca_vk, subset))
            for count in attr_counts
        }
        samples = measure_sweep(points, reps)
        results.extend(
            BenchResult("pack", {"bits": bits, "attrs": count}, samples[count])
            for count in attr_counts
        )
    return results


def _claim_bytes_for(article: Article, bits: int, rng: random.Random) -> tuple:
    """A realistic signed-claim byte string for an article, plus its keys."""
    ca_sk, ca_vk = keygen(bits, rng=rng)
    user_sk, user_vk = keygen(bits, public_exponent=RANDOM_EXPONENT, rng=rng)
    attrs = synthetic_attributes(5, rng)
    signed = ca_sign_attributes(ca_sk, user_vk, attrs)
    report = _synthetic_report(article, attrs)
    request = build_request(user_sk, user_vk, signed, article, report,
                            now=1_700_000_000, ca_key=ca_vk)
    return request, user_sk, user_vk, ca_vk


def _synthetic_report(article: Article, attrs: list[Attribute]) -> MatchReport:
    # Spans point at the body start; sufficient for size-realistic messages.
    matches = tuple(
        Match(a.name, MatchKind.EXACT, 0, min(4, len(article.body.encode()) ),
              None, article.body[:4])
        for a in attrs
    )
    return MatchReport(
        article_digest=article.content_digest,
        claimed_attributes=tuple(a.name for a in attrs),
        matches=matches,
    )


def run_sign(
    articles: Sequence[Article],
    bits: int = 1024,
    reps: int = 10,
    seed: int = 0,
) -> list[BenchResult]:
    """Time signing the claim message for each article (full-size exponent)."""
    rng = random.Random(seed)
    results = []
    for i, article in enumerate(articles):
        request, user_sk, _, _ = _claim_bytes_for(article, bits, rng)
        message = request_signing_bytes(request)
        samples = measure(lambda: rsa_fdh.sign(user_sk, message), reps)
        results.append(BenchResult(
            "sign",
            {"bits": bits, "article": i,
             "words": len(article.body.split())},
            samples,
        ))
    return results


def run_verify_msg(
    articles: Sequence[Article],
    bits: int = 1024,
    reps: int = 10,
    seed: int = 0,
) -> list[BenchResult]:
    """Time verifying the claim-message signature for each article."""
    rng = random.Random(seed)
    results = []
    for i, article in enumerate(articles):
        request, _, user_vk, _ = _claim_bytes_for(article, bits, rng)
        message = request_signing_bytes(request)
        signature = request.signature
        samples = measure(lambda: rsa_fdh.verify(user_vk, signature, message), reps)
        results.append(BenchResult(
            "verify-msg",
            {"bits": bits, "article": i,
             "words": len(article.body.split())},
            samples,
        ))
    return results


def run_verify_attrs(
    bits_sweep: Iterable[int] = DEFAULT_BITS_SWEEP,
    attr_counts: Iterable[int] | None = None,
    reps: int = 10,
    seed: int = 0,
) -> list[BenchResult]:
    """Packed versus individual verification of l attributes.

    Timing columns cover the packed check; the counter columns record
    modular exponentiations for both routes (always 1 versus l).
    """
    attr_counts = list(attr_counts or range(1, DEFAULT_MAX_ATTRS + 1))
    results = []
    for bits in bits_sweep:
        rng = random.Random(seed)
        ca_sk, ca_vk = keygen(bits, rng=rng)
        _, user_vk = keygen(bits, rng=rng)
        attrs = synthetic_attributes(max(attr_counts), rng)
        signed = ca_sign_attributes(ca_sk, user_vk, attrs)
        for count in attr_counts:
            subset_attrs = attrs[:count]
            packed = pack(ca_vk, signed[:count])
            samples = measure(
                lambda: verify_packed(ca_vk, user_vk, packed, subset_attrs), reps
            )
            with count_modexps() as packed_ops:
                assert verify_packed(ca_vk, user_vk, packed, subset_attrs)
            with count_modexps() as individual_ops:
                assert all(verify_attribute(ca_vk, sa) for sa in signed[:count])
            start = time.perf_counter()
            for sa in signed[:count]:
                verify_attribute(ca_vk, sa)
            individual_s = time.perf_counter() - start
            results.append(BenchResult(
                "verify-attrs", {"bits": bits, "attrs": count}, samples,
                extra={
                    "packed_modexps": packed_ops.count,
                    "individual_modexps": individual_ops.count,
                    "individual_s": f"{individual_s:.9f}",
                },
            ))
    return results


def build_throughput_requests(
    count: int,
    articles: Sequence[Article],
    attrs: int = 20,
    bits: int = 1024,
    seed: int = 0,
    users: int = 8,
) -> tuple[list[RemovalRequest], rsa_fdh.VerificationKey]:
    """Pre-build signed requests over a small user pool.

    User keys use random full-size exponents (the general key-generation
    contract), which makes message verification the dominant cost; the
    issuer key keeps the small default exponent.
    """
    rng = random.Random(seed)
    ca_sk, ca_vk = keygen(bits, rng=rng)
    pool = []
    for _ in range(users):
        user_sk, user_vk = keygen(bits, public_exponent=RANDOM_EXPONENT, rng=rng)
        attributes = synthetic_attributes(attrs, rng)
        signed = ca_sign_attributes(ca_sk, user_vk, attributes)
        pool.append((user_sk, user_vk, attributes, signed))
    requests = []
    for i in range(count):
        user_sk, user_vk, attributes, signed = pool[i % len(pool)]
        article = articles[i % len(articles)]
        report = _synthetic_report(article, attributes)
        requests.append(build_request(
            user_sk, user_vk, signed, article, report,
            now=1_700_000_000 + i, ca_key=ca_vk,
        ))
    return requests, ca_vk


def run_throughput(
    request_counts: Iterable[int],
    articles: Sequence[Article],
    attrs: int = 20,
    bits: int = 1024,
    seed: int = 0,
) -> list[BenchResult]:
    """Requests verified per second: message signature plus packed attributes.

    Matches the compute-only protocol cost (no matching, no network); the
    msg/attr split is reported so the cost structure is visible.
    """
    counts = sorted(set(request_counts))
    requests, ca_vk = build_throughput_requests(
        max(counts), articles, attrs=attrs, bits=bits, seed=seed
    )
    results = []
    for count in counts:
        msg_time = 0.0
        attr_time = 0.0
        for request in requests[:count]:
            t0 = time.perf_counter()
            ok_msg = rsa_fdh.verify(request.user_key, request.signature,
                                    request_signing_bytes(request))
            t1 = time.perf_counter()
            ok_attrs = verify_packed(ca_vk, request.user_key,
                                     request.packed_signature,
                                     request.claimed_attributes)
            t2 = time.perf_counter()
            if not (ok_msg and ok_attrs):
                raise RuntimeError("honest benchmark request failed to verify")
            msg_time += t1 - t0
            attr_time += t2 - t1
        total = msg_time + attr_time
        results.append(BenchResult(
            "throughput", {"bits": bits, "attrs": attrs, "requests": count},
            [total],
            extra={
                "req_per_s": f"{count / total:.2f}",
                "msg_verify_s": f"{msg_time:.9f}",
                "attr_verify_s": f"{attr_time:.9f}",
                "attr_share": f"{attr_time / total:.4f}",
            },
        ))
    return results


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def results_to_csv(results: Sequence[BenchResult]) -> str:
    if not results:
        return ""
    header = list(results[0].row().keys())
    out = StringIO()
    writer = csv.DictWriter(out, fieldnames=header)
    writer.writeheader()
    for result in results:
        writer.writerow(result.row())
    return out.getvalue()


def write_csv(results: Sequence[BenchResult], path: Path | str) -> None:
    Path(path).write_text(results_to_csv(results), encoding="utf-8")
