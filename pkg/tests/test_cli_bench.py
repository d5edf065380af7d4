"""Command-line entry points and the benchmark harness."""

from __future__ import annotations

import csv
import io
import json
import random

import pytest

from oblivion import bench, rsa_fdh
from oblivion.cli import main_bench, main_ca, main_user
from oblivion.corpus import (
    DEMO_ARTICLE_TEXT,
    DEMO_SYNONYMS_TEXT,
    generate_corpus,
    load_corpus,
    write_corpus,
)
from oblivion.credentials import load_signed_attribute, verify_attribute

ALICE_ATTRS = [
    {"name": "Full Name", "kind": "text", "value": "Alice Schmidt"},
    {"name": "Nationality", "kind": "text", "value": "German"},
    {"name": "Date of Birth", "kind": "date", "value": "29.07.1984"},
    {"name": "Place of Birth", "kind": "text", "value": "Hamburg"},
]


@pytest.fixture()
def home(tmp_path, monkeypatch):
    monkeypatch.setenv("OBLIVION_HOME", str(tmp_path / "home"))
    return tmp_path / "home"


@pytest.fixture()
def alice_files(tmp_path):
    article = tmp_path / "article.txt"
    article.write_text(DEMO_ARTICLE_TEXT, encoding="utf-8")
    attrs = tmp_path / "attrs.json"
    attrs.write_text(json.dumps(ALICE_ATTRS), encoding="utf-8")
    synonyms = tmp_path / "synonyms.tsv"
    synonyms.write_text(DEMO_SYNONYMS_TEXT, encoding="utf-8")
    return article, attrs, synonyms


def _certified_home(home, tmp_path, alice_files):
    _, attrs, _ = alice_files
    assert main_ca(["init", "512", "--seed", "11"]) == 0
    user_sk, user_vk = rsa_fdh.keygen(512, rng=random.Random(12))
    rsa_fdh.save_key(user_sk, tmp_path / "user_signing.key")
    rsa_fdh.save_key(user_vk, tmp_path / "user_verification.key")
    assert main_ca(["certify", str(tmp_path / "user_verification.key"),
                    str(attrs)]) == 0
    issued = sorted((home / "issued").glob("*.attr"))
    return user_sk, user_vk, issued


# ---------------------------------------------------------------------------
# oblivion-ca
# ---------------------------------------------------------------------------

def test_ca_init_writes_loadable_keys(home):
    assert main_ca(["init", "512", "--seed", "3"]) == 0
    sk = rsa_fdh.load_signing_key(home / "ca_signing.key")
    vk = rsa_fdh.load_verification_key(home / "ca_verification.key")
    assert sk.modulus == vk.modulus
    assert vk.modulus.bit_length() == 512


def test_ca_certify_emits_verifiable_files(home, tmp_path, alice_files):
    _, _, issued = _certified_home(home, tmp_path, alice_files)
    assert len(issued) == len(ALICE_ATTRS)
    ca_vk = rsa_fdh.load_verification_key(home / "ca_verification.key")
    for path in issued:
        assert verify_attribute(ca_vk, load_signed_attribute(path))


def test_ca_certify_duplicate_names_rejected(home, tmp_path, alice_files):
    _, attrs_path, _ = alice_files
    duplicated = json.loads(attrs_path.read_text()) + [ALICE_ATTRS[0]]
    attrs_path.write_text(json.dumps(duplicated), encoding="utf-8")
    assert main_ca(["init", "512", "--seed", "4"]) == 0
    user_sk, user_vk = rsa_fdh.keygen(512, rng=random.Random(5))
    rsa_fdh.save_key(user_vk, tmp_path / "uvk.key")
    assert main_ca(["certify", str(tmp_path / "uvk.key"), str(attrs_path)]) == 1


def test_ca_certify_missing_files_is_usage_error(home, tmp_path):
    assert main_ca(["init", "512", "--seed", "6"]) == 0
    assert main_ca(["certify", str(tmp_path / "missing.key"),
                    str(tmp_path / "missing.json")]) == 2


# ---------------------------------------------------------------------------
# oblivion-user
# ---------------------------------------------------------------------------

def test_user_tag_prints_expected_matches(home, alice_files, capsys):
    article, attrs, synonyms = alice_files
    assert main_user(["tag", str(article), "--attrs", str(attrs),
                      "--synonyms", str(synonyms)]) == 0
    out = capsys.readouterr().out
    assert "Full Name\texact" in out
    assert "Nationality\tsynonym" in out
    assert "Date of Birth\tage-derived" in out
    assert "verdict\taffected" in out


def test_user_claim_local_end_to_end(home, tmp_path, alice_files, capsys):
    article, _, synonyms = alice_files
    user_sk, user_vk, issued = _certified_home(home, tmp_path, alice_files)
    request_out = tmp_path / "request.bin"
    code = main_user([
        "claim", str(article),
        "--attr-files", *[str(p) for p in issued],
        "--signing-key", str(tmp_path / "user_signing.key"),
        "--verification-key", str(tmp_path / "user_verification.key"),
        "--ca-verification", str(home / "ca_verification.key"),
        "--synonyms", str(synonyms),
        "--out", str(request_out),
        "--local",
    ])
    out = capsys.readouterr().out
    assert code == 0, out
    assert "claiming 3 attribute(s)" in out
    assert "token issued" in out
    assert "report acknowledged: success" in out
    from oblivion.protocol import decode_request

    decoded = decode_request(request_out.read_bytes())
    assert len(decoded.claimed_attributes) == 3


def test_user_claim_without_matches_exits_cannot_claim(home, tmp_path,
                                                       alice_files):
    article, _, synonyms = alice_files
    article.write_text("url: https://x.test/a\ndate: 01.01.2020\n\n"
                       "nothing about anyone here\n", encoding="utf-8")
    user_sk, user_vk, issued = _certified_home(home, tmp_path, alice_files)
    code = main_user([
        "claim", str(article),
        "--attr-files", *[str(p) for p in issued],
        "--signing-key", str(tmp_path / "user_signing.key"),
        "--verification-key", str(tmp_path / "user_verification.key"),
        "--ca-verification", str(home / "ca_verification.key"),
        "--synonyms", str(synonyms),
    ])
    assert code == 1


# ---------------------------------------------------------------------------
# Corpus fixtures
# ---------------------------------------------------------------------------

def test_corpus_statistics():
    articles = generate_corpus(count=60, seed=7)
    words = [len(a.body.split()) for a in articles]
    assert min(words) >= 1_000 and max(words) <= 10_000
    mean = sum(words) / len(words)
    assert 1_400 <= mean <= 2_600  # near the 1.9K target


def test_corpus_write_load_roundtrip(tmp_path):
    write_corpus(tmp_path / "corpus", count=4, seed=9)
    loaded = load_corpus(tmp_path / "corpus")
    assert len(loaded) == 4
    regenerated = generate_corpus(count=4, seed=9)
    assert [a.body for a in loaded] == [a.body for a in regenerated]
    assert [a.content_digest for a in loaded] == [a.content_digest
                                                  for a in regenerated]


# ---------------------------------------------------------------------------
# Benchmarks
# ---------------------------------------------------------------------------

def _rows(csv_text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(csv_text)))


def test_bench_certify_csv_schema(home, tmp_path):
    out = tmp_path / "certify.csv"
    assert main_bench(["certify", "--bits", "512", "--attrs", "3",
                       "--reps", "1", "--seed", "5", "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert [r["attrs"] for r in rows] == ["1", "2", "3"]
    assert set(rows[0]) == {"experiment", "bits", "attrs", "reps",
                            "mean_s", "min_s", "max_s"}
    assert all(r["experiment"] == "certify" for r in rows)


def test_bench_nontiming_columns_reproducible(tmp_path):
    results_a = bench.run_certify([512], [1, 2], reps=1, seed=42)
    results_b = bench.run_certify([512], [1, 2], reps=1, seed=42)
    strip = lambda rows: [
        {k: v for k, v in r.row().items() if not k.endswith("_s")}
        for r in rows
    ]
    assert strip(results_a) == strip(results_b)


def test_bench_verify_attrs_counters(tmp_path):
    results = bench.run_verify_attrs([512], [1, 2, 5], reps=1, seed=5)
    for result in results:
        count = result.params["attrs"]
        assert result.extra["packed_modexps"] == 1
        assert result.extra["individual_modexps"] == count


def test_bench_pack_and_sign_smoke(tmp_path):
    packs = bench.run_pack([512], [1, 2], reps=2, seed=5)
    assert len(packs) == 2
    articles = generate_corpus(count=2, seed=7)
    signs = bench.run_sign(articles, bits=512, reps=1, seed=5)
    verifies = bench.run_verify_msg(articles, bits=512, reps=1, seed=5)
    assert len(signs) == len(verifies) == 2
    assert all(r.params["words"] >= 1000 for r in signs)


def test_bench_throughput_smoke(tmp_path):
    articles = generate_corpus(count=3, seed=7)
    [result] = bench.run_throughput([30], articles, attrs=5, bits=512, seed=5)
    assert result.params["requests"] == 30
    assert float(result.extra["req_per_s"]) > 0
    share = float(result.extra["attr_share"])
    assert 0.0 < share < 1.0


def test_bench_unknown_experiment_is_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main_bench(["warp-speed"])
    assert excinfo.value.code == 2


def test_bench_fit_linear_perfect_line():
    slope, intercept, r2 = bench.fit_linear([1, 2, 3, 4], [2, 4, 6, 8])
    assert abs(slope - 2) < 1e-9 and abs(intercept) < 1e-9 and r2 == pytest.approx(1.0)


def test_message_signing_time_order_of_magnitude():
    """Signing a claim over an average-length article with a 1024-bit key is
    a few milliseconds at most (order check, not an exact figure)."""
    articles = [a for a in generate_corpus(count=20, seed=7)
                if 1_500 <= len(a.body.split()) <= 2_400][:1]
    assert articles
    [result] = bench.run_sign(articles, bits=1024, reps=5, seed=1)
    assert result.minimum < 0.1, f"signing took {result.minimum:.3f}s"


def test_packing_time_order_of_magnitude():
    """Packing 50 signatures is multiplication-only and stays in the
    sub-hundred-millisecond range even at 4096 bits."""
    [result] = bench.run_pack([4096], [50], reps=3, seed=1)
    assert result.minimum < 0.1, f"packing took {result.minimum:.3f}s"
