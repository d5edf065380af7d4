"""Matching engine: extraction, synonym and age matching, disambiguation."""

from __future__ import annotations

import random
from dataclasses import replace
from datetime import date, timedelta

import pytest

from oblivion.corpus import (
    DEMO_PICTURE,
    demo_article,
    demo_attributes,
    demo_synonym_table,
    generate_corpus,
)
from oblivion.credentials import Attribute
from oblivion.matching import (
    Article,
    Candidate,
    Category,
    Match,
    MatchKind,
    MatchReport,
    SynonymTable,
    compute_article_digest,
    disambiguate,
    disambiguation_score,
    extract_candidates,
    floor_age,
    format_article,
    match_attributes,
    match_picture,
    normalize,
    parse_article,
    span_text,
    tag_article,
)


def _age_oracle(born: date, on: date) -> int:
    """Independent calendar computation: count anniversaries that have
    occurred, stepping year by year (Feb 29 completes on Mar 1)."""
    age = 0
    while True:
        year = born.year + age + 1
        try:
            anniversary = born.replace(year=year)
        except ValueError:
            anniversary = date(year, 3, 1)
        if anniversary <= on:
            age += 1
        else:
            return age


# ---------------------------------------------------------------------------
# Articles and fixtures
# ---------------------------------------------------------------------------

def test_article_fixture_roundtrip():
    article = demo_article()
    assert article.url.startswith("https://")
    assert article.publication_date == date(2014, 10, 20)
    again = parse_article(format_article(article))
    assert again == article


def test_article_digest_recomputable():
    article = demo_article()
    assert article.content_digest == compute_article_digest(article.body,
                                                            article.images)
    with_image = Article(url=article.url, body=article.body,
                         publication_date=article.publication_date,
                         images=(("img-1", DEMO_PICTURE),))
    assert with_image.content_digest != article.content_digest


def test_parse_article_rejects_unknown_header():
    with pytest.raises(ValueError):
        parse_article("url: x\nauthor: y\n\nbody")


# ---------------------------------------------------------------------------
# Candidate extraction
# ---------------------------------------------------------------------------

def test_demo_article_candidates():
    candidates = extract_candidates(demo_article())
    pairs = {(c.text.replace("\n", " "), c.category) for c in candidates}
    assert ("Alice Schmidt", Category.PERSON) in pairs
    assert ("Germany", Category.LOCATION) in pairs
    assert ("citizen of Germany", Category.OTHER) in pairs
    assert ("30 years old", Category.DATE) in pairs
    assert ("18.10.2014", Category.DATE) in pairs


def test_plain_text_yields_no_candidates():
    article = Article(url="u", body="hello world without names or dates")
    assert extract_candidates(article) == []
    assert extract_candidates(Article(url="u", body="   ")) == []


def test_candidate_spans_are_byte_offsets():
    body = "Über allem stand Jürgen Müßig, ein Bäcker aus München."
    article = Article(url="u", body=body)
    raw = body.encode("utf-8")
    candidates = extract_candidates(article)
    assert any(c.text == "Jürgen Müßig" for c in candidates)
    for cand in candidates:
        assert raw[cand.start:cand.end].decode("utf-8") == cand.text


def test_candidates_non_overlapping_per_category():
    article = demo_article()
    per_category: dict[Category, list[Candidate]] = {}
    for cand in extract_candidates(article):
        per_category.setdefault(cand.category, []).append(cand)
    for group in per_category.values():
        ordered = sorted(group, key=lambda c: c.start)
        for left, right in zip(ordered, ordered[1:]):
            assert left.end <= right.start


def test_extraction_deterministic():
    article = demo_article()
    assert extract_candidates(article) == extract_candidates(article)


def test_corpus_candidate_counts_in_observed_range():
    articles = [a for a in generate_corpus(count=40, seed=7)
                if 1_600 <= len(a.body.split()) <= 2_200]
    assert articles, "corpus should contain average-length articles"
    for article in articles[:3]:
        unique = {c.text for c in extract_candidates(article)}
        assert 43 <= len(unique) <= 590


# ---------------------------------------------------------------------------
# Synonym table
# ---------------------------------------------------------------------------

def test_synonym_table_parse_and_lookup():
    table = demo_synonym_table()
    phrases = table.phrases_for("German")
    assert normalize("citizen of Germany") in phrases
    assert normalize("germany") in phrases
    # case-insensitive lookup, symmetric from any member
    assert table.phrases_for("GERMAN") == phrases
    assert table.phrases_for("Citizen of Germany") == phrases
    assert table.phrases_for("Swedish") == frozenset()


def test_synonym_table_file_roundtrip(tmp_path):
    path = tmp_path / "synonyms.tsv"
    path.write_text("German\tcitizen of Germany|Germany\n", encoding="utf-8")
    table = SynonymTable.load(path)
    assert normalize("citizen of Germany") in table.phrases_for("German")
    with pytest.raises(ValueError):
        SynonymTable.parse("no tab separator here\n")


# ---------------------------------------------------------------------------
# Attribute matching
# ---------------------------------------------------------------------------

def test_demo_matches_exact_synonym_age():
    report = tag_article(demo_article(), demo_attributes(), demo_synonym_table())
    kinds = {m.attribute_name: m.kind for m in report.matches}
    assert kinds == {
        "Full Name": MatchKind.EXACT,
        "Nationality": MatchKind.SYNONYM,
        "Date of Birth": MatchKind.AGE_DERIVED,
    }
    assert len(report.matches) == 3
    assert report.claimed_attributes == tuple(a.name for a in demo_attributes())


def test_nationality_synonym_match_text():
    report = tag_article(demo_article(), demo_attributes(), demo_synonym_table())
    nationality = next(m for m in report.matches
                       if m.attribute_name == "Nationality")
    assert normalize(nationality.matched_text) == normalize("citizen of Germany")


def test_age_example_from_demo_dates():
    assert floor_age(date(1984, 7, 29), date(2014, 10, 20)) == 30


def test_no_matches_for_foreign_attributes():
    attrs = [Attribute.text_attribute("Full Name", "Someone Else")]
    report = tag_article(demo_article(), attrs, demo_synonym_table())
    assert report.matches == ()


def test_match_spans_reproduce_text():
    article = demo_article()
    report = tag_article(article, demo_attributes(), demo_synonym_table())
    for match in report.matches:
        assert span_text(article, match) == match.matched_text


def test_exact_match_is_sound():
    article = demo_article()
    report = tag_article(article, demo_attributes(), demo_synonym_table())
    for match in report.matches:
        if match.kind is MatchKind.EXACT:
            value = next(a for a in demo_attributes()
                         if a.name == match.attribute_name).text()
            assert normalize(match.matched_text) == normalize(value)


def test_age_heuristic_skipped_without_publication_date():
    article = Article(url="u", body=demo_article().body, publication_date=None)
    report = tag_article(article, demo_attributes(), demo_synonym_table())
    assert all(m.kind is not MatchKind.AGE_DERIVED for m in report.matches)
    assert any("age heuristic skipped" in w for w in report.warnings)


def test_age_tolerance_configurable():
    body = "Maria Lang, said to be 31 years old, lives here."
    article = Article(url="u", body=body, publication_date=date(2014, 10, 20))
    attrs = [Attribute.date_attribute("Date of Birth", "29.07.1984")]  # age 30
    strict = tag_article(article, attrs)
    assert strict.matches == ()
    loose = tag_article(article, attrs, age_tolerance=1)
    assert [m.kind for m in loose.matches] == [MatchKind.AGE_DERIVED]


def test_age_heuristic_matches_oracle_grid():
    """Brute-force the heuristic against anniversary counting over a grid
    spanning fifty years on either side of a base date."""
    base = date(1980, 6, 15)
    births = [base + timedelta(days=offset)
              for offset in range(-18_250, 18_251, 373)]
    publications = [base + timedelta(days=offset)
                    for offset in range(-18_250, 18_251, 741)]
    checked = 0
    for born in births:
        for on in publications:
            if on < born:
                continue
            assert floor_age(born, on) == _age_oracle(born, on)
            checked += 1
    assert checked > 1000


def test_matching_determinism():
    article = demo_article()
    first = tag_article(article, demo_attributes(), demo_synonym_table())
    second = tag_article(article, demo_attributes(), demo_synonym_table())
    assert first == second


def test_match_attributes_requires_attributes():
    with pytest.raises(ValueError):
        match_attributes([], [], None, None)


# ---------------------------------------------------------------------------
# Picture matching
# ---------------------------------------------------------------------------

def test_picture_digest_match():
    attribute = Attribute.picture_attribute("ID Picture", DEMO_PICTURE)
    hit = match_picture([("img-0", b"junk"), ("img-1", DEMO_PICTURE)], attribute)
    assert hit is not None and hit.image_id == "img-1"
    assert hit.confidence == 1.0


def test_picture_reencoded_and_absent_do_not_match():
    attribute = Attribute.picture_attribute("ID Picture", DEMO_PICTURE)
    assert match_picture([("img-1", DEMO_PICTURE + b"\x00")], attribute) is None
    assert match_picture([], attribute) is None


def test_tag_article_includes_picture_match():
    base = demo_article()
    article = Article(url=base.url, body=base.body,
                      publication_date=base.publication_date,
                      images=(("img-7", DEMO_PICTURE),))
    report = tag_article(article, demo_attributes(include_picture=True),
                         demo_synonym_table())
    picture = [m for m in report.matches if m.kind is MatchKind.IMAGE_DIGEST]
    assert len(picture) == 1
    assert picture[0].image_id == "img-7"
    assert picture[0].attribute_name == "ID Picture"


# ---------------------------------------------------------------------------
# Disambiguation
# ---------------------------------------------------------------------------

def _report(claimed: tuple[str, ...], matched: tuple[str, ...]) -> MatchReport:
    matches = tuple(Match(name, MatchKind.EXACT, 0, 1, None, "x")
                    for name in matched)
    return MatchReport(article_digest=b"d", claimed_attributes=claimed,
                       matches=matches)


def test_disambiguate_three_of_four_with_identifying():
    report = _report(
        ("Full Name", "Nationality", "Date of Birth", "Place of Birth"),
        ("Full Name", "Nationality", "Date of Birth"),
    )
    assert disambiguation_score(report) == 0.75
    assert disambiguate(report, 0.5)


def test_disambiguate_nationality_alone_not_affected():
    report = _report(
        ("Full Name", "Nationality", "Date of Birth", "Place of Birth"),
        ("Nationality",),
    )
    assert disambiguation_score(report) == 0.25
    assert not disambiguate(report, 0.5)


def test_disambiguate_no_matches_never_affected():
    report = _report(("Full Name", "Nationality"), ())
    for threshold in (0.0, 0.25, 0.5, 1.0):
        assert not disambiguate(report, threshold)


def test_disambiguate_monotone_in_matches():
    rng = random.Random(23)
    pool = ("Full Name", "Nationality", "Date of Birth", "Place of Birth",
            "Current Residence", "ID Picture")
    for _ in range(300):
        claimed = tuple(rng.sample(pool, rng.randint(1, len(pool))))
        matched = tuple(n for n in claimed if rng.random() < 0.5)
        extra = [n for n in claimed if n not in matched]
        if not extra:
            continue
        threshold = rng.choice((0.0, 0.25, 0.5, 0.75, 1.0))
        before = disambiguate(_report(claimed, matched), threshold)
        grown = matched + (rng.choice(extra),)
        after = disambiguate(_report(claimed, grown), threshold)
        if before:
            assert after, "adding a match must never flip affected -> not"


def test_demo_scenario_affected_at_default_threshold():
    report = tag_article(demo_article(), demo_attributes(), demo_synonym_table())
    assert disambiguate(report, 0.5)
    assert not disambiguate(replace(report, matches=report.matches[1:]), 0.5)
