"""Demo fixtures and a deterministic synthetic news corpus.

The demo article is an authored reconstruction of a typical local-news piece
about a person whose name, nationality phrasing, and stated age line up with
a credential set; it drives examples and exact-match tests.

The synthetic corpus mimics the shape of a real news crawl: 150 articles of
1K to 10K words with a mean near 1.9K, each embedding tens to hundreds of
unique named entities (people, places, organizations, dates, ages, figures).
Everything is generated from a seed, so fixture-dependent results are
reproducible.
"""

from __future__ import annotations

import random
from datetime import date, timedelta
from pathlib import Path

from .credentials import Attribute
from .matching import Article, SynonymTable, format_article

# ---------------------------------------------------------------------------
# Demo fixtures
# ---------------------------------------------------------------------------

DEMO_ARTICLE_TEXT = """\
url: https://news.example.test/community/teacher-honored
date: 20.10.2014

Local teacher honored for a decade of volunteer work

Alice Schmidt, a teacher living in Saarbruecken and a citizen of
Germany, was honored on Saturday for ten years of volunteer work at the
neighbourhood learning centre. Colleagues describe the 30 years old
educator as tireless, and the prize committee praised her weekend
reading groups, which have grown from four pupils to more than sixty.
The award ceremony took place at the town hall on 18.10.2014, with the
mayor handing over a certificate and a small grant for new books.
"""

SECOND_ARTICLE_TEXT = """\
url: https://news.example.test/sport/marathon-results
date: 12.04.2015

City marathon sees record turnout

Jonas Weber crossed the finish line first on Sunday, ahead of nearly
four thousand runners. The 41 years old engineer from Hamburg trains
with a local running club and thanked the volunteers along the course.
Organizers said entries have doubled since the route changed in 2013.
"""

DEMO_SYNONYMS_TEXT = """\
German\tcitizen of Germany|German nationality|Germany|German citizen
French\tcitizen of France|French nationality|France
Hamburg\tnative of Hamburg|born in Hamburg
"""

#: Deterministic stand-in for an identity photograph (not a real image).
DEMO_PICTURE = b"\x89IMG" + bytes(range(256)) * 4


def demo_article() -> Article:
    from .matching import parse_article

    return parse_article(DEMO_ARTICLE_TEXT)


def second_article() -> Article:
    from .matching import parse_article

    return parse_article(SECOND_ARTICLE_TEXT)


def demo_synonym_table() -> SynonymTable:
    return SynonymTable.parse(DEMO_SYNONYMS_TEXT)


def demo_attributes(include_picture: bool = False) -> list[Attribute]:
    """Alice's credential set: three attributes present in the demo article
    plus a place of birth that is not, so the match ratio is 3/4."""
    attrs = [
        Attribute.text_attribute("Full Name", "Alice Schmidt"),
        Attribute.text_attribute("Nationality", "German"),
        Attribute.date_attribute("Date of Birth", "29.07.1984"),
        Attribute.text_attribute("Place of Birth", "Hamburg"),
    ]
    if include_picture:
        attrs.append(Attribute.picture_attribute("ID Picture", DEMO_PICTURE))
    return attrs


def second_user_attributes() -> list[Attribute]:
    return [
        Attribute.text_attribute("Full Name", "Jonas Weber"),
        Attribute.text_attribute("Current Residence", "Hamburg"),
        Attribute.date_attribute("Date of Birth", "02.01.1974"),
    ]


def demo_user_specs() -> dict[str, tuple[list[Attribute], Article]]:
    """Default simulation users: each with credentials and their article."""
    return {
        "alice": (demo_attributes(), demo_article()),
        "bob": (second_user_attributes(), second_article()),
    }


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

_FIRST_NAMES = (
    "Anna", "Ben", "Clara", "David", "Emma", "Felix", "Greta", "Hannes",
    "Ida", "Jonas", "Klara", "Lukas", "Marie", "Niklas", "Olga", "Paul",
    "Rosa", "Simon", "Tilda", "Viktor", "Wanda", "Yusuf", "Zoe", "Marta",
    "Henrik", "Louisa", "Oskar", "Petra", "Rainer", "Sofia",
)

_SURNAMES = (
    "Adler", "Bauer", "Conrad", "Dietrich", "Eckert", "Fischer", "Graf",
    "Hartmann", "Iversen", "Jansen", "Keller", "Lang", "Mayer", "Neumann",
    "Oswald", "Pfeiffer", "Quandt", "Richter", "Sommer", "Thaler", "Ullrich",
    "Vogel", "Wagner", "Zimmer", "Brandt", "Falk", "Grimm", "Holst",
)

_PLACES = (
    "Berlin", "Hamburg", "Munich", "Cologne", "Frankfurt", "Stuttgart",
    "Leipzig", "Dresden", "Bremen", "Hanover", "Paris", "London", "Madrid",
    "Rome", "Vienna", "Zurich", "Brussels", "Amsterdam", "Copenhagen",
    "Stockholm", "Oslo", "Helsinki", "Dublin", "Lisbon", "Athens", "Warsaw",
    "Prague", "Budapest", "Germany", "France", "Italy", "Spain", "Austria",
    "Poland", "Denmark", "Sweden", "Norway", "Finland", "Ireland", "Portugal",
)

_ORG_STEMS = (
    "Meridian", "Atlas", "Nordwind", "Helios", "Cascade", "Pioneer",
    "Summit", "Beacon", "Harbor", "Juniper", "Lantern", "Quarry",
    "Redwood", "Sterling", "Vanguard", "Willow",
)

_ORG_SUFFIXES = ("Institute", "Bank", "University", "Agency", "Council",
                 "Committee", "Association", "Group", "Ministry", "Company")

_FILLER = (
    "the", "a", "of", "and", "to", "in", "after", "before", "during",
    "residents", "officials", "report", "said", "plans", "measures",
    "project", "season", "market", "figures", "growth", "decline",
    "meeting", "decision", "proposal", "budget", "program", "review",
    "survey", "traffic", "weather", "harvest", "exports", "imports",
    "prices", "wages", "schools", "hospital", "library", "bridge",
    "railway", "festival", "election", "agreement", "dispute", "repairs",
    "funding", "volunteers", "neighbours", "students", "workers", "farmers",
    "announced", "confirmed", "delayed", "approved", "rejected", "expanded",
    "opened", "closed", "continued", "warned", "expected", "estimated",
    "nearly", "roughly", "slightly", "sharply", "steadily", "again",
    "this", "that", "last", "next", "new", "local", "regional", "annual",
    "for", "with", "from", "into", "over", "under", "between", "around",
)

#: Corpus statistics targeted by the generator.
CORPUS_SIZE = 150
MIN_WORDS, MAX_WORDS = 1_000, 10_000
MEAN_WORDS = 1_900
MIN_ENTITIES, MAX_ENTITIES = 43, 590
MEAN_ENTITIES = 135


def _article_length(rng: random.Random) -> int:
    # 1000 + 9000 * u^9 has mean 1900 over u ~ U[0,1) and range [1000, 10000).
    return MIN_WORDS + round((MAX_WORDS - MIN_WORDS) * rng.random() ** 9)


def _entity_pool(rng: random.Random, count: int) -> list[str]:
    """``count`` unique entity surface strings with a news-like mix."""
    entities: list[str] = []
    seen: set[str] = set()

    def add(text: str) -> bool:
        if text in seen:
            return False
        seen.add(text)
        entities.append(text)
        return True

    while len(entities) < count:
        roll = rng.random()
        if roll < 0.50:
            add(f"{rng.choice(_FIRST_NAMES)} {rng.choice(_SURNAMES)}")
        elif roll < 0.65:
            add(rng.choice(_PLACES))
        elif roll < 0.75:
            add(f"{rng.choice(_ORG_STEMS)} {rng.choice(_ORG_SUFFIXES)}")
        elif roll < 0.85:
            add(str(rng.randint(2, 9_999_999)))
        elif roll < 0.93:
            day = date(2010, 1, 1) + timedelta(days=rng.randint(0, 2500))
            add(day.strftime("%d.%m.%Y"))
        else:
            add(f"{rng.randint(18, 99)} years old")
    return entities


def generate_article(rng: random.Random, index: int) -> Article:
    words_target = _article_length(rng)
    entity_target = max(MIN_ENTITIES,
                        min(MAX_ENTITIES,
                            round(words_target * MEAN_ENTITIES / MEAN_WORDS)))
    entities = _entity_pool(rng, entity_target)
    rng.shuffle(entities)

    entity_words = sum(len(e.split()) for e in entities)
    filler_budget = max(0, words_target - entity_words)

    sentences: list[str] = []
    filler_used = 0
    entity_idx = 0
    while filler_used < filler_budget or entity_idx < len(entities):
        lead = rng.randint(3, 9)
        tail = rng.randint(1, 5)
        words = [rng.choice(_FILLER) for _ in range(lead)]
        if entity_idx < len(entities):
            words.append(entities[entity_idx])
            entity_idx += 1
        words.extend(rng.choice(_FILLER) for _ in range(tail))
        filler_used += lead + tail
        sentence = " ".join(words)
        sentences.append(sentence[0].upper() + sentence[1:] + ".")

    paragraphs = []
    per_paragraph = 8
    for i in range(0, len(sentences), per_paragraph):
        paragraphs.append(" ".join(sentences[i:i + per_paragraph]))

    publication = date(2013, 1, 1) + timedelta(days=rng.randint(0, 1000))
    return Article(
        url=f"https://news.example.test/{index:04d}",
        body="\n\n".join(paragraphs),
        publication_date=publication,
    )


def generate_corpus(count: int = CORPUS_SIZE, seed: int = 7) -> list[Article]:
    rng = random.Random(seed)
    return [generate_article(rng, i) for i in range(count)]


def write_corpus(directory: Path | str, count: int = CORPUS_SIZE, seed: int = 7) -> list[Path]:
    """Write the corpus as article fixture files; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, article in enumerate(generate_corpus(count, seed)):
        path = directory / f"article-{i:04d}.txt"
        path.write_text(format_article(article), encoding="utf-8")
        paths.append(path)
    return paths


def load_corpus(directory: Path | str) -> list[Article]:
    from .matching import load_article

    return [load_article(p) for p in sorted(Path(directory).glob("article-*.txt"))]
