"""Finding a person's attributes inside an article.

Runs the rule-based candidate extractor over the demo article, matches the
demo credential set (exact value, synonym phrase, and the age heuristic
against the publication date), and takes the affectedness decision.
"""

from oblivion.corpus import demo_article, demo_attributes, demo_synonym_table
from oblivion.matching import (
    disambiguate,
    disambiguation_score,
    extract_candidates,
    span_text,
    tag_article,
)


def main():
    article = demo_article()
    attributes = demo_attributes()
    synonyms = demo_synonym_table()

    print("=== article ===")
    print(f"url:  {article.url}")
    print(f"date: {article.publication_date}")
    print(article.body[:200].strip() + " ...\n")

    print("=== extracted candidates ===")
    for cand in extract_candidates(article):
        text = cand.text.replace("\n", " ")
        print(f"  {cand.category.value:13} [{cand.start:4}:{cand.end:4}] {text!r}")

    print("\n=== matching the credential set ===")
    report = tag_article(article, attributes, synonyms)
    for match in report.matches:
        print(f"  {match.attribute_name:14} via {match.kind.value:12} "
              f"-> {match.matched_text.replace(chr(10), ' ')!r}")
        assert span_text(article, match) == match.matched_text
    unmatched = set(report.claimed_attributes) - report.matched_names()
    print(f"  unmatched: {sorted(unmatched)}")

    print("\n=== affectedness decision ===")
    score = disambiguation_score(report)
    print(f"score: {score:.2f} (matched / claimed)")
    print("affected at threshold 0.5:", disambiguate(report, 0.5))
    print("note: without an identifying attribute (name or picture) the")
    print("decision is negative no matter the score.")


if __name__ == "__main__":
    main()
