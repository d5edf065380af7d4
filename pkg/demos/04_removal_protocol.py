"""The full three-phase flow: register, claim, report.

A user registers attributes with the authority, claims ownership of an
article at the verifier (sending only the attributes that actually matched),
receives a signed token, and redeems it at the indexing system, which
delists the link.  Afterwards: what happens on replay, and why the token is
useless for any other article.
"""

from oblivion.protocol import OwnershipToken
from oblivion.services import build_world, check_censorship_resistance


def main():
    world = build_world(seed=2)
    alice = world.users["alice"]
    article = world.articles["a1"]

    print("=== registration phase (out of band) ===")
    alice.register_with(world.ca)
    print(f"alice holds {len(alice.credentials)} signed attributes")

    print("\n=== ownership claim phase ===")
    world.clock.tick()
    request = alice.build_claim(article, world.ca.vk, world.clock())
    claimed = [a.name for a in request.claimed_attributes]
    print(f"claiming only what matched: {claimed}")
    result = world.ocp.handle_claim(request)
    assert isinstance(result, OwnershipToken)
    print(f"token issued, bound to digest {result.article_digest.hex()[:16]}...")
    alice.accept_token(result)

    print("\n=== replay is rejected ===")
    replayed = world.ocp.handle_claim(request)
    print(f"second delivery of the same claim: {replayed.reason}")

    print("\n=== reporting phase ===")
    token = alice.token_for(article)
    print("indexed before report:", world.indexing.index.is_indexed(article.url))
    ack = world.indexing.handle_report(token, article.url)
    print(f"acknowledgment: {ack.status.value}")
    print("indexed after report: ", world.indexing.index.is_indexed(article.url))

    print("\n=== the token binds to exactly one article ===")
    other = world.articles["a2"]
    ack = world.indexing.handle_report(token, other.url)
    print(f"redeeming it for another url fails: {ack.reason}")

    print("\n=== the trace, with the ordering property checked ===")
    for event in world.trace:
        print("  " + event.line())
    print("censorship-resistance violation:",
          check_censorship_resistance(world.trace))


if __name__ == "__main__":
    main()
