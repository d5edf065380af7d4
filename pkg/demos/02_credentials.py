"""Attribute credentials: certify, pack, verify everything in one shot.

Shows why packing matters: a whole subset of credentials verifies with a
single modular exponentiation, versus one per attribute when checked
individually, and any tampering breaks the batch check.
"""

import random
import time

from oblivion.credentials import (
    Attribute,
    ca_sign_attributes,
    pack,
    verify_attribute,
    verify_packed,
)
from oblivion.rsa_fdh import count_modexps, keygen


def main():
    rng = random.Random(7)
    ca_sk, ca_vk = keygen(1024, rng=rng)
    user_sk, user_vk = keygen(1024, rng=rng)

    attributes = [
        Attribute.text_attribute("Full Name", "Alice Schmidt"),
        Attribute.text_attribute("Nationality", "German"),
        Attribute.date_attribute("Date of Birth", "29.07.1984"),
        Attribute.text_attribute("Place of Birth", "Hamburg"),
        Attribute.text_attribute("Current Residence", "Saarbruecken"),
    ]

    print("=== certification (binds each attribute to the user key) ===")
    start = time.perf_counter()
    signed = ca_sign_attributes(ca_sk, user_vk, attributes)
    print(f"signed {len(signed)} attributes in "
          f"{1000 * (time.perf_counter() - start):.1f} ms")
    print("each verifies individually:",
          all(verify_attribute(ca_vk, s) for s in signed))

    print("\n=== packing a claimed subset ===")
    subset = signed[:3]
    packed = pack(ca_vk, subset)
    print(f"packed {packed.count} signatures into one value")

    print("\n=== one exponentiation for the whole subset ===")
    claimed = [s.attribute for s in subset]
    with count_modexps() as batch:
        accepted = verify_packed(ca_vk, user_vk, packed, claimed)
    with count_modexps() as individual:
        for s in subset:
            verify_attribute(ca_vk, s)
    print(f"batch verification: accepted={accepted}, "
          f"{batch.count} exponentiation")
    print(f"individual checks:  {individual.count} exponentiations")

    print("\n=== tampering is caught ===")
    mutated = list(claimed)
    mutated[0] = Attribute.text_attribute("Full Name", "Mallory Schmidt")
    print("mutated value rejected:",
          not verify_packed(ca_vk, user_vk, packed, mutated))
    _, other_vk = keygen(1024, rng=rng)
    print("other user's key rejected:",
          not verify_packed(ca_vk, other_vk, packed, claimed))
    fewer = claimed[:-1]
    print("dropped attribute rejected:",
          not verify_packed(ca_vk, user_vk, packed, fewer))


if __name__ == "__main__":
    main()
