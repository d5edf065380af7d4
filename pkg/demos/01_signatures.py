"""Signatures over a full-domain hash: keys, signing, verification.

Walks through key generation, the deterministic hash-onto-the-modulus
construction, signing, verification, and the exponentiation counter used
throughout the test suite.
"""

import random

from oblivion.rsa_fdh import (
    count_modexps,
    init,
    keygen,
    keypair_from_primes,
    sign,
    verify,
)


def main():
    print("=== key generation ===")
    sk, vk = keygen(1024, rng=random.Random(42))
    print(f"modulus bits: {vk.modulus.bit_length()}, public exponent: {vk.e}")

    print("\n=== full-domain hash ===")
    fdh = init(128)
    digest = fdh.digest(b"a message", vk.modulus)
    print(f"digest has {digest.bit_length()} bits, always below the modulus")
    assert digest == fdh.digest(b"a message", vk.modulus), "deterministic"

    print("\n=== sign and verify ===")
    message = b"please delist the article at https://example.test/a"
    signature = sign(sk, message)
    print(f"signature (trimmed): {signature:x}"[:60] + "...")
    print("verifies:", verify(vk, signature, message))
    print("wrong message rejected:", not verify(vk, signature, b"other"))

    tweaked = signature ^ 1
    print("flipped bit rejected:", not verify(vk, tweaked, message))

    print("\n=== exponentiation accounting ===")
    with count_modexps() as counter:
        verify(vk, signature, message)
    print(f"one verification costs exactly {counter.count} modular exponentiation")

    print("\n=== tiny keys for hand checks ===")
    toy_sk, toy_vk = keypair_from_primes(61, 53, 17)
    print(f"N = {toy_vk.modulus}, e = {toy_vk.e}, d = {toy_sk.d}")
    toy_sig = sign(toy_sk, b"hi")
    print("toy roundtrip verifies:", verify(toy_vk, toy_sig, b"hi"))


if __name__ == "__main__":
    main()
