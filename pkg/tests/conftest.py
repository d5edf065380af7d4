from __future__ import annotations

import random

import pytest

from oblivion import rsa_fdh
from oblivion.credentials import register_attribute_name

# Toy key material: (p, q, e) with e coprime to (p-1)(q-1).
TOY_KEY_PARAMS = [
    (61, 53, 17),
    (67, 71, 13),
    (79, 83, 5),
    (101, 103, 7),
]


@pytest.fixture(scope="session")
def toy_keys():
    return [rsa_fdh.keypair_from_primes(p, q, e) for p, q, e in TOY_KEY_PARAMS]


@pytest.fixture(scope="session")
def keys_512():
    return rsa_fdh.keygen(512, rng=random.Random(512))


@pytest.fixture(scope="session")
def user_keys_512():
    return rsa_fdh.keygen(512, rng=random.Random(513))


@pytest.fixture(scope="session")
def fast_keys():
    """Small key pairs for protocol-level tests where key size is irrelevant."""
    from oblivion.services import _fast_keypair

    rng = random.Random(99)
    return [_fast_keypair(rng) for _ in range(6)]


@pytest.fixture(scope="session", autouse=True)
def _register_test_attribute_names():
    for name in ("A", "AB", "Test Value"):
        register_attribute_name(name)
