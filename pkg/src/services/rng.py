import numpy as np


SEED_MODULUS = 2 ** 64


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream addressed by ``key`` under ``seed``.

    The same (seed, key) always yields the same stream, whichever process or
    order it is requested in.
    """
    entropy = int(seed) % SEED_MODULUS
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=tuple(int(k) for k in key)))


def fresh_seed() -> int:
    """Draw a seed from OS entropy, for runs where the caller gave none."""
    return int(np.random.SeedSequence().entropy) % SEED_MODULUS
