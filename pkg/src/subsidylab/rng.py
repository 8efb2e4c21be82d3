import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named task derived from a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
