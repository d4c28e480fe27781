from typing import List

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator so draws are reproducible across platforms."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)
