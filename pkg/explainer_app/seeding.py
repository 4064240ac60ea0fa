"""Named random substreams derived from one run seed.

Each stage (init, shuffle, pairs, ...) draws from its own generator so that
changing one stage never shifts the numbers another stage sees.
"""
import zlib

import numpy as np


def seeded_stream(seed, stage):
    key = zlib.crc32(stage.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))
