"""Counter-based random streams for scheduling-independent ensembles.

Every concurrent unit of work (trajectory, sweep rung, sample path) draws
from its own Philox stream derived from (master_seed, stream_id).  Streams
are independent of each other and of the order in which workers run, so
ensemble output is a pure function of the master seed.
"""

import numpy as np


def stream(master_seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the Philox generator for one work unit.

    Derivation: SeedSequence(entropy=master_seed, spawn_key=(stream_id,)),
    which is stable across platforms and numpy versions >= 1.17.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(stream_id,))
    return np.random.Generator(np.random.Philox(ss))


SCHEME = "philox4x64 via SeedSequence(entropy=master_seed, spawn_key=(stream_id,))"
