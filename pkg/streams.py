"""Named, counter-based random streams derived from one master seed.

Every stream is a Philox generator keyed by SeedSequence(seed, spawn_key=
(replica, stream id)), so a (seed, name, replica) triple always reproduces
the same numbers and distinct triples never share a key.
"""

import numpy as np

STREAM_IDS = {
    "noise": 0,
    "refine": 1,
    "schedule": 2,
    "init": 3,
    "matrix": 4,
}


def stream(seed, name, replica=0):
    """Return the generator for stream `name` of replica `replica`."""
    if name not in STREAM_IDS:
        raise KeyError(f"unknown stream {name!r}; expected one of {sorted(STREAM_IDS)}")
    if replica < 0:
        raise ValueError("replica index must be non-negative")
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(replica), STREAM_IDS[name]))
    return np.random.Generator(np.random.Philox(seq))


class NoiseBlock:
    """Standard normal vectors for successive global steps, drawn in blocks.

    Column i of every row belongs to particle i, so each particle reads its
    own sub-sequence of the counter-based stream.
    """

    def __init__(self, rng, n_dim, block=1024):
        self.rng = rng
        self.n_dim = n_dim
        self.block = block
        self._buf = np.empty((0, n_dim))
        self._pos = 0

    def next(self):
        if self._pos >= len(self._buf):
            self._buf = self.rng.standard_normal((self.block, self.n_dim))
            self._pos = 0
        row = self._buf[self._pos]
        self._pos += 1
        return row
