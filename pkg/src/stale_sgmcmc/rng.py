"""Named, counter-addressable random streams.

Every chain seed fans out into independent child streams keyed by a name
(and optionally an index such as a worker id).  Changing the number of
workers therefore never perturbs the server's noise sequence.
"""
import numpy as np

_STREAM_IDS = {
    "data": 0,
    "noise": 1,
    "minibatch": 2,
    "schedule": 3,
    "replicate": 4,
    "subsample": 5,
}


def stream(seed, name, *index):
    """Return a Generator for the child stream ``(name, *index)`` of ``seed``."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(_STREAM_IDS[name], *map(int, index)))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *index):
    """Deterministically derive a 63-bit integer seed from ``seed`` and a key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_STREAM_IDS["replicate"], *map(int, index)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
