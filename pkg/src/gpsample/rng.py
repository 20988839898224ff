"""Reproducible random streams keyed by (seed, stream id)."""
import numpy as np


def stream(seed, stream_id=0):
    """Return a PCG64 generator for the pair ``(seed, stream_id)``.

    Identical pairs give identical sequences; distinct stream ids are
    independent because they map to distinct ``SeedSequence`` spawn keys.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng):
    """Coerce ``None``, an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit seed or Generator is required")
    return stream(rng)


def split(rng, n):
    """Spawn ``n`` independent child generators from ``rng``."""
    return as_generator(rng).spawn(n)
