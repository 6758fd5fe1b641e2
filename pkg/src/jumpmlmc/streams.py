"""Counter-based, hierarchically keyed random streams.

Every stochastic object in an estimator run (field, partition, jump
heights, ...) draws from a stream addressed by a fixed key path such as
``(replication, level, sample index, purpose)``.  Streams are derived from
a root seed through :class:`numpy.random.SeedSequence` spawn keys and are
backed by the counter-based Philox generator, so results never depend on
scheduling or worker count.
"""
from __future__ import annotations

import numpy as np

__all__ = ["RandomStream", "FIELD", "PARTITION", "JUMPS"]

# purpose tags appended as the last key component of a sample stream
FIELD = 0
PARTITION = 1
JUMPS = 2


class RandomStream:
    """A node in a tree of reproducible random streams.

    A stream is identified by ``(seed, key_path)``.  Children are derived
    with :meth:`child`; generators handed out by :meth:`generator` are
    independent Philox instances.  Deriving the same child twice yields
    bitwise-identical draws.
    """

    __slots__ = ("_seed", "_path")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self._seed = int(seed)
        self._path = tuple(int(k) for k in path)

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStream":
        return cls(seed)

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def path(self) -> tuple[int, ...]:
        return self._path

    def child(self, *keys: int) -> "RandomStream":
        """Derive the sub-stream addressed by ``keys`` under this node."""
        return RandomStream(self._seed, self._path + tuple(keys))

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator for this node's key path."""
        ss = np.random.SeedSequence(entropy=self._seed, spawn_key=self._path)
        return np.random.Generator(np.random.Philox(ss))

    def describe(self) -> str:
        """Stable textual identity, used in run fingerprints."""
        return f"seed={self._seed};path={','.join(map(str, self._path))}"

    def __repr__(self) -> str:  # pragma: no cover
        return f"RandomStream({self.describe()})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RandomStream)
            and self._seed == other._seed
            and self._path == other._path
        )

    def __hash__(self) -> int:
        return hash((self._seed, self._path))
