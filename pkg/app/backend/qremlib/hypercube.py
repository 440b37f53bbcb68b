"""Bit-level combinatorics of the configuration space {-1,1}^N.

Configurations are indexed 0..2^N-1 by their bit word (bit j set means spin j is +1).
Energy tables, state vectors and subset masks all share this index.
"""

import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import comb

from .errors import DimensionError, InvalidParameterError

MAX_SPINS = 30


def _check_spin_count(n: int):
    if not 1 <= n <= MAX_SPINS:
        raise DimensionError(f"spin count must lie in [1, {MAX_SPINS}], got {n}")


@dataclass(frozen=True)
class SpinConfiguration:
    """
    A single vertex of the Hamming cube.

    Attributes:
        bits (int): N-bit word, bit j = 1 means sigma_j = +1
        n (int): Number of spins
    """

    bits: int
    n: int

    def __post_init__(self):
        _check_spin_count(self.n)
        if self.bits < 0 or self.bits >> self.n:
            raise DimensionError(f"bit word {self.bits:#x} uses positions beyond n={self.n}")

    @classmethod
    def all_up(cls, n: int) -> "SpinConfiguration":
        return cls((1 << n) - 1, n)

    @classmethod
    def all_down(cls, n: int) -> "SpinConfiguration":
        return cls(0, n)

    @classmethod
    def from_spins(cls, spins: Iterable[int]) -> "SpinConfiguration":
        values = list(spins)
        bits = 0
        for j, s in enumerate(values):
            if s not in (-1, 1):
                raise InvalidParameterError(f"spin values must be +1 or -1, got {s}")
            if s == 1:
                bits |= 1 << j
        return cls(bits, len(values))

    @property
    def spins(self) -> tuple[int, ...]:
        return tuple(1 if (self.bits >> j) & 1 else -1 for j in range(self.n))


@dataclass(frozen=True, eq=False)
class SubsetMask:
    """
    A subset A of the Hamming cube stored as a dense membership indicator over all 2^N configurations.

    The indicator array is read-only; every operation returns a new mask.
    """

    members: np.ndarray
    n: int

    def __post_init__(self):
        _check_spin_count(self.n)
        members = np.asarray(self.members, dtype=bool)
        if members.shape != (1 << self.n,):
            raise DimensionError(f"membership indicator must have length 2^{self.n}, got {members.shape}")
        if members.flags.writeable:
            members = members.copy()
            members.flags.writeable = False
        object.__setattr__(self, "members", members)

    @classmethod
    def empty(cls, n: int) -> "SubsetMask":
        _check_spin_count(n)
        return cls(np.zeros(1 << n, dtype=bool), n)

    @classmethod
    def full(cls, n: int) -> "SubsetMask":
        _check_spin_count(n)
        return cls(np.ones(1 << n, dtype=bool), n)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "SubsetMask":
        _check_spin_count(n)
        members = np.zeros(1 << n, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= (1 << n)):
            raise DimensionError(f"configuration index out of range for n={n}")
        members[idx] = True
        return cls(members, n)

    @classmethod
    def from_configurations(cls, configurations: Iterable[SpinConfiguration], n: int) -> "SubsetMask":
        configs = list(configurations)
        for c in configs:
            if c.n != n:
                raise DimensionError(f"configuration has n={c.n}, mask has n={n}")
        return cls.from_indices((c.bits for c in configs), n)

    @property
    def cardinality(self) -> int:
        return int(np.count_nonzero(self.members))

    def __len__(self) -> int:
        return self.cardinality

    def __contains__(self, config: SpinConfiguration) -> bool:
        if config.n != self.n:
            raise DimensionError(f"configuration has n={config.n}, mask has n={self.n}")
        return bool(self.members[config.bits])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubsetMask):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.members, other.members))

    def __hash__(self) -> int:
        return hash((self.n, self.members.tobytes()))

    def is_empty(self) -> bool:
        return not self.members.any()

    def indices(self) -> np.ndarray:
        """Member bit words in ascending order."""
        return np.flatnonzero(self.members)

    def configurations(self) -> list[SpinConfiguration]:
        return [SpinConfiguration(int(i), self.n) for i in self.indices()]

    def _check_same_n(self, other: "SubsetMask"):
        if other.n != self.n:
            raise DimensionError(f"masks over different cubes: n={self.n} and n={other.n}")

    def complement(self) -> "SubsetMask":
        return SubsetMask(~self.members, self.n)

    def union(self, other: "SubsetMask") -> "SubsetMask":
        self._check_same_n(other)
        return SubsetMask(self.members | other.members, self.n)

    def intersection(self, other: "SubsetMask") -> "SubsetMask":
        self._check_same_n(other)
        return SubsetMask(self.members & other.members, self.n)

    def difference(self, other: "SubsetMask") -> "SubsetMask":
        self._check_same_n(other)
        return SubsetMask(self.members & ~other.members, self.n)

    def issubset(self, other: "SubsetMask") -> bool:
        self._check_same_n(other)
        return not bool((self.members & ~other.members).any())

    __or__ = union
    __and__ = intersection
    __sub__ = difference
    __invert__ = complement
    __le__ = issubset


def popcounts(n: int) -> np.ndarray:
    """Number of set bits of every bit word 0..2^n-1 (uint8)."""
    _check_spin_count(n)
    counts = np.zeros(1 << n, dtype=np.uint8)
    for k in range(n):
        half = 1 << k
        counts[half : 2 * half] = counts[:half] + 1
    return counts


def distances_from(center: int, words: np.ndarray) -> np.ndarray:
    """Hamming distances between one bit word and an array of bit words."""
    return np.bitwise_count(np.asarray(words, dtype=np.uint64) ^ np.uint64(center)).astype(np.int64)


def flip_view(values: np.ndarray, j: int) -> np.ndarray:
    """Return values re-indexed by the j-th spin flip, i.e. out[x] = values[x ^ (1 << j)]."""
    size = values.shape[0]
    block = 1 << j
    return values.reshape(size // (2 * block), 2, block)[:, ::-1, :].reshape(size)


def hamming_distance(a: SpinConfiguration, b: SpinConfiguration) -> int:
    if a.n != b.n:
        raise DimensionError(f"configurations over different cubes: n={a.n} and n={b.n}")
    return (a.bits ^ b.bits).bit_count()


def overlap(a: SpinConfiguration, b: SpinConfiguration) -> float:
    """Normalized spin inner product, computed as 1 - 2 dist/N."""
    d = hamming_distance(a, b)
    return (a.n - 2 * d) / a.n


def flip(a: SpinConfiguration, j: int) -> SpinConfiguration:
    if not 0 <= j < a.n:
        raise DimensionError(f"spin index {j} out of range for n={a.n}")
    return SpinConfiguration(a.bits ^ (1 << j), a.n)


def ball(center: SpinConfiguration, radius: int) -> SubsetMask:
    """Closed Hamming ball around center."""
    if not 0 <= radius <= center.n:
        raise InvalidParameterError(f"radius must lie in [0, {center.n}], got {radius}")
    distances = distances_from(center.bits, np.arange(1 << center.n, dtype=np.uint64))
    return SubsetMask(distances <= radius, center.n)


def ball_cardinality(n: int, radius: int) -> int:
    return sum(int(comb(n, k, exact=True)) for k in range(radius + 1))


def binary_entropy(r: float) -> float:
    """gamma(r) = -r ln r - (1-r) ln(1-r), extended by continuity to r in {0, 1}."""
    if not 0.0 <= r <= 1.0:
        raise InvalidParameterError(f"binary entropy needs r in [0, 1], got {r}")
    if r == 0.0 or r == 1.0:
        return 0.0
    return -r * math.log(r) - (1.0 - r) * math.log1p(-r)


def ball_volume_bound(n: int, r: float, *, log: bool = False) -> float:
    """Entropy bound e^{N gamma(r)} on the volume of a ball of radius rN, for 0 <= r <= 1/2."""
    if not 0.0 <= r <= 0.5:
        raise InvalidParameterError(f"ball volume bound holds for r in [0, 1/2], got {r}")
    exponent = n * binary_entropy(r)
    return exponent if log else math.exp(exponent)


def antipode(a: SpinConfiguration) -> SpinConfiguration:
    return SpinConfiguration(a.bits ^ ((1 << a.n) - 1), a.n)


def at_distance(a: SpinConfiguration, d: int, positions: Optional[Iterable[int]] = None) -> SpinConfiguration:
    """Flip the lowest d spins of a (or the given positions) to reach a configuration at distance d."""
    flips = list(range(d)) if positions is None else list(positions)
    if len(flips) != d or len(set(flips)) != d:
        raise InvalidParameterError(f"need {d} distinct positions, got {flips}")
    result = a
    for j in flips:
        result = flip(result, j)
    return result
