import numpy as np

from qremlib.disorder import DisorderRealization, DisorderVariant
from qremlib.hypercube import SpinConfiguration

MOCK_VARIANT = DisorderVariant.rem()


def constant_realization(n: int, value: float = 0.0, variant: DisorderVariant = MOCK_VARIANT) -> DisorderRealization:
    return DisorderRealization(np.full(1 << n, float(value)), variant, n, seed=0)


def table_realization(energies, variant: DisorderVariant = MOCK_VARIANT) -> DisorderRealization:
    energies = np.asarray(energies, dtype=np.float64)
    n = energies.shape[0].bit_length() - 1
    return DisorderRealization(energies, variant, n, seed=0)


def holes_realization(n: int, holes: dict[int, float]) -> DisorderRealization:
    """Zero landscape with the given bit words set to the given energies."""
    energies = np.zeros(1 << n)
    for word, value in holes.items():
        energies[word] = value
    return DisorderRealization(energies, MOCK_VARIANT, n, seed=0)


def staircase(n: int, length: int) -> list[SpinConfiguration]:
    """Configurations with the lowest k spins up, k = 0 .. length - 1; consecutive ones differ by one flip."""
    return [SpinConfiguration((1 << k) - 1, n) for k in range(length)]


def linked_groups(words, scale: float) -> list[list[int]]:
    """Union-find closure of the bit words under dist < scale, each group sorted, groups ordered by minimum."""
    parent = {int(w): int(w) for w in words}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in parent:
        for b in parent:
            if a < b and (a ^ b).bit_count() < scale:
                parent[find(b)] = find(a)
    groups: dict[int, list[int]] = {}
    for x in sorted(parent):
        groups.setdefault(find(x), []).append(x)
    return sorted(groups.values(), key=min)
