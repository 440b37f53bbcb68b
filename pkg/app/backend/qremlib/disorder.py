"""Gaussian energy landscapes U_p on the Hamming cube and their covariance structure.

Random stream layout: a realization with seed s draws from ``numpy.random.Philox`` keyed by s.
Draw index k is the k-th double returned by ``Generator.random`` and is turned into a standard
Gaussian by the inverse normal CDF, ``ndtri(u_k + 2**-54)``, which maps the 53-bit grid into the
open unit interval. For the p-spin variants draw k belongs to the k-th coupling support in
ascending bit-word order; for the REM draw k belongs to configuration k.
"""

import logging
import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import comb, ndtri

from .errors import DimensionError, InvalidParameterError
from .hypercube import SpinConfiguration, at_distance, popcounts

logger = logging.getLogger("qremlab")

MAX_DISORDER_SPINS = 26
MIN_DISORDER_SPINS = 2

FILE_MAGIC = b"QREM"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sHBHBQ")

_HALF_ULP = 2.0**-54


class DisorderKind(str, Enum):
    """Energy landscapes that can be sampled.

    STRICT: p-spin sum over strictly increasing index tuples, scale sqrt(p!/N^{p-1}).
    FULL:   p-spin sum over all index tuples, scale N^{(1-p)/2}; covariance N r^p exactly.
    REM:    independent Gaussians sqrt(N) g(sigma) per configuration.
    """

    STRICT = "strict"
    FULL = "full"
    REM = "rem"


_KIND_TAGS = {DisorderKind.STRICT: 0, DisorderKind.FULL: 1, DisorderKind.REM: 2}
_TAG_KINDS = {tag: kind for kind, tag in _KIND_TAGS.items()}


@dataclass(frozen=True)
class DisorderVariant:
    kind: DisorderKind
    p: Optional[int] = None

    def __post_init__(self):
        if self.kind == DisorderKind.REM:
            object.__setattr__(self, "p", None)
        elif self.p is None or self.p < 2:
            raise InvalidParameterError(f"{self.kind.value} variant needs interaction order p >= 2, got {self.p}")

    @classmethod
    def strict(cls, p: int) -> "DisorderVariant":
        return cls(DisorderKind.STRICT, p)

    @classmethod
    def full(cls, p: int) -> "DisorderVariant":
        return cls(DisorderKind.FULL, p)

    @classmethod
    def rem(cls) -> "DisorderVariant":
        return cls(DisorderKind.REM)

    @classmethod
    def parse(cls, text: str, p: Optional[int] = None) -> "DisorderVariant":
        """Parse 'rem', 'strict:3' or 'full' (with p given separately)."""
        name, _, order = text.strip().lower().partition(":")
        try:
            kind = DisorderKind(name)
        except ValueError as exc:
            raise InvalidParameterError(f"unknown disorder variant '{text}'") from exc
        if order:
            p = int(order)
        return cls(kind, p)

    @property
    def label(self) -> str:
        return self.kind.value if self.p is None else f"{self.kind.value}:{self.p}"

    def check_size(self, n: int):
        if not MIN_DISORDER_SPINS <= n <= MAX_DISORDER_SPINS:
            raise DimensionError(f"n must lie in [{MIN_DISORDER_SPINS}, {MAX_DISORDER_SPINS}], got {n}")
        if self.kind == DisorderKind.STRICT and self.p is not None and self.p > n:
            raise InvalidParameterError(f"strict p-spin needs p <= n, got p={self.p}, n={n}")


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """
    A fully materialized energy table U(sigma) for every configuration, plus generation metadata.

    Attributes:
        energies (np.ndarray): Read-only float64 table of length 2^n, indexed by bit word
        variant (DisorderVariant): Landscape that produced the table
        n (int): Number of spins
        seed (int): 64-bit seed of the random stream
    """

    energies: np.ndarray
    variant: DisorderVariant
    n: int
    seed: int = 0

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=np.float64)
        if energies.shape != (1 << self.n,):
            raise DimensionError(f"energy table must have length 2^{self.n}, got {energies.shape}")
        if energies.flags.writeable:
            energies = energies.copy()
            energies.flags.writeable = False
        object.__setattr__(self, "energies", energies)

    def energy(self, config: SpinConfiguration) -> float:
        if config.n != self.n:
            raise DimensionError(f"configuration has n={config.n}, realization has n={self.n}")
        return float(self.energies[config.bits])

    @property
    def provenance(self) -> dict:
        return {"variant": self.variant.label, "n": self.n, "seed": self.seed}


def _check_seed(seed: int):
    if not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")


def gaussian_stream(seed: int, count: int) -> np.ndarray:
    """The first `count` standard Gaussian draws of the stream keyed by `seed`."""
    _check_seed(seed)
    generator = np.random.Generator(np.random.Philox(seed))
    return ndtri(generator.random(count) + _HALF_ULP)


def tuple_multiplicity(n: int, p: int, k: int) -> int:
    """Number of index tuples in [n]^p whose odd-multiplicity support is one fixed k-set.

    This is p! [x^p] sinh(x)^k cosh(x)^(n-k), evaluated exactly in integers.
    """
    if k > p or (p - k) % 2:
        return 0
    total = 0
    for j in range(n + 1):
        c_j = 0
        for a in range(max(0, j - (n - k)), min(k, j) + 1):
            c_j += int(comb(k, a, exact=True)) * (-1) ** (k - a) * int(comb(n - k, j - a, exact=True))
        total += c_j * (2 * j - n) ** p
    multiplicity, remainder = divmod(total, 2**n)
    assert remainder == 0, "tuple multiplicity must be an integer"
    return multiplicity


@dataclass(frozen=True)
class CouplingLayout:
    """Where the couplings of a p-spin variant live in the Walsh basis.

    supports: bit words of the coupling supports, ascending (draw k feeds supports[k])
    scales: standard deviation of the aggregated coupling at each support
    multiplicities: number of raw index tuples folded into each support
    """

    supports: np.ndarray
    scales: np.ndarray
    multiplicities: np.ndarray


def coupling_layout(variant: DisorderVariant, n: int) -> CouplingLayout:
    variant.check_size(n)
    if variant.kind == DisorderKind.REM:
        raise InvalidParameterError("the REM has no coupling layout; its energies are drawn per configuration")
    p = variant.p
    assert p is not None
    weights = popcounts(n)
    if variant.kind == DisorderKind.STRICT:
        supports = np.flatnonzero(weights == p)
        scale = math.sqrt(math.factorial(p) / n ** (p - 1))
        scales = np.full(supports.shape[0], scale)
        multiplicities = np.ones(supports.shape[0])
        return CouplingLayout(supports, scales, multiplicities)

    orders = [k for k in range(min(p, n) + 1) if (p - k) % 2 == 0]
    mult_by_order = np.zeros(n + 1)
    scale_by_order = np.zeros(n + 1)
    for k in orders:
        m_k = tuple_multiplicity(n, p, k)
        mult_by_order[k] = float(m_k)
        # exact big-int ratio before the square root
        scale_by_order[k] = math.sqrt(m_k / n ** (p - 1))
    supports = np.flatnonzero(np.isin(weights, orders))
    support_orders = weights[supports]
    return CouplingLayout(supports, scale_by_order[support_orders], mult_by_order[support_orders])


def sample_couplings(
    variant: DisorderVariant, n: int, seed: int, *, forced_coupling: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return (supports, coefficients) of U = sum_S coefficient_S prod_{j in S} sigma_j.

    With forced_coupling set, every raw index-tuple coupling takes that value, so a support
    aggregating m tuples gets coefficient m * forced_coupling * normalization.
    """
    layout = coupling_layout(variant, n)
    if forced_coupling is not None:
        normalization = layout.scales / np.sqrt(layout.multiplicities)
        return layout.supports, forced_coupling * layout.multiplicities * normalization
    draws = gaussian_stream(seed, layout.supports.shape[0])
    return layout.supports, layout.scales * draws


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform: out[x] = sum_S values[S] (-1)^popcount(S & x)."""
    out = np.array(values, dtype=np.float64, copy=True)
    size = out.shape[0]
    if size & (size - 1):
        raise DimensionError(f"Walsh-Hadamard transform needs a power-of-two length, got {size}")
    h = 1
    while h < size:
        view = out.reshape(size // (2 * h), 2, h)
        top = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = top - view[:, 1, :]
        h *= 2
    return out


def energies_from_couplings(supports: np.ndarray, coefficients: np.ndarray, n: int) -> np.ndarray:
    """Evaluate sum_S c_S prod_{j in S} sigma_j on every configuration in O(N 2^N).

    prod_{j in S} sigma_j = (-1)^popcount(S & ~x), so the table is the transform read at the
    complemented word, i.e. reversed.
    """
    table = np.zeros(1 << n)
    table[supports] = coefficients
    return fwht(table)[::-1].copy()


def sample(
    variant: DisorderVariant, n: int, seed: int, *, forced_coupling: Optional[float] = None
) -> DisorderRealization:
    variant.check_size(n)
    _check_seed(seed)
    if variant.kind == DisorderKind.REM:
        if forced_coupling is not None:
            g = np.full(1 << n, float(forced_coupling))
        else:
            g = gaussian_stream(seed, 1 << n)
        energies = math.sqrt(n) * g
    else:
        supports, coefficients = sample_couplings(variant, n, seed, forced_coupling=forced_coupling)
        energies = energies_from_couplings(supports, coefficients, n)
    return DisorderRealization(energies=energies, variant=variant, n=n, seed=seed)


def covariance_exact(variant: DisorderVariant, n: int, d: int) -> float:
    """E[U(sigma) U(tau)] for a pair at Hamming distance d."""
    if not 0 <= d <= n:
        raise InvalidParameterError(f"distance must lie in [0, {n}], got {d}")
    if variant.kind == DisorderKind.REM:
        return float(n) if d == 0 else 0.0
    p = variant.p
    assert p is not None
    if variant.kind == DisorderKind.FULL:
        return (n - 2 * d) ** p / n ** (p - 1)
    if p > n:
        raise InvalidParameterError(f"strict p-spin needs p <= n, got p={p}, n={n}")
    agreeing = n - d
    # p chosen indices, k of them on disagreeing sites
    signed = sum(
        (-1) ** k * int(comb(agreeing, p - k, exact=True)) * int(comb(d, k, exact=True)) for k in range(p + 1)
    )
    return math.factorial(p) * signed / n ** (p - 1)


def covariance_function(variant: DisorderVariant, n: int, r: float) -> float:
    """c_{p,N}(r) at an achievable overlap r = 1 - 2d/n."""
    d = round(n * (1.0 - r) / 2.0)
    if not math.isclose(1.0 - 2.0 * d / n, r, abs_tol=1e-12):
        raise InvalidParameterError(f"overlap {r} is not achievable with n={n}")
    return covariance_exact(variant, n, d) / n


def covariance_convergence_gap(variant: DisorderVariant, n: int) -> float:
    """max over achievable overlaps r of |c_{p,N}(r) - r^p|."""
    if variant.kind == DisorderKind.REM:
        raise InvalidParameterError("the REM covariance has no r^p limit to compare against")
    p = variant.p
    assert p is not None
    gap = 0.0
    for d in range(n + 1):
        r = (n - 2 * d) / n
        gap = max(gap, abs(covariance_exact(variant, n, d) / n - r**p))
    logger.debug("covariance gap for %s at n=%d: %.3e", variant.label, n, gap)
    return gap


def _pair_energies(variant: DisorderVariant, n: int, seed: int, a: int, b: int) -> tuple[float, float]:
    if variant.kind == DisorderKind.REM:
        draws = gaussian_stream(seed, max(a, b) + 1)
        return math.sqrt(n) * draws[a], math.sqrt(n) * draws[b]
    supports, coefficients = sample_couplings(variant, n, seed)
    mask = (1 << n) - 1
    supports = supports.astype(np.uint64)
    chi_a = 1 - 2 * (np.bitwise_count(supports & np.uint64(~a & mask)) & 1).astype(np.float64)
    chi_b = 1 - 2 * (np.bitwise_count(supports & np.uint64(~b & mask)) & 1).astype(np.float64)
    return float(coefficients @ chi_a), float(coefficients @ chi_b)


def empirical_covariance(
    variant: DisorderVariant, n: int, d: int, num_samples: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo mean of U(sigma)U(tau) over independent realizations, with its standard error.

    sigma is the all-up configuration and tau flips its lowest d spins; sample i uses seed + i.
    """
    if num_samples < 100:
        raise InvalidParameterError(f"need at least 100 samples, got {num_samples}")
    if not 0 <= d <= n:
        raise InvalidParameterError(f"distance must lie in [0, {n}], got {d}")
    variant.check_size(n)
    sigma = SpinConfiguration.all_up(n)
    tau = at_distance(sigma, d)
    products = np.empty(num_samples)
    for i in range(num_samples):
        u_sigma, u_tau = _pair_energies(variant, n, seed + i, sigma.bits, tau.bits)
        products[i] = u_sigma * u_tau
    return float(products.mean()), float(products.std(ddof=1) / math.sqrt(num_samples))


def ground_state_density(realization: DisorderRealization) -> float:
    """min over sigma of U(sigma)/N."""
    return float(realization.energies.min()) / realization.n


def save_realization(realization: DisorderRealization, path: Path | str):
    variant = realization.variant
    header = _HEADER.pack(
        FILE_MAGIC,
        FILE_VERSION,
        _KIND_TAGS[variant.kind],
        variant.p or 0,
        realization.n,
        realization.seed,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(realization.energies.astype("<f8").tobytes())
    logger.info("Saved %s realization (n=%d, seed=%d) to %s", variant.label, realization.n, realization.seed, path)


def load_realization(path: Path | str) -> DisorderRealization:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise InvalidParameterError(f"{path} is too short to hold a realization header")
    magic, version, tag, p, n, seed = _HEADER.unpack_from(raw)
    if magic != FILE_MAGIC:
        raise InvalidParameterError(f"{path} is not a realization file (magic {magic!r})")
    if version != FILE_VERSION:
        raise InvalidParameterError(f"unsupported realization file version {version}")
    if tag not in _TAG_KINDS:
        raise InvalidParameterError(f"unknown variant tag {tag} in {path}")
    payload = raw[_HEADER.size :]
    if len(payload) != 8 * (1 << n):
        raise DimensionError(f"{path} holds {len(payload)} payload bytes, expected {8 * (1 << n)}")
    kind = _TAG_KINDS[tag]
    variant = DisorderVariant(kind, p if kind != DisorderKind.REM else None)
    energies = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return DisorderRealization(energies=energies, variant=variant, n=n, seed=seed)
