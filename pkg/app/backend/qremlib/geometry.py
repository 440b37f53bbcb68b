"""Deep-hole sets, r-connected cluster decompositions, last-exit paths and the parameter schedule."""

import logging
import math
from collections import deque
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as graph_components

from .closedform import BETA_C
from .disorder import DisorderRealization, DisorderVariant, covariance_exact, sample
from .errors import InadmissibleScheduleError, InvalidParameterError, NotConnectedError
from .hypercube import SpinConfiguration, SubsetMask, binary_entropy, distances_from, flip_view
from .operators import operator_norm
from .records import ClusterCensusRow

logger = logging.getLogger("qremlab")

NORM_BOUND_TOLERANCE = 1e-9
LN2 = math.log(2.0)


@dataclass(frozen=True)
class DeepHoleSet:
    """
    L_eps = {sigma : U(sigma) < -eps N} for one realization.

    Attributes:
        mask (SubsetMask): Members of L_eps
        epsilon (float): Deviation density eps > 0
        source (dict): Provenance of the realization (variant, n, seed)
    """

    mask: SubsetMask
    epsilon: float
    source: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.mask.n


@dataclass(frozen=True)
class ClusterDecomposition:
    """Maximal r-connected components of a region, ordered by their smallest member, with Hamming diameters."""

    components: list[SubsetMask]
    r: float
    diameters: list[int]
    n: int

    @property
    def max_diameter(self) -> int:
        return max(self.diameters, default=0)

    @property
    def max_component_size(self) -> int:
        return max((c.cardinality for c in self.components), default=0)

    def region(self) -> SubsetMask:
        members = np.zeros(1 << self.n, dtype=bool)
        for component in self.components:
            members |= component.members
        return SubsetMask(members, self.n)


def deep_holes(realization: DisorderRealization, epsilon: float) -> DeepHoleSet:
    if epsilon <= 0:
        raise InvalidParameterError(f"epsilon must be positive, got {epsilon}")
    members = realization.energies < -epsilon * realization.n
    return DeepHoleSet(SubsetMask(members, realization.n), epsilon, realization.provenance)


def augment(holes: DeepHoleSet | SubsetMask) -> SubsetMask:
    """1-step augmentation {sigma : dist(sigma, A) <= 1}."""
    mask = holes.mask if isinstance(holes, DeepHoleSet) else holes
    members = mask.members.copy()
    for j in range(mask.n):
        members |= flip_view(mask.members, j)
    return SubsetMask(members, mask.n)


def link_scale(n: int, r: float) -> float:
    """Two members are linked when their distance is strictly below this value, Nr/2."""
    return n * r / 2.0


def diameter(words: np.ndarray) -> int:
    """Largest pairwise Hamming distance among bit words (0 for fewer than two)."""
    best = 0
    for word in words:
        best = max(best, int(distances_from(int(word), words).max(initial=0)))
    return best


def connected_components(region: SubsetMask, r: float) -> ClusterDecomposition:
    """
    Maximal r-connected components of region: members joined when dist < Nr/2.

    Components are listed in order of their smallest bit word, and their diameters are exact.
    """
    if not 0 < r < 1:
        raise InvalidParameterError(f"connectivity scale r must lie in (0, 1), got {r}")
    n = region.n
    scale = link_scale(n, r)
    if scale <= 1:
        logger.warning("Link scale Nr/2=%g <= 1 at n=%d, r=%g: every member is its own component", scale, n, r)
    words = region.indices()
    size = words.shape[0]
    if size == 0:
        return ClusterDecomposition(components=[], r=r, diameters=[], n=n)
    heads, tails = [np.empty(0, dtype=np.int64)], [np.empty(0, dtype=np.int64)]
    for i in range(size - 1):
        linked = np.flatnonzero(distances_from(int(words[i]), words[i + 1 :]) < scale) + (i + 1)
        heads.append(np.full(linked.shape[0], i, dtype=np.int64))
        tails.append(linked)
    heads, tails = np.concatenate(heads), np.concatenate(tails)
    links = coo_matrix((np.ones(heads.shape[0], dtype=np.int8), (heads, tails)), shape=(size, size))
    _, labels = graph_components(links, directed=False)
    # words ascend, so first appearance of a label orders components by their smallest member
    found, first = np.unique(labels, return_index=True)
    groups = [words[labels == label] for label in found[np.argsort(first)]]
    components = [SubsetMask.from_indices(group, n) for group in groups]
    diameters = [diameter(group) for group in groups]
    return ClusterDecomposition(components=components, r=r, diameters=diameters, n=n)


def _shortest_chain(words: np.ndarray, start: int, target: int, scale: float) -> list[int]:
    """Breadth-first shortest chain of indices into words from start to target, linking dist < scale."""
    previous = {start: start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        if current == target:
            break
        linked = np.flatnonzero(distances_from(int(words[current]), words) < scale)
        for nxt in linked:
            nxt = int(nxt)
            if nxt not in previous:
                previous[nxt] = current
                queue.append(nxt)
    if target not in previous:
        raise NotConnectedError("no chain between the extremal deep holes")
    chain = [target]
    while chain[-1] != start:
        chain.append(previous[chain[-1]])
    return chain[::-1]


def _extremal_pair(words: np.ndarray) -> tuple[int, int, int]:
    """(i, j, dist) of the first pair at maximal distance, scanning rows in bit-word order."""
    best = (0, 0, 0)
    for i, word in enumerate(words):
        distances = distances_from(int(word), words)
        j = int(np.argmax(distances))
        if distances[j] > best[2]:
            best = (i, j, int(distances[j]))
    return best


def last_exit_path(
    component: SubsetMask, holes: DeepHoleSet | SubsetMask, r: float, L: int
) -> Optional[list[SpinConfiguration]]:
    """
    Extract L widely separated deep holes from an r-connected cluster, or None when the diameter hypothesis fails.

    The fine chain is a shortest chain of deep holes of the cluster with steps dist < Nr/2 between the
    extremal pair. It is thinned by last exits: the next site is the first chain point after the last
    visit to the union of the open balls B_{Nr/2} around the sites chosen so far. Every returned path
    has consecutive distances in [Nr/2, Nr) and each site lies outside the balls of all earlier sites.
    """
    if L < 2:
        raise InvalidParameterError(f"path length L must be at least 2, got {L}")
    if component.is_empty():
        raise InvalidParameterError("component is empty")
    if len(connected_components(component, r).components) != 1:
        raise NotConnectedError(f"component is not r-connected at r={r}")
    hole_mask = holes.mask if isinstance(holes, DeepHoleSet) else holes
    n = component.n
    sites = component & hole_mask
    site_words = sites.indices()
    if diameter(site_words) <= n * r * L:
        return None

    scale = link_scale(n, r)
    pieces = connected_components(sites, r)
    piece_index = int(np.argmax(pieces.diameters))
    words = pieces.components[piece_index].indices()
    start, target, _ = _extremal_pair(words)
    chain = words[_shortest_chain(words, start, target, scale)]

    chosen = [int(chain[0])]
    nearest = distances_from(chosen[0], chain)
    while True:
        covered = np.flatnonzero(nearest < scale)
        last_visit = int(covered[-1])
        if last_visit == chain.shape[0] - 1:
            break
        site = int(chain[last_visit + 1])
        chosen.append(site)
        nearest = np.minimum(nearest, distances_from(site, chain))

    if len(chosen) < L:
        logger.info(
            "Last-exit thinning produced %d < %d sites; diameter hypothesis only met across pieces", len(chosen), L
        )
        return None
    return [SpinConfiguration(word, n) for word in chosen[:L]]


@dataclass
class PathReport:
    steps_in_annulus: bool
    strongly_self_avoiding: bool
    pairwise_separated: bool
    triangle_chain: bool
    in_deep_holes: Optional[bool]
    endpoint_distance: int
    step_sum: int

    @property
    def valid(self) -> bool:
        return (
            self.steps_in_annulus
            and self.strongly_self_avoiding
            and self.pairwise_separated
            and self.triangle_chain
            and self.in_deep_holes is not False
        )


def verify_path(
    path: Sequence[SpinConfiguration], n: int, r: float, holes: Optional[DeepHoleSet | SubsetMask] = None
) -> PathReport:
    """Check consecutive steps lie in [Nr/2, Nr], each site avoids earlier open balls B_{Nr/2}, and the triangle chain."""
    if not path:
        raise InvalidParameterError("path is empty")
    words = np.array([c.bits for c in path], dtype=np.int64)
    half, full = n * r / 2.0, n * r
    steps = [int(distances_from(int(words[j - 1]), words[j : j + 1])[0]) for j in range(1, len(path))]
    avoiding = all(
        bool((distances_from(int(words[j]), words[:j]) >= half).all()) for j in range(1, len(path))
    )
    separated = all(
        bool((np.delete(distances_from(int(word), words), j) >= half).all()) for j, word in enumerate(words)
    )
    endpoint = int(distances_from(int(words[0]), words[-1:])[0])
    in_holes = None
    if holes is not None:
        hole_mask = holes.mask if isinstance(holes, DeepHoleSet) else holes
        in_holes = all(c in hole_mask for c in path)
    return PathReport(
        steps_in_annulus=all(half <= s <= full for s in steps),
        strongly_self_avoiding=avoiding,
        pairwise_separated=separated,
        triangle_chain=endpoint <= sum(steps) <= full * (len(path) - 1),
        in_deep_holes=in_holes,
        endpoint_distance=endpoint,
        step_sum=sum(steps),
    )


def path_sum_variance(path: Sequence[SpinConfiguration], variant: DisorderVariant, n: int) -> float:
    """E[S_L^2] for S_L = sum of U over the path: the double sum of the exact covariances."""
    if not path:
        raise InvalidParameterError("path is empty")
    by_distance = [covariance_exact(variant, n, d) for d in range(n + 1)]
    total = []
    for a in path:
        for b in path:
            total.append(by_distance[(a.bits ^ b.bits).bit_count()])
    return math.fsum(total)


def path_variance_bound(L: int, n: int, r: float, p: int) -> float:
    """2LN[1 + L(1-r)^p], valid for pairwise separations >= Nr/2 under c(x) = x^p."""
    return 2.0 * L * n * (1.0 + L * (1.0 - r) ** p)


def path_tail_bound(L: int, n: int, epsilon: float, variance: float) -> float:
    """Gaussian tail P(S_L < -eps N L) <= exp(-(eps N L)^2 / (2 E[S_L^2]))."""
    if variance <= 0:
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    return math.exp(-((epsilon * n * L) ** 2) / (2.0 * variance))


def correlation_radius(p: int, epsilon: float) -> float:
    """r_p = ln(4 beta_c^2 / eps) / p."""
    if p < 1 or epsilon <= 0:
        raise InvalidParameterError(f"need p >= 1 and epsilon > 0, got p={p}, epsilon={epsilon}")
    ratio = 4.0 * BETA_C * BETA_C / epsilon
    if ratio <= 1:
        raise InvalidParameterError(f"epsilon={epsilon} >= 4 beta_c^2 leaves no positive correlation radius")
    return math.log(ratio) / p


@dataclass(frozen=True)
class ParameterSchedule:
    p: int
    epsilon: float
    r: float
    delta: float
    L: int
    c: float

    @property
    def rL(self) -> float:
        return self.r * self.L

    @property
    def entropy(self) -> float:
        return binary_entropy(self.r)

    @property
    def union_bound_exponent(self) -> float:
        """ln 2 + L gamma(r) - L eps^2 / (4(1 + L delta)), the negated rate c."""
        return LN2 + self.L * self.entropy - self.L * self.epsilon**2 / (4.0 * (1.0 + self.L * self.delta))

    def diameter_tail_bound(self, n: int) -> float:
        return math.exp(-n * self.c)


def schedule(p: int, epsilon: float) -> ParameterSchedule:
    """
    The smallest integer L in the bracketing window at r_p whose rate c_p(eps) is positive.

    Raises InadmissibleScheduleError when r_p >= 1, when the window holds no integer, or when every
    integer in it leaves c_p <= 0.
    """
    r = correlation_radius(p, epsilon)
    if r >= 1:
        raise InadmissibleScheduleError(p, epsilon, f"correlation radius r_p={r:.6g} is not below 1")
    delta = (1.0 - r) ** p
    entropy = binary_entropy(r)
    root = math.sqrt(entropy)
    low = (epsilon / (4.0 * root) - 1.0) / delta
    high = (epsilon / (2.0 * root) - 1.0) / delta
    first, last = max(1, math.ceil(low)), math.floor(high)
    if first > last:
        raise InadmissibleScheduleError(p, epsilon, f"no integer L in [{low:.6g}, {high:.6g}]")
    best = -math.inf
    for L in range(first, last + 1):
        c = L * (epsilon**2 / (4.0 * (1.0 + L * delta)) - entropy) - LN2
        if c > 0:
            return ParameterSchedule(p=p, epsilon=epsilon, r=r, delta=delta, L=L, c=c)
        best = max(best, c)
    raise InadmissibleScheduleError(
        p, epsilon, f"rate c_p is not positive for any L in [{first}, {last}] (best {best:.6g})"
    )


@dataclass
class NormBoundReport:
    t_norm: float
    bound: float
    holds: Optional[bool]
    skipped_reason: Optional[str] = None

    @property
    def status(self) -> str:
        if self.holds is None:
            return f"skipped: {self.skipped_reason}"
        return "holds" if self.holds else "violated"


def decomposition_norm(decomp: ClusterDecomposition) -> float:
    """||T|| on the union of the components, the maximum over components (direct sum)."""
    return max((operator_norm(c) for c in decomp.components), default=0.0)


def norm_bound_check(decomp: ClusterDecomposition, r: float, L: int) -> NormBoundReport:
    """||T_{L+}|| <= 2N sqrt(rL) when max diameter <= NrL, 0 < rL < 1/2 and N > 1/(rL)."""
    n = decomp.n
    rl = r * L
    bound = 2.0 * n * math.sqrt(rl)
    t_norm = decomposition_norm(decomp)
    reason = None
    if not 0 < rl < 0.5:
        reason = f"rL={rl:g} outside (0, 1/2)"
    elif n <= 1.0 / rl:
        reason = f"N={n} <= 1/(rL)={1.0 / rl:g}"
    elif decomp.max_diameter > n * rl:
        reason = f"max diameter {decomp.max_diameter} > NrL={n * rl:g}"
    if reason is not None:
        logger.debug("Norm bound check skipped: %s", reason)
        return NormBoundReport(t_norm=t_norm, bound=bound, holds=None, skipped_reason=reason)
    return NormBoundReport(t_norm=t_norm, bound=bound, holds=t_norm <= bound + NORM_BOUND_TOLERANCE)


def census_row(realization: DisorderRealization, epsilon: float, r: float, L: int) -> ClusterCensusRow:
    n = realization.n
    holes = deep_holes(realization, epsilon)
    decomp = connected_components(augment(holes), r)
    report = norm_bound_check(decomp, r, L)
    return ClusterCensusRow(
        seed=realization.seed,
        epsilon=epsilon,
        r=r,
        num_components=len(decomp.components),
        max_diameter=decomp.max_diameter,
        max_component_size=decomp.max_component_size,
        T_norm=report.t_norm,
        bound_2N_sqrt_rL=report.bound,
        event_flag=decomp.max_diameter > n * r * L,
        L=L,
        variant=realization.variant.label,
        n=n,
        deep_hole_count=holes.mask.cardinality,
        norm_check=report.status,
    )


@dataclass
class DiameterTailReport:
    events: int
    num_samples: int
    r: float
    L: int
    bound: Optional[float]
    rows: list[ClusterCensusRow] = field(default_factory=list)

    @property
    def frequency(self) -> float:
        return self.events / self.num_samples

    @property
    def binomial_stderr(self) -> float:
        reference = self.frequency if self.bound is None else min(self.bound, 1.0)
        return math.sqrt(reference * (1.0 - reference) / self.num_samples)

    @property
    def within_bound(self) -> Optional[bool]:
        if self.bound is None:
            return None
        return self.frequency <= self.bound + 4.0 * self.binomial_stderr


def diameter_tail_experiment(
    variant: DisorderVariant,
    n: int,
    epsilon: float,
    seeds: Sequence[int],
    r: Optional[float] = None,
    L: Optional[int] = None,
    workers: int = 1,
) -> DiameterTailReport:
    """
    Empirical frequency of {max cluster diameter > NrL} over the given disorder seeds.

    With r and L omitted they come from schedule(p, epsilon) and the report carries the bound e^{-N c_p}.
    """
    if not seeds:
        raise InvalidParameterError("need at least one seed")
    bound = None
    if r is None or L is None:
        if variant.p is None:
            raise InvalidParameterError("the REM has no schedule; pass r and L explicitly")
        plan = schedule(variant.p, epsilon)
        r, L = plan.r, plan.L
        bound = plan.diameter_tail_bound(n)

    def evaluate(seed: int) -> ClusterCensusRow:
        return census_row(sample(variant, n, seed), epsilon, r, L)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate, seeds))
    else:
        rows = [evaluate(seed) for seed in seeds]
    events = sum(1 for row in rows if row.event_flag)
    return DiameterTailReport(events=events, num_samples=len(rows), r=r, L=L, bound=bound, rows=rows)
