"""One runner per command-line experiment. Each returns its rows in grid order."""

import itertools
import logging
import math
import time
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional, TypeVar

from pydantic import BaseModel
from scipy.special import ndtr

from .closedform import (
    annealed_pressure,
    critical_field,
    one_over_p_correction,
    one_over_p_term,
    paramagnet_pressure,
    qrem_branch,
    qrem_pressure,
    rem_pressure,
)
from .disorder import DisorderKind, DisorderVariant, covariance_exact
from .errors import (
    ConfigError,
    CostBudgetExceededError,
    CriticalLineError,
    InadmissibleScheduleError,
    InvalidParameterError,
    QremLabError,
)
from .geometry import diameter_tail_experiment, schedule
from .pressure import PressureEstimate, PressureMethod, exceedance_fractions, quenched_pressure, resolve_method
from .records import (
    ClosedFormRow,
    ClusterCensusRow,
    ConvergePRow,
    PhaseDiagramRow,
    PressureRow,
    SelfAveragingRow,
)
from .runconfig import RunConfig

logger = logging.getLogger("qremlab")

SELF_AVERAGING_MIN_DISORDER = 200
SELF_AVERAGING_TS = (1.0, 2.0, 3.0, 4.0)
CONVERGE_P_MIN_ORDERS = 3

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class GridPoint:
    variant: DisorderVariant
    n: int
    beta: float
    gamma: float

    def describe(self) -> str:
        return f"variant={self.variant.label} n={self.n} beta={self.beta} gamma={self.gamma}"


def grid_points(config: RunConfig, gammas: Optional[Sequence[float]] = None) -> list[GridPoint]:
    """Cartesian grid in (variant, n, beta, gamma) order."""
    return [
        GridPoint(variant, n, beta, gamma)
        for variant, n, beta, gamma in itertools.product(
            config.variants(), config.n_list, config.beta_grid, config.gamma_grid if gammas is None else gammas
        )
    ]


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """Map over a worker pool; results come back in input order whatever the completion order."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


@contextmanager
def grid_point_errors(coordinates: str) -> Iterator[None]:
    try:
        yield
    except QremLabError as exc:
        logger.error("Engine error at %s: %s", coordinates, exc)
        raise


def realization_cost(n: int, method: PressureMethod, probes: int, krylov_dim: int) -> float:
    size = float(1 << n)
    if method == PressureMethod.DENSE_EIG:
        return size**3
    if method == PressureMethod.STOCHASTIC_LANCZOS:
        return probes * krylov_dim * n * size
    return n * size


def estimate_cost(config: RunConfig, points: Sequence[GridPoint]) -> float:
    """Rough operation count of a pressure sweep: realizations times per-realization engine cost."""
    total = 0.0
    for point in points:
        method = resolve_method(config.method, point.n, point.gamma)
        total += config.num_disorder * realization_cost(point.n, method, config.probes, config.krylov_dim)
    return total


def enforce_ceiling(config: RunConfig, cost: float, scope: str):
    logger.info("Estimated cost %.3g for %s (ceiling %.3g)", cost, scope, config.max_cost)
    if cost > config.max_cost:
        raise CostBudgetExceededError(
            f"estimated cost {cost:.3g} exceeds the ceiling {config.max_cost:.3g}; raise max_cost or shrink the grid"
        )


def check_budget(config: RunConfig, points: Sequence[GridPoint]):
    enforce_ceiling(config, estimate_cost(config, points), f"{len(points)} grid points")


def _quenched(config: RunConfig, point: GridPoint) -> PressureEstimate:
    with grid_point_errors(point.describe()):
        return quenched_pressure(
            point.variant,
            point.n,
            point.beta,
            point.gamma,
            num_disorder=config.num_disorder,
            base_seed=config.base_seed,
            method=config.method,
            probes=config.probes,
            krylov_dim=config.krylov_dim,
        )


def _timed(config: RunConfig, fn: Callable[[], T]) -> tuple[T, Optional[float]]:
    started = time.perf_counter()
    result = fn()
    return result, (time.perf_counter() - started) if config.timing else None


def run_pressure(config: RunConfig) -> list[PressureRow]:
    points = grid_points(config)
    check_budget(config, points)

    def evaluate(point: GridPoint) -> PressureRow:
        estimate, elapsed = _timed(config, lambda: _quenched(config, point))
        return PressureRow(
            variant=point.variant.label,
            p=point.variant.p,
            n=point.n,
            beta=point.beta,
            gamma=point.gamma,
            value=estimate.value,
            stderr=estimate.stderr,
            disorder_stderr=estimate.disorder_stderr,
            trace_stderr=estimate.trace_stderr,
            num_samples=estimate.num_samples,
            method=estimate.method.value,
            base_seed=config.base_seed,
            probes=config.probes,
            krylov_dim=config.krylov_dim,
            wall_time_s=elapsed,
        )

    return ordered_map(evaluate, points, config.workers)


def _optional_correction(beta: float, gamma: float, p: float) -> tuple[Optional[float], Optional[float]]:
    try:
        return one_over_p_term(beta, gamma), one_over_p_correction(beta, gamma, p)
    except CriticalLineError as exc:
        logger.warning("%s", exc)
        return None, None


def run_converge_p(config: RunConfig) -> list[ConvergePRow]:
    """Quenched pressures along the p list next to the p = infinity closed form and its 1/p correction."""
    points = grid_points(config)
    if config.kind != DisorderKind.REM and len(config.variants()) < CONVERGE_P_MIN_ORDERS:
        raise ConfigError(f"converge-p needs at least {CONVERGE_P_MIN_ORDERS} interaction orders")
    if config.include_rem and config.kind != DisorderKind.REM:
        rem = DisorderVariant.rem()
        points += [
            GridPoint(rem, n, beta, gamma)
            for n, beta, gamma in itertools.product(config.n_list, config.beta_grid, config.gamma_grid)
        ]
    check_budget(config, points)

    def evaluate(point: GridPoint) -> ConvergePRow:
        estimate, elapsed = _timed(config, lambda: _quenched(config, point))
        limit = qrem_pressure(point.beta, point.gamma)
        p = point.variant.p
        _, corrected = _optional_correction(point.beta, point.gamma, math.inf if p is None else p)
        gap = estimate.value - limit
        return ConvergePRow(
            variant=point.variant.label,
            p=p,
            n=point.n,
            beta=point.beta,
            gamma=point.gamma,
            value=estimate.value,
            stderr=estimate.stderr,
            num_samples=estimate.num_samples,
            method=estimate.method.value,
            base_seed=config.base_seed,
            qrem_pressure=limit,
            one_over_p_correction=corrected,
            gap=gap,
            gap_times_p=None if p is None else gap * p,
            annealed_pressure=annealed_pressure(point.variant, point.n, point.beta),
            wall_time_s=elapsed,
        )

    return ordered_map(evaluate, points, config.workers)


def run_phase_diagram(config: RunConfig) -> list[PhaseDiagramRow]:
    """
    Quenched pressure over the (beta, Gamma) grid with the QREM closed form and both branch labels.

    The empirical branch is whichever of the classical pressure (same disorders at Gamma = 0) and
    ln cosh(beta Gamma) lies closer to the quenched value.
    """
    points = grid_points(config)
    classical_points = grid_points(config, gammas=[0.0])
    check_budget(config, points + classical_points)
    classical = {
        (point.variant, point.n, point.beta): estimate.value
        for point, estimate in zip(
            classical_points, ordered_map(lambda point: _quenched(config, point), classical_points, config.workers)
        )
    }

    def evaluate(point: GridPoint) -> PhaseDiagramRow:
        estimate, elapsed = _timed(config, lambda: _quenched(config, point))
        classical_value = classical[(point.variant, point.n, point.beta)]
        paramagnet = paramagnet_pressure(point.beta, point.gamma)
        closer_to_paramagnet = abs(estimate.value - paramagnet) < abs(estimate.value - classical_value)
        return PhaseDiagramRow(
            variant=point.variant.label,
            p=point.variant.p,
            n=point.n,
            beta=point.beta,
            gamma=point.gamma,
            value=estimate.value,
            stderr=estimate.stderr,
            num_samples=estimate.num_samples,
            method=estimate.method.value,
            base_seed=config.base_seed,
            classical_value=classical_value,
            paramagnet_pressure=paramagnet,
            qrem_pressure=qrem_pressure(point.beta, point.gamma),
            branch=qrem_branch(point.beta, point.gamma).value,
            empirical_branch="paramagnetic" if closer_to_paramagnet else "classical",
            critical_field=critical_field(point.beta),
            wall_time_s=elapsed,
        )

    return ordered_map(evaluate, points, config.workers)


def run_selfavg(config: RunConfig) -> list[SelfAveragingRow]:
    """Exceedance fractions of |Phi - E Phi| > t beta / sqrt(N) against 2 e^{-t^2/4}."""
    if config.num_disorder < SELF_AVERAGING_MIN_DISORDER:
        raise ConfigError(f"selfavg needs num_disorder >= {SELF_AVERAGING_MIN_DISORDER}, got {config.num_disorder}")
    points = grid_points(config)
    check_budget(config, points)

    def evaluate(point: GridPoint) -> list[SelfAveragingRow]:
        estimate, elapsed = _timed(config, lambda: _quenched(config, point))
        return [
            SelfAveragingRow(
                variant=point.variant.label,
                p=point.variant.p,
                n=point.n,
                beta=point.beta,
                gamma=point.gamma,
                num_disorder=estimate.num_samples,
                method=estimate.method.value,
                base_seed=config.base_seed,
                mean=estimate.value,
                t=t,
                exceedance=fraction,
                bound=bound,
                binomial_stderr=stderr,
                within_bound=fraction <= bound + 4.0 * stderr,
                wall_time_s=elapsed,
            )
            for t, fraction, bound, stderr in exceedance_fractions(
                estimate.samples, point.beta, point.n, SELF_AVERAGING_TS
            )
        ]

    return [row for rows in ordered_map(evaluate, points, config.workers) for row in rows]


def census_cost(config: RunConfig, scales: dict[DisorderVariant, tuple[float, int]]) -> float:
    """
    Rough operation count of a census: per sample, sampling the landscape (N 2^N) plus the pairwise
    linking of the augmented deep-hole set, whose size is taken from the Gaussian tail of U(sigma).
    """
    assert config.epsilon is not None
    total = 0.0
    for variant, n in itertools.product(scales, config.n_list):
        size = float(1 << n)
        tail = float(ndtr(-config.epsilon * n / math.sqrt(covariance_exact(variant, n, 0))))
        augmented = min(size, size * tail * (n + 1))
        total += config.num_disorder * (n * size + augmented**2)
    return total


def _census_scale(config: RunConfig, variant: DisorderVariant) -> tuple[float, int] | str:
    """Explicit (r, L) when both are configured, else the schedule at p; the reason when neither is usable."""
    assert config.epsilon is not None
    if config.r is not None and config.L is not None:
        if variant.p is not None:
            try:
                schedule(variant.p, config.epsilon)
            except (InadmissibleScheduleError, InvalidParameterError) as exc:
                logger.warning("%s; using explicit r=%g, L=%d", exc, config.r, config.L)
        return config.r, config.L
    if variant.p is None:
        logger.warning("The REM has no schedule and no explicit r, L were given")
        return "the REM has no schedule; pass r and L"
    try:
        plan = schedule(variant.p, config.epsilon)
    except InadmissibleScheduleError as exc:
        logger.warning("%s; reporting %s without samples", exc, variant.label)
        return exc.reason
    except InvalidParameterError as exc:
        logger.warning("%s; reporting %s without samples", exc, variant.label)
        return str(exc)
    return plan.r, plan.L


def _unscheduled_row(variant: DisorderVariant, n: int, epsilon: float, reason: str) -> ClusterCensusRow:
    return ClusterCensusRow(
        seed=None,
        epsilon=epsilon,
        r=None,
        num_components=None,
        max_diameter=None,
        max_component_size=None,
        T_norm=None,
        bound_2N_sqrt_rL=None,
        event_flag=None,
        L=None,
        variant=variant.label,
        n=n,
        deep_hole_count=None,
        norm_check=f"skipped: inadmissible schedule: {reason}",
    )


def run_cluster_census(config: RunConfig) -> list[ClusterCensusRow]:
    """
    One census row per (variant, n, seed), seeds base_seed .. base_seed + num_disorder - 1.

    A variant without a usable (r, L) gets a single row per n whose norm_check carries the reason.
    """
    if config.epsilon is None:
        raise ConfigError("cluster-census needs epsilon")
    seeds = list(range(config.base_seed, config.base_seed + config.num_disorder))
    scales = {variant: _census_scale(config, variant) for variant in config.variants()}
    usable = {variant: scale for variant, scale in scales.items() if not isinstance(scale, str)}
    enforce_ceiling(config, census_cost(config, usable), f"{len(usable) * len(config.n_list)} census cells")
    rows: list[ClusterCensusRow] = []
    for variant, scale in scales.items():
        if isinstance(scale, str):
            rows.extend(_unscheduled_row(variant, n, config.epsilon, scale) for n in config.n_list)
            continue
        r, L = scale
        for n in config.n_list:
            with grid_point_errors(f"variant={variant.label} n={n} epsilon={config.epsilon}"):
                report = diameter_tail_experiment(variant, n, config.epsilon, seeds, r=r, L=L, workers=config.workers)
            logger.info(
                "Census %s n=%d eps=%g r=%g L=%d: %d/%d samples with max diameter > NrL",
                variant.label,
                n,
                config.epsilon,
                r,
                L,
                report.events,
                report.num_samples,
            )
            rows.extend(report.rows)
    return rows


def run_closed_form(config: RunConfig) -> list[ClosedFormRow]:
    rows = []
    for beta, gamma, p in itertools.product(config.beta_grid, config.gamma_grid, config.p_list):
        term, corrected = _optional_correction(beta, gamma, p)
        rows.append(
            ClosedFormRow(
                beta=beta,
                gamma=gamma,
                p=float(p),
                rem_pressure=rem_pressure(beta),
                paramagnet_pressure=paramagnet_pressure(beta, gamma),
                qrem_pressure=qrem_pressure(beta, gamma),
                branch=qrem_branch(beta, gamma).value,
                critical_field=critical_field(beta),
                one_over_p_term=term,
                one_over_p_correction=corrected,
            )
        )
    return rows


RUNNERS: dict[str, tuple[Callable[[RunConfig], list], type[BaseModel]]] = {
    "pressure": (run_pressure, PressureRow),
    "converge-p": (run_converge_p, ConvergePRow),
    "phase-diagram": (run_phase_diagram, PhaseDiagramRow),
    "selfavg": (run_selfavg, SelfAveragingRow),
    "cluster-census": (run_cluster_census, ClusterCensusRow),
    "closed-form": (run_closed_form, ClosedFormRow),
}
