"""Ensemble studies: convergence curves, critical time-interval search,
layers-to-threshold readouts, and depth-scaling fits.

Jobs are embarrassingly parallel across graphs; the worker count is capped
by the FALQON_LAB_THREADS environment variable. Aggregation always folds the
per-graph results in input order, so outputs are deterministic.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .feedback import LawKind
from .problem import Graph, sample_graphs
from .runner import RunConfig, run_falqon

# Approximation-ratio guarantee of the best classical algorithm, used as the
# layers-to-threshold target throughout.
GW_RATIO = 0.932

DEFAULT_ETA = 1e-6
DEFAULT_RESOLUTION = 1e-3
DEFAULT_L_MAX = 1000

# Search windows for the critical time interval; the first-order law breaks
# down far earlier than the second-order ones.
DEFAULT_BRACKETS: dict[LawKind, tuple[float, float]] = {
    LawKind.FO: (0.004, 0.12),
    LawKind.SO_HYBRID: (0.02, 0.44),
    LawKind.SO_PURE: (0.02, 0.44),
}

# Below this many amplitude-layers a process pool costs more than it saves.
_PARALLEL_WORK_FLOOR = 1 << 24


class EnsembleError(ValueError):
    """Empty or inconsistent graph ensemble."""


class BracketError(RuntimeError):
    """The monotonicity predicate does not bracket between dt_lo and dt_hi."""


class PredicateNotMonotoneError(BracketError):
    """The predicate was observed false below the bisection result.

    Very large dt can freeze the dynamics into a mediocre stationary state
    whose curve is trivially monotone, so the predicate regains truth beyond
    the first breakdown. Carries the violating dt so callers can tighten the
    bracket below it and retry.
    """

    def __init__(self, message: str, violating_dt: float):
        super().__init__(message)
        self.violating_dt = violating_dt


@dataclass
class EnsembleCurve:
    n: int
    law: LawKind
    dt: float
    mean_r: np.ndarray
    std_r: np.ndarray
    graph_count: int


@dataclass
class CriticalDt:
    n: int
    law: LawKind
    dt_c: float
    resolution: float
    l_max: int
    eta: float
    curve: EnsembleCurve | None = None


@dataclass
class ScalingFit:
    law: LawKind
    points: list[tuple[int, int]]
    slope: float
    intercept: float
    residuals: list[float]


@dataclass
class ScalingPoint:
    n: int
    critical: CriticalDt
    layers_required: int | None
    saturation_r: float


@dataclass
class ScalingStudy:
    law: LawKind
    points: list[ScalingPoint]
    fit: ScalingFit


@dataclass
class AppendixStudy:
    curves: dict[tuple[LawKind, float], EnsembleCurve]
    monotone_fraction: dict[tuple[LawKind, float], float]


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("FALQON_LAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _ratio_job(cfg: RunConfig) -> np.ndarray:
    return run_falqon(cfg).approx_ratios


def ensemble_ratios(
    graphs: list[Graph],
    law: LawKind,
    dt: float,
    l_max: int,
    eps_b: float | None = None,
    workers: int | None = None,
) -> np.ndarray:
    """Per-graph approximation-ratio curves, shape (graphs, l_max)."""
    if not graphs:
        raise EnsembleError("empty graph ensemble")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise EnsembleError("all graphs in an ensemble must share the vertex count")
    cfgs = [RunConfig(graph=g, dt=dt, max_layers=l_max, law=law, eps_b=eps_b) for g in graphs]
    nworkers = min(resolve_workers(workers), len(cfgs))
    work = len(cfgs) * l_max * (1 << n)
    if nworkers > 1 and work >= _PARALLEL_WORK_FLOOR:
        _kernels.warmup()  # compile before forking so children inherit the code
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            rows = list(pool.map(_ratio_job, cfgs))
    else:
        rows = [_ratio_job(c) for c in cfgs]
    return np.vstack(rows)


def curve_from_ratios(ratios: np.ndarray, n: int, law: LawKind, dt: float) -> EnsembleCurve:
    return EnsembleCurve(
        n=n,
        law=law,
        dt=dt,
        mean_r=ratios.mean(axis=0),
        std_r=ratios.std(axis=0),
        graph_count=ratios.shape[0],
    )


def ensemble_curve(
    graphs: list[Graph],
    law: LawKind,
    dt: float,
    l_max: int,
    eps_b: float | None = None,
    workers: int | None = None,
) -> EnsembleCurve:
    """Pointwise mean/std of the approximation ratio across an ensemble."""
    ratios = ensemble_ratios(graphs, law, dt, l_max, eps_b=eps_b, workers=workers)
    return curve_from_ratios(ratios, graphs[0].n, law, dt)


def is_monotone(mean_r: np.ndarray, eta: float) -> bool:
    """True iff the curve never drops by more than eta between steps."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    arr = np.asarray(mean_r)
    if arr.size <= 1:
        return True
    return bool(np.all(np.diff(arr) >= -eta))


def monotone_fraction(ratios: np.ndarray, eta: float) -> float:
    """Fraction of per-graph curves that are individually monotone."""
    flags = [is_monotone(row, eta) for row in ratios]
    return sum(flags) / len(flags)


def layers_to_threshold(curve: EnsembleCurve, r_target: float) -> int | None:
    """Smallest layer k with mean_r[k] >= r_target (1-based), or None."""
    if not (0.0 < r_target <= 1.0):
        raise ValueError(f"r_target must be in (0, 1], got {r_target}")
    hits = np.nonzero(curve.mean_r >= r_target)[0]
    if hits.size == 0:
        return None
    return int(hits[0]) + 1


def find_dt_c(
    graphs: list[Graph],
    law: LawKind,
    dt_lo: float,
    dt_hi: float,
    resolution: float = DEFAULT_RESOLUTION,
    l_max: int = DEFAULT_L_MAX,
    eta: float = DEFAULT_ETA,
    eps_b: float | None = None,
    workers: int | None = None,
) -> CriticalDt:
    """Largest dt on the resolution grid whose ensemble-mean curve is monotone.

    Bisects the integer grid dt_lo + k*resolution, so the returned bracket is
    exactly re-verifiable: the predicate is true at dt_c and false at
    dt_c + resolution. The predicate is assumed monotone in dt; inverted
    endpoints fail loudly, and after convergence the widest unevaluated gaps
    below dt_c are spot-checked so a false region hiding under the bisection
    path raises PredicateNotMonotoneError instead of returning silently.
    """
    if not (dt_lo > 0 and dt_hi > dt_lo):
        raise BracketError(f"need 0 < dt_lo < dt_hi, got ({dt_lo}, {dt_hi})")
    if resolution <= 0:
        raise BracketError(f"resolution must be positive, got {resolution}")
    steps = max(1, math.ceil((dt_hi - dt_lo) / resolution))
    curves: dict[int, EnsembleCurve] = {}
    verdicts: dict[int, bool] = {}

    def predicate(k: int) -> bool:
        if k in verdicts:
            return verdicts[k]
        curve = ensemble_curve(graphs, law, dt_lo + k * resolution, l_max,
                               eps_b=eps_b, workers=workers)
        curves[k] = curve
        verdicts[k] = is_monotone(curve.mean_r, eta)
        return verdicts[k]

    if not predicate(0):
        raise BracketError(
            f"mean curve already non-monotone at dt_lo={dt_lo} (law {law.value}); widen the bracket down"
        )
    if predicate(steps):
        raise BracketError(
            f"mean curve still monotone at dt_hi={dt_lo + steps * resolution} (law {law.value}); widen the bracket up"
        )
    lo, hi = 0, steps
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if predicate(mid):
            lo = mid
        else:
            hi = mid

    # Spot-check the three widest gaps between evaluated-true points under lo.
    known_true = sorted(k for k, ok in verdicts.items() if ok and k <= lo)
    gaps = [(b - a, a, b) for a, b in zip(known_true, known_true[1:]) if b - a > 1]
    for _, a, b in sorted(gaps, reverse=True)[:3]:
        probe = (a + b) // 2
        if not predicate(probe):
            raise PredicateNotMonotoneError(
                f"monotonicity predicate false at dt={dt_lo + probe * resolution:.6g} "
                f"but true at dt={dt_lo + lo * resolution:.6g} (law {law.value}); "
                "not monotone in dt, tighten the bracket below the violation",
                violating_dt=dt_lo + probe * resolution,
            )

    return CriticalDt(
        n=graphs[0].n,
        law=law,
        dt_c=dt_lo + lo * resolution,
        resolution=resolution,
        l_max=l_max,
        eta=eta,
        curve=curves[lo],
    )


def fit_line(points: list[tuple[float, float]]) -> tuple[float, float, list[float]]:
    """Ordinary least squares y = slope*x + intercept; returns residuals too."""
    if len(points) < 2:
        raise ValueError("need at least two points to fit a line")
    xs = np.array([p[0] for p in points], dtype=float)
    ys = np.array([p[1] for p in points], dtype=float)
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("all x values identical; slope undefined")
    slope = float(((xs - xbar) * (ys - ybar)).sum()) / sxx
    intercept = float(ybar - slope * xbar)
    residuals = [float(y - (slope * x + intercept)) for x, y in points]
    return slope, intercept, residuals


def graphs_for_study(n: int, count: int, seed: int) -> list[Graph]:
    """Seeded per-size ensemble; draws may repeat isomorphism classes when the
    population at that size is smaller than the requested count."""
    return sample_graphs(n, count, degree=3, seed=seed * 100003 + n)


def scaling_study(
    n_list: list[int],
    law: LawKind,
    graphs_per_n: int = 20,
    seed: int = 0,
    bracket: tuple[float, float] | None = None,
    resolution: float = DEFAULT_RESOLUTION,
    l_max: int = DEFAULT_L_MAX,
    eta: float = DEFAULT_ETA,
    r_target: float = GW_RATIO,
    workers: int | None = None,
) -> ScalingStudy:
    """Per-size critical dt, layers to the threshold at that dt, saturation
    ratio at l_max, and the least-squares line through (n, layers_required)."""
    if bracket is None:
        bracket = DEFAULT_BRACKETS[law]
    points: list[ScalingPoint] = []
    fit_points: list[tuple[int, int]] = []
    for n in n_list:
        graphs = graphs_for_study(n, graphs_per_n, seed)
        hi = bracket[1]
        while True:
            try:
                critical = find_dt_c(graphs, law, bracket[0], hi, resolution,
                                     l_max, eta, workers=workers)
                break
            except PredicateNotMonotoneError as exc:
                # retry below the frozen-plateau region that fooled bisection
                hi = exc.violating_dt
                if hi <= bracket[0] + resolution:
                    raise
        curve = critical.curve
        layers = layers_to_threshold(curve, r_target)
        saturation = float(curve.mean_r[-1])
        points.append(ScalingPoint(n=n, critical=critical, layers_required=layers,
                                   saturation_r=saturation))
        if layers is None:
            raise BracketError(
                f"threshold {r_target} never reached at n={n}, dt_c={critical.dt_c} (law {law.value})"
            )
        fit_points.append((n, layers))
    slope, intercept, residuals = fit_line([(float(n), float(y)) for n, y in fit_points])
    fit = ScalingFit(law=law, points=fit_points, slope=slope, intercept=intercept,
                     residuals=residuals)
    return ScalingStudy(law=law, points=points, fit=fit)


def appendix_study(
    graphs: list[Graph],
    dt_list: list[float],
    l_max: int = DEFAULT_L_MAX,
    eta: float = DEFAULT_ETA,
    eps_b: float | None = None,
    workers: int | None = None,
) -> AppendixStudy:
    """Paired pure-second-order vs hybrid curves on one ensemble per dt."""
    curves: dict[tuple[LawKind, float], EnsembleCurve] = {}
    fractions: dict[tuple[LawKind, float], float] = {}
    for dt in dt_list:
        for law in (LawKind.SO_PURE, LawKind.SO_HYBRID):
            ratios = ensemble_ratios(graphs, law, dt, l_max, eps_b=eps_b, workers=workers)
            curves[(law, dt)] = curve_from_ratios(ratios, graphs[0].n, law, dt)
            fractions[(law, dt)] = monotone_fraction(ratios, eta)
    return AppendixStudy(curves=curves, monotone_fraction=fractions)
