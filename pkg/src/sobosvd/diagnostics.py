"""Multiscale diagnostics: rate fits over dyadic spans and a convergence
classifier for Sobolev series.

The dyadic spans of a mode decomposition are S_l = span of the first 2^l
left vectors. Two exponents characterize a system:

* inverse estimate (``bernstein_exponent``): growth of the norm-ratio
  constant over S_l, fitted as log2 Gamma(2^l) against l;
* direct estimate (``jackson_exponent``): decay of the worst relative
  projection error of probe functions onto S_l, fitted as log2 e_l
  against l.

All fits run in log2-log2 coordinates and ignore values at or below the
floor of 1e-13, where double precision has nothing left to say.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import GridFunction
from .errors import DegenerateDataError, InsufficientRankError, ModeError
from .sobolev import DerivativeData, norm_h1
from .svd_engine import SingularSystem, numerical_rank
from .truncation import bernstein_constant

FIT_FLOOR = 1e-13

CONVERGED = "converged"
DIVERGING = "diverging"
UNDECIDED = "undecided"

# classifier policy knobs (heuristic, not theory)
STALL_REL = 1e-8
GROWTH_FACTOR = 10.0
GROWTH_WINDOW = 4
SUMMABLE_SLOPE = -1.1
SUMMABLE_R2 = 0.8


def _line_fit(x: np.ndarray, y: np.ndarray):
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), float(r2)


@dataclass(frozen=True)
class RateFit:
    """A straight-line fit in log2-log2 coordinates.

    ``xs`` and ``ys`` are the raw points handed in (ranks or levels, and
    errors or constants); slope and intercept describe the fitted line in
    the transformed coordinates, r2 its goodness. Points with y at or
    below FIT_FLOOR are excluded from the fit but kept in ``ys``.
    """

    xs: tuple[float, ...]
    ys: tuple[float, ...]
    slope: float
    intercept: float
    r2: float


def rate_fit(ranks, errors) -> RateFit:
    """Least-squares decay exponent of errors against ranks.

    Fits log2(error) against log2(rank). Needs at least three error
    values above the floor; otherwise raises DegenerateDataError.
    """
    xs = np.asarray(ranks, dtype=float)
    ys = np.asarray(errors, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DegenerateDataError("ranks and errors must be 1-d of equal length")
    usable = (ys > FIT_FLOOR) & (xs > 0) & np.isfinite(ys) & np.isfinite(xs)
    if np.count_nonzero(usable) < 3:
        raise DegenerateDataError(
            f"need at least 3 positive errors above {FIT_FLOOR}, "
            f"got {int(np.count_nonzero(usable))}"
        )
    slope, intercept, r2 = _line_fit(np.log2(xs[usable]), np.log2(ys[usable]))
    return RateFit(tuple(xs), tuple(ys), slope, intercept, r2)


def bernstein_exponent(
    system: SingularSystem, deriv: DerivativeData, max_level: int
) -> RateFit:
    """Growth exponent of the norm-ratio constant over dyadic spans.

    Computes Gamma(2^l) for l = 0..max_level and fits log2 Gamma against
    l. The numerical rank must reach 2^max_level.
    """
    max_level = int(max_level)
    if max_level < 1:
        raise DegenerateDataError(f"need max_level >= 1, got {max_level}")
    need = 2**max_level
    if numerical_rank(system) < need:
        raise InsufficientRankError(
            f"numerical rank {numerical_rank(system)} below 2^{max_level} = {need}"
        )
    levels = np.arange(max_level + 1, dtype=float)
    gammas = np.array(
        [bernstein_constant(system, deriv, 2**l) for l in range(max_level + 1)]
    )
    slope, intercept, r2 = _line_fit(levels, np.log2(gammas))
    return RateFit(tuple(levels), tuple(gammas), slope, intercept, r2)


def jackson_exponent(
    system: SingularSystem, probes, max_level: int
) -> RateFit:
    """Decay exponent of worst-probe projection error over dyadic spans.

    For each level the error is the weighted L2 distance of a probe to
    its projection onto S_l, divided by the probe's full Sobolev norm,
    maximized over the probes. Fits log2 e_l against l; with fewer than
    two levels above the floor the fitted slope is reported as zero with
    r2 zero (nothing decays that is not already at roundoff).
    """
    max_level = int(max_level)
    if max_level < 0:
        raise DegenerateDataError(f"need max_level >= 0, got {max_level}")
    need = 2**max_level
    if numerical_rank(system) < need:
        raise InsufficientRankError(
            f"numerical rank {numerical_rank(system)} below 2^{max_level} = {need}"
        )
    probes = list(probes)
    if not probes:
        raise DegenerateDataError("need at least one probe")
    n_row = system.left_vectors.shape[0]
    w = system.row_weights
    vectors = []
    h1_norms = []
    for p in probes:
        if not isinstance(p, GridFunction) or p.ndim != 1:
            raise ModeError("probes must be one-axis grid functions")
        if p.axes[0].n != n_row:
            raise ModeError(
                f"probe has {p.axes[0].n} nodes, decomposition rows have {n_row}"
            )
        if system.axes is not None and not p.axes[0].is_compatible(
            system.axes[system.mode]
        ):
            raise ModeError("probe axis does not match the decomposed axis")
        h1 = norm_h1(p)
        if h1 <= 0.0:
            raise DegenerateDataError("probe with zero Sobolev norm")
        vectors.append(p.values)
        h1_norms.append(h1)

    errs = np.empty(max_level + 1)
    for l in range(max_level + 1):
        span = system.left_vectors[:, : 2**l]
        worst = 0.0
        for vec, h1 in zip(vectors, h1_norms):
            coeff = span.T @ (w * vec)
            resid = vec - span @ coeff
            err = float(np.sqrt(max(resid @ (w * resid), 0.0))) / h1
            worst = max(worst, err)
        errs[l] = worst

    levels = np.arange(max_level + 1, dtype=float)
    usable = errs > FIT_FLOOR
    if np.count_nonzero(usable) < 2:
        return RateFit(tuple(levels), tuple(errs), 0.0, 0.0, 0.0)
    slope, intercept, r2 = _line_fit(levels[usable], np.log2(errs[usable]))
    return RateFit(tuple(levels), tuple(errs), slope, intercept, r2)


def h1_convergence_flag(partial_sums) -> str:
    """Classify a nondecreasing sequence of Sobolev partial sums.

    Returns one of "converged", "diverging", "undecided":

    * converged when the series has stalled (last two increments below
      STALL_REL of the last value) or the increments fall off like a
      power of the index with exponent clearly below -1, which makes
      the series summable;
    * diverging when the increments are non-decreasing across the last
      GROWTH_WINDOW points and the last value exceeds GROWTH_FACTOR
      times the first;
    * undecided otherwise.

    All thresholds are relative, so the answer is invariant under
    positive scaling. Needs at least four points.
    """
    s = np.asarray(partial_sums, dtype=float)
    if s.ndim != 1 or s.size < 4:
        raise DegenerateDataError("need at least 4 partial sums")
    if not np.all(np.isfinite(s)):
        raise DegenerateDataError("partial sums must be finite")
    scale = float(max(abs(s[-1]), np.finfo(float).tiny))
    d = np.diff(s)
    if np.any(d < -1e-12 * scale):
        raise DegenerateDataError("partial sums must be nondecreasing")

    if np.all(d[-2:] < STALL_REL * scale):
        return CONVERGED
    if (
        np.all(np.diff(d[-(GROWTH_WINDOW - 1) :]) >= 0)
        and s[-1] > GROWTH_FACTOR * s[0]
    ):
        return DIVERGING

    idx = np.arange(1, s.size, dtype=float)
    usable = d > FIT_FLOOR * scale
    if np.count_nonzero(usable) >= 3:
        slope, _, r2 = _line_fit(np.log2(idx[usable]), np.log2(d[usable]))
        if slope <= SUMMABLE_SLOPE and r2 >= SUMMABLE_R2:
            return CONVERGED
    return UNDECIDED
