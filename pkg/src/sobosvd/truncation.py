"""Rank truncation, exact error identities and two-sided Sobolev bounds.

For a bivariate grid function with weighted SVD sum_k sigma_k psi_k phi_k
the rank-r truncation keeps the first r triples. Because the psi and phi
families are orthonormal and differentiation acts factor by factor, the
Sobolev norms of the truncation and of its error are exact series in the
decomposition data:

    |u_r|_1^2       = sum_{k<=r} sigma_k^2 (1 + |psi_k'|^2 + |phi_k'|^2)
    |u - u_r|_1^2   = same sum over k > r

and per mode, with the one-direction norm,

    |P_j u|_{e_j}^2 = sum_{k<=r_j} sigma_k^2 (1 + |dpsi_k|^2).

In higher dimension the per-mode projections compose into the Tucker
truncation; its L2 error is bounded by the sum of per-mode spectral
tails, and its full Sobolev error is sandwiched between the largest
per-mode tail series and the sum of tail series with the L2 tails added
once more. An alternating refinement of the subspaces (``hooi``) gives a
computable reference for quasi-optimality factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discretization import GridFunction, check_mode
from .errors import InsufficientRankError, ModeError, SobosvdError
from .sobolev import (
    DerivativeData,
    derivative_data,
    norm_ek,
    norm_h1,
    norm_l2,
)
from .svd_engine import SingularSystem, mode_svd
from .tensor_core import dematricize, matricize, mode_product


class H1Identity(NamedTuple):
    norm_sq: float
    error_sq: float


class EkIdentity(NamedTuple):
    norm_sq: float
    error_sq: float


class BoundCheck(NamedTuple):
    lower: float
    value: float
    upper: float
    holds: bool


def _padded_dpsi(system: SingularSystem, deriv: DerivativeData | None) -> np.ndarray:
    """dpsi norms padded with zeros for unresolved directions.

    Directions dropped by the retain threshold carry spectral weight
    below noise; they enter the series with their L2 mass only.
    """
    out = np.zeros(system.k_max)
    if deriv is not None and deriv.count:
        m = min(deriv.count, system.k_max)
        out[:m] = deriv.dpsi_norms[:m]
    return out


def _check_rank(r: int, k_max: int) -> int:
    r = int(r)
    if not 0 <= r <= k_max:
        raise ModeError(f"rank {r} out of range, decomposition has {k_max} directions")
    return r


def truncate_svd(system: SingularSystem, r: int) -> GridFunction:
    """Rank-r truncation of a bivariate mode decomposition, on the grid.

    The system must come from ``mode_svd`` of a two-axis grid function.
    ``r = 0`` returns the zero function.
    """
    if system.axes is None or system.mat_shape is None:
        raise ModeError("system carries no grid, cannot fold back")
    if len(system.axes) != 2:
        raise ModeError("grid truncation is for two-axis functions")
    r = _check_rank(r, system.k_max)
    rec = (system.left_vectors[:, :r] * system.sigmas[:r]) @ system.right_vectors[:, :r].T
    vals = dematricize(rec, system.mat_shape)
    return GridFunction(system.axes, vals)


def h1_identity(
    system: SingularSystem,
    deriv_left: DerivativeData,
    deriv_right: DerivativeData,
    r: int,
) -> H1Identity:
    """Exact Sobolev series for a rank-r truncation and its error.

    ``deriv_left`` belongs to the decomposed mode of ``system``;
    ``deriv_right`` comes from the complementary mode of the same
    function, whose left vectors are the phi_k here. Both series match
    the measured norms to roundoff while every direction is retained.
    """
    r = _check_rank(r, system.k_max)
    sig_sq = system.sigmas**2
    dl = _padded_dpsi(system, deriv_left)
    dr = _padded_dpsi(system, deriv_right)
    terms = sig_sq * (1.0 + dl**2 + dr**2)
    return H1Identity(float(np.sum(terms[:r])), float(np.sum(terms[r:])))


def ek_identity(
    u: GridFunction,
    mode: int,
    r: int,
    *,
    system: SingularSystem | None = None,
    deriv: DerivativeData | None = None,
) -> EkIdentity:
    """One-direction Sobolev series for a single-mode projection.

    Value and tail of sum_k sigma_k^2 (1 + |dpsi_k|^2) split at rank r.
    Matches the measured e_mode norms of the projection and its error.
    """
    mode = check_mode(mode, u.ndim)
    if system is None:
        system = mode_svd(u, mode)
    if deriv is None:
        deriv = derivative_data(u, system, mode)
    r = _check_rank(r, system.k_max)
    terms = system.sigmas**2 * (1.0 + _padded_dpsi(system, deriv) ** 2)
    return EkIdentity(float(np.sum(terms[:r])), float(np.sum(terms[r:])))


@dataclass(frozen=True, eq=False)
class TuckerApprox:
    """A rank-vector truncation: per-mode bases and the projected function."""

    rank_vector: tuple[int, ...]
    factors: tuple[np.ndarray, ...]
    projected: GridFunction
    error_history: tuple[float, ...] | None = None


def _apply_projection(
    u: GridFunction, factors: list[np.ndarray]
) -> GridFunction:
    """Analysis then synthesis against weighted-orthonormal mode bases."""
    coeff = u.values
    for j, q in enumerate(factors):
        analysis = (q * u.axes[j].quad_weights[:, None]).T
        coeff = mode_product(coeff, analysis, j)
    vals = coeff
    for j, q in enumerate(factors):
        vals = mode_product(vals, q, j)
    return GridFunction(u.axes, vals)


def _checked_ranks(u: GridFunction, ranks) -> tuple[int, ...]:
    rv = tuple(int(r) for r in ranks)
    if len(rv) != u.ndim:
        raise ModeError(f"rank vector length {len(rv)} != {u.ndim} axes")
    for j, r in enumerate(rv):
        if r < 0:
            raise ModeError(f"negative rank {r} at mode {j}")
        if r > u.shape[j]:
            raise ModeError(f"rank {r} exceeds mode {j} size {u.shape[j]}")
    return rv


def hosvd_project(
    u: GridFunction,
    ranks,
    *,
    systems: tuple[SingularSystem, ...] | None = None,
) -> TuckerApprox:
    """Compose the per-mode spectral projections at a rank vector.

    Each mode keeps the span of its first r_j left singular vectors; the
    projections commute, and the L2 error of the composition is bounded
    by the sum of per-mode discarded spectral weight.
    """
    if u.ndim < 2:
        raise ModeError("projection needs at least two axes")
    rv = _checked_ranks(u, ranks)
    if systems is None:
        systems = tuple(mode_svd(u, j) for j in range(u.ndim))
    factors = []
    for j, r in enumerate(rv):
        r_eff = min(r, systems[j].k_max)
        factors.append(systems[j].left_vectors[:, :r_eff])
    projected = _apply_projection(u, factors)
    return TuckerApprox(rv, tuple(factors), projected)


def hooi(
    u: GridFunction,
    ranks,
    max_iters: int = 50,
    tol: float = 1e-12,
) -> TuckerApprox:
    """Alternating refinement of the per-mode subspaces at fixed ranks.

    Starts from the spectral projection bases. Each mode update keeps the
    dominant weighted left subspace of the tensor contracted with every
    other analysis map, which cannot increase the L2 error. Stops when an
    entire sweep improves the error by less than tol, or at max_iters
    sweeps. Returns the best subspaces seen, with the error history.
    """
    if u.ndim < 2:
        raise ModeError("refinement needs at least two axes")
    rv = _checked_ranks(u, ranks)
    if max_iters < 1:
        raise SobosvdError(f"max_iters must be >= 1, got {max_iters}")
    d = u.ndim
    systems = tuple(mode_svd(u, j) for j in range(d))
    factors = [systems[j].left_vectors[:, : min(rv[j], systems[j].k_max)] for j in range(d)]

    def current_error(fs) -> float:
        return norm_l2(u - _apply_projection(u, fs))

    u_norm = norm_l2(u)
    err = current_error(factors)
    history = [err]
    best_err = err
    best = [f.copy() for f in factors]

    for _ in range(max_iters):
        for j in range(d):
            b = u.values
            for i in range(d):
                if i == j:
                    continue
                analysis = (factors[i] * u.axes[i].quad_weights[:, None]).T
                b = mode_product(b, analysis, i)
            mat, _ = matricize(b, (j,))
            w = u.axes[j].quad_weights
            scaled = mat * np.sqrt(w)[:, None]
            q, _, _ = np.linalg.svd(scaled, full_matrices=False)
            r_eff = min(rv[j], q.shape[1])
            new = q[:, :r_eff] / np.sqrt(w)[:, None]
            # deterministic sign: largest-magnitude entry positive
            pick = np.argmax(np.abs(new), axis=0)
            flip = new[pick, np.arange(new.shape[1])] < 0
            new[:, flip] *= -1.0
            factors[j] = new
        err = current_error(factors)
        improvement = history[-1] - err
        history.append(err)
        if err < best_err:
            best_err = err
            best = [f.copy() for f in factors]
        if improvement < tol * max(u_norm, 1.0):
            break

    projected = _apply_projection(u, best)
    return TuckerApprox(rv, tuple(best), projected, tuple(history))


def bernstein_constant(
    system: SingularSystem, deriv: DerivativeData, r: int
) -> float:
    """Largest one-direction Sobolev/L2 norm ratio over the leading span.

    Over the span of the first r left vectors the squared ratio is the
    top eigenvalue of I + Gram(dpsi_1..dpsi_r), computed with the axis
    weights. Always at least one.
    """
    r = int(r)
    if r < 1:
        raise InsufficientRankError(f"need r >= 1, got {r}")
    if r > deriv.count:
        raise InsufficientRankError(
            f"only {deriv.count} retained directions, requested {r}"
        )
    g = deriv.gammas[:, :r]
    b = np.eye(r) + g.T @ (system.row_weights[:, None] * g)
    top = float(np.linalg.eigvalsh(b)[-1])
    return float(np.sqrt(max(top, 1.0)))


@dataclass(frozen=True)
class ErrorReport:
    """Everything measured and predicted for one rank-vector truncation.

    measured_* come from norms of actual residuals on the grid;
    *_series values are evaluations of the exact spectral series;
    the bounds fields are the two-sided estimates. ``bound_checks``
    evaluates every lower <= value <= upper triple with the stored
    slack.
    """

    rank_vector: tuple[int, ...]
    residual_l2: float
    residual_h1: float
    residual_ek: tuple[float, ...]
    approx_h1_sq: float
    h1_norm_sq_series: float | None
    h1_error_sq_series: float | None
    ek_norm_sq_series: tuple[float, ...]
    ek_error_sq_series: tuple[float, ...]
    l2_tail_sq_sum: float
    quasi_opt_reference: float | None
    h1_lower: float
    h1_upper: float
    norm_lower: float
    norm_upper: float
    bernstein: tuple[float, ...]
    h1_budget: float
    slack: float

    def bound_checks(self) -> dict[str, BoundCheck]:
        s = self.slack

        def check(lower, value, upper):
            return BoundCheck(
                lower, value, upper, bool(lower - s <= value <= upper + s)
            )

        out = {
            "approx_h1": check(self.norm_lower, self.approx_h1_sq, self.norm_upper),
            "residual_h1": check(self.h1_lower, self.residual_h1**2, self.h1_upper),
            "residual_l2": check(0.0, self.residual_l2**2, self.l2_tail_sq_sum),
        }
        if self.quasi_opt_reference is not None:
            out["quasi_opt"] = check(
                0.0, self.residual_l2**2, self.quasi_opt_reference
            )
        return out

    @property
    def bounds_hold(self) -> bool:
        return all(c.holds for c in self.bound_checks().values())

    def to_dict(self) -> dict:
        return {
            "rank_vector": list(self.rank_vector),
            "measured": {
                "l2": self.residual_l2,
                "h1": self.residual_h1,
                "ek": list(self.residual_ek),
                "approx_h1_sq": self.approx_h1_sq,
            },
            "series": {
                "h1_norm_sq": self.h1_norm_sq_series,
                "h1_error_sq": self.h1_error_sq_series,
                "ek_norm_sq": list(self.ek_norm_sq_series),
                "ek_error_sq": list(self.ek_error_sq_series),
            },
            "bounds": {
                "l2_tail_sq_sum": self.l2_tail_sq_sum,
                "quasi_opt_reference": self.quasi_opt_reference,
                "h1_lower": self.h1_lower,
                "h1_upper": self.h1_upper,
                "norm_lower": self.norm_lower,
                "norm_upper": self.norm_upper,
            },
            "bernstein": list(self.bernstein),
            "h1_budget": self.h1_budget,
            "slack": self.slack,
            "checks": {
                name: {
                    "lower": c.lower,
                    "value": c.value,
                    "upper": c.upper,
                    "holds": c.holds,
                }
                for name, c in self.bound_checks().items()
            },
        }


def h1_sandwich(
    u: GridFunction,
    ranks,
    *,
    systems: tuple[SingularSystem, ...] | None = None,
    derivs: tuple[DerivativeData, ...] | None = None,
    hooi_reference: bool = False,
    slack: float = 1e-9,
) -> ErrorReport:
    """Measure a rank-vector truncation and evaluate all its bounds.

    Builds the truncation, measures residual norms on the grid, then
    evaluates the spectral series, the two-sided Sobolev estimates and
    the per-mode norm-ratio constants. ``hooi_reference`` additionally
    runs the alternating refinement and reports d times its squared L2
    error as the quasi-optimality reference.

    Precomputed ``systems``/``derivs`` (one per mode) avoid repeated
    decompositions across a rank sweep.
    """
    if u.ndim < 2:
        raise ModeError("need at least two axes")
    d = u.ndim
    rv = _checked_ranks(u, ranks)
    if systems is None:
        systems = tuple(mode_svd(u, j) for j in range(d))
    if derivs is None:
        derivs = tuple(derivative_data(u, systems[j], j) for j in range(d))

    approx = hosvd_project(u, rv, systems=systems)
    resid = u - approx.projected
    residual_l2 = norm_l2(resid)
    residual_h1 = norm_h1(resid)
    residual_ek = tuple(norm_ek(resid, j) for j in range(d))
    approx_h1_sq = norm_h1(approx.projected) ** 2

    kept_w = []  # per mode: sum_{k<=r} sigma^2 (1 + dpsi^2)
    tail_w = []
    kept_sq = []  # plain sigma^2 partial sums
    tail_sq = []
    for j in range(d):
        sig_sq = systems[j].sigmas ** 2
        terms = sig_sq * (1.0 + _padded_dpsi(systems[j], derivs[j]) ** 2)
        r = min(rv[j], systems[j].k_max)
        kept_w.append(float(np.sum(terms[:r])))
        tail_w.append(float(np.sum(terms[r:])))
        kept_sq.append(float(np.sum(sig_sq[:r])))
        tail_sq.append(float(np.sum(sig_sq[r:])))

    if d == 2:
        r_eff = min(rv)
        ident = h1_identity(systems[0], derivs[0], derivs[1], min(r_eff, systems[0].k_max))
        h1_norm_sq_series, h1_error_sq_series = ident.norm_sq, ident.error_sq
    else:
        h1_norm_sq_series = h1_error_sq_series = None

    gammas = []
    for j in range(d):
        r_g = min(rv[j], derivs[j].count)
        gammas.append(
            bernstein_constant(systems[j], derivs[j], r_g) if r_g >= 1 else 1.0
        )

    gamma_sq = np.array(gammas) ** 2
    h1_budget = 0.0
    for j in range(d):
        cross = float(np.sum(gamma_sq)) - gamma_sq[j]
        h1_budget += kept_w[j] + kept_sq[j] * cross

    quasi_ref = None
    if hooi_reference:
        refined = hooi(u, rv)
        quasi_ref = d * norm_l2(u - refined.projected) ** 2

    return ErrorReport(
        rank_vector=rv,
        residual_l2=residual_l2,
        residual_h1=residual_h1,
        residual_ek=residual_ek,
        approx_h1_sq=approx_h1_sq,
        h1_norm_sq_series=h1_norm_sq_series,
        h1_error_sq_series=h1_error_sq_series,
        ek_norm_sq_series=tuple(kept_w),
        ek_error_sq_series=tuple(tail_w),
        l2_tail_sq_sum=float(np.sum(tail_sq)),
        quasi_opt_reference=quasi_ref,
        h1_lower=float(np.max(tail_w)),
        h1_upper=float(np.sum(tail_w) + np.sum(tail_sq)),
        norm_lower=float(np.sum(kept_sq)) / d,
        norm_upper=float(np.sum(kept_w)),
        bernstein=tuple(float(g) for g in gammas),
        h1_budget=float(h1_budget),
        slack=float(slack),
    )
