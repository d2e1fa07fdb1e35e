"""Analytic reference functions with known decomposition data.

Each case samples a function on the unit cube whose weighted SVD data is
known in closed form, so tests and the command line can compare discrete
results against independent values. Derivations are classical one-liners
and are restated with each builder; orthogonality of the sine families
over [0, 1] does the work everywhere.

Catalog
-------
SEP1      sin(pi x) sin(pi y), rank one.
SINSUM    sum_k c_k sin(k pi x) sin(k pi y), finite rank.
BROWNIAN  min(x, y), the Brownian-motion covariance, full rank with
          polynomially decaying spectrum.
SEP3D     sin(pi x) sin(pi y) sin(pi z), rank one per mode.
SUM3D     two orthonormal separable sine terms in three variables.
EXPXY     exp(x y); no closed spectrum, oracle by self-refinement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expi, polygamma

from .discretization import Axis, GridFunction, make_axis, sample
from .errors import ConfigError, UnknownCaseError


@dataclass(frozen=True)
class CaseOracle:
    """Closed-form decomposition data, any field may be missing.

    ``sigmas(m)`` and ``dpsi_norms(m)`` give the first m singular values
    and left-vector derivative norms of any mode (the catalog cases are
    mode-symmetric). ``sigma_tail_sq(r)`` and ``h1_tail_sq(r)`` are the
    spectral tails after rank r: plain squared singular values, and the
    full Sobolev error series of a bivariate truncation.
    """

    sigmas: Callable[[int], np.ndarray] | None = None
    dpsi_norms: Callable[[int], np.ndarray] | None = None
    l2_norm: float | None = None
    h1_norm_sq: float | None = None
    sigma_tail_sq: Callable[[int], float] | None = None
    h1_tail_sq: Callable[[int], float] | None = None


@dataclass(frozen=True)
class AnalyticCase:
    name: str
    dim: int
    sampler: Callable
    oracle: CaseOracle
    params: dict = field(default_factory=dict)
    # relative accuracy the trapezoid grid reaches against the oracle at
    # the sizes the acceptance checks use
    spectral_rtol: float = 1e-3
    summary: str = ""


def _sep1() -> AnalyticCase:
    """sin(pi x) sin(pi y).

    Both factors have squared norm 1/2, so the only singular value is
    1/2 with normalized vectors sqrt(2) sin(pi x), whose derivative norm
    is pi. Sobolev norm squared: 1/4 + pi^2/4 + pi^2/4.
    """
    h1_sq = (1.0 + 2.0 * np.pi**2) / 4.0

    def tail_sq(r: int) -> float:
        return 0.0 if r >= 1 else 0.25

    def h1_tail(r: int) -> float:
        return 0.0 if r >= 1 else h1_sq

    return AnalyticCase(
        name="SEP1",
        dim=2,
        sampler=lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
        oracle=CaseOracle(
            sigmas=lambda m: np.full(min(m, 1), 0.5)[:m],
            dpsi_norms=lambda m: np.full(min(m, 1), np.pi)[:m],
            l2_norm=0.5,
            h1_norm_sq=h1_sq,
            sigma_tail_sq=tail_sq,
            h1_tail_sq=h1_tail,
        ),
        summary="rank-one product of sines",
    )


def _sinsum(coeffs: Sequence[float]) -> AnalyticCase:
    """sum_k c_k sin(k pi x) sin(k pi y).

    The sine factors are orthogonal with squared norm 1/2, so the
    singular values are c_k / 2 with vectors sqrt(2) sin(k pi x) and
    derivative norms k pi, ordered by decreasing c_k.
    """
    c = tuple(float(v) for v in coeffs)
    if len(c) == 0:
        raise ConfigError("SINSUM needs at least one coefficient")
    if any(v <= 0 for v in c):
        raise ConfigError(f"SINSUM coefficients must be positive, got {c}")
    order = sorted(range(len(c)), key=lambda i: (-c[i], i))
    sig = np.array([c[i] / 2.0 for i in order])
    dps = np.array([(order[i] + 1) * np.pi for i in range(len(c))])
    terms = sig**2 * (1.0 + 2.0 * dps**2)

    def sampler(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for i, ci in enumerate(c):
            k = i + 1
            out += ci * np.sin(k * np.pi * x) * np.sin(k * np.pi * y)
        return out

    return AnalyticCase(
        name="SINSUM",
        dim=2,
        sampler=sampler,
        oracle=CaseOracle(
            sigmas=lambda m: sig[:m].copy(),
            dpsi_norms=lambda m: dps[:m].copy(),
            l2_norm=float(np.sqrt(np.sum(sig**2))),
            h1_norm_sq=float(np.sum(terms)),
            sigma_tail_sq=lambda r: float(np.sum(sig[r:] ** 2)),
            h1_tail_sq=lambda r: float(np.sum(terms[r:])),
        ),
        params={"coeffs": list(c)},
        summary="finite sum of sine products",
    )


def _brownian() -> AnalyticCase:
    """min(x, y), covariance of Brownian motion on [0, 1].

    Classical eigenexpansion: min(x, y) = sum_k lam_k e_k(x) e_k(y) with
    lam_k = ((k - 1/2) pi)^-2 and e_k = sqrt(2) sin((k - 1/2) pi x), so
    sigma_k = lam_k and the derivative norms are (k - 1/2) pi. Tail sums
    reduce to polygamma values:

        sum_{k>r} (k - 1/2)^-2 = psi_1(r + 1/2)
        sum_{k>r} (k - 1/2)^-4 = psi_3(r + 1/2) / 6

    giving |u|^2 = 1/6, |u|_1^2 = 1/6 + 1 = 7/6.
    """

    def sig_fn(m: int) -> np.ndarray:
        k = np.arange(1, m + 1)
        return ((k - 0.5) * np.pi) ** -2.0

    def dps_fn(m: int) -> np.ndarray:
        k = np.arange(1, m + 1)
        return (k - 0.5) * np.pi

    def sigma_tail_sq(r: int) -> float:
        return float(polygamma(3, r + 0.5) / (6.0 * np.pi**4))

    def h1_tail_sq(r: int) -> float:
        return sigma_tail_sq(r) + float(2.0 * polygamma(1, r + 0.5) / np.pi**2)

    return AnalyticCase(
        name="BROWNIAN",
        dim=2,
        sampler=lambda x, y: np.minimum(x, y),
        oracle=CaseOracle(
            sigmas=sig_fn,
            dpsi_norms=dps_fn,
            l2_norm=float(np.sqrt(1.0 / 6.0)),
            h1_norm_sq=7.0 / 6.0,
            sigma_tail_sq=sigma_tail_sq,
            h1_tail_sq=h1_tail_sq,
        ),
        summary="Brownian covariance min(x, y)",
    )


def _sep3d() -> AnalyticCase:
    """sin(pi x) sin(pi y) sin(pi z).

    Every mode splits off one sine factor of norm 2^-1/2 against a
    product of two with norm 1/2, so each mode has the single singular
    value 2^-3/2; derivative norm of the normalized factor is pi.
    """
    return AnalyticCase(
        name="SEP3D",
        dim=3,
        sampler=lambda x, y, z: np.sin(np.pi * x)
        * np.sin(np.pi * y)
        * np.sin(np.pi * z),
        oracle=CaseOracle(
            sigmas=lambda m: np.full(min(m, 1), 2.0**-1.5)[:m],
            dpsi_norms=lambda m: np.full(min(m, 1), np.pi)[:m],
            l2_norm=2.0**-1.5,
            h1_norm_sq=(1.0 + 3.0 * np.pi**2) / 8.0,
        ),
        summary="rank-one triple product of sines",
    )


def _sum3d(c1: float, c2: float) -> AnalyticCase:
    """c1 * s1(x) s1(y) s1(z) + c2 * s2(x) s2(y) s2(z).

    s_k = sqrt(2) sin(k pi t) are orthonormal, so every mode has the
    singular values (c1, c2) with derivative norms (pi, 2 pi).
    """
    c1 = float(c1)
    c2 = float(c2)
    if not c1 > c2 > 0:
        raise ConfigError(f"SUM3D needs c1 > c2 > 0, got {(c1, c2)}")
    sig = np.array([c1, c2])
    dps = np.array([np.pi, 2.0 * np.pi])

    def s(k, t):
        return np.sqrt(2.0) * np.sin(k * np.pi * t)

    return AnalyticCase(
        name="SUM3D",
        dim=3,
        sampler=lambda x, y, z: c1 * s(1, x) * s(1, y) * s(1, z)
        + c2 * s(2, x) * s(2, y) * s(2, z),
        oracle=CaseOracle(
            sigmas=lambda m: sig[:m].copy(),
            dpsi_norms=lambda m: dps[:m].copy(),
            l2_norm=float(np.hypot(c1, c2)),
            h1_norm_sq=float(
                c1**2 * (1.0 + 3.0 * np.pi**2) + c2**2 * (1.0 + 12.0 * np.pi**2)
            ),
        ),
        params={"c1": c1, "c2": c2},
        summary="two orthonormal separable sine terms",
    )


def _expxy() -> AnalyticCase:
    """exp(x y) on the unit square.

    No closed spectrum; reference values come from self-refinement (see
    ``dense_reference_sigmas``). The L2 norm is closed: substituting
    t = 2 x y gives

        int int exp(2 x y) = (Ei(2) - eulergamma - log 2) / 2.
    """
    l2_sq = (float(expi(2.0)) - float(np.euler_gamma) - float(np.log(2.0))) / 2.0
    return AnalyticCase(
        name="EXPXY",
        dim=2,
        sampler=lambda x, y: np.exp(x * y),
        oracle=CaseOracle(l2_norm=float(np.sqrt(l2_sq))),
        summary="analytic kernel exp(x y), fast spectral decay",
    )


_BUILDERS = {
    "SEP1": (_sep1, ()),
    "SINSUM": (_sinsum, ("coeffs",)),
    "BROWNIAN": (_brownian, ()),
    "SEP3D": (_sep3d, ()),
    "SUM3D": (_sum3d, ("c1", "c2")),
    "EXPXY": (_expxy, ()),
}

_DEFAULTS = {
    "SINSUM": {"coeffs": (1.0, 0.5, 0.25)},
    "SUM3D": {"c1": 1.0, "c2": 0.5},
}


def get_case(name: str, **params) -> AnalyticCase:
    """Build a catalog case by name, with optional parameters.

    Unknown names raise UnknownCaseError; parameters a case does not
    take, or invalid values, raise ConfigError.
    """
    key = str(name).upper()
    if key not in _BUILDERS:
        raise UnknownCaseError(
            f"unknown case {name!r}, have {sorted(_BUILDERS)}"
        )
    builder, accepted = _BUILDERS[key]
    merged = dict(_DEFAULTS.get(key, {}))
    for p, v in params.items():
        if p not in accepted:
            raise ConfigError(f"case {key} takes no parameter {p!r}")
        merged[p] = v
    return builder(**merged)


def list_cases() -> list[tuple[str, str]]:
    """Names and one-line summaries of every catalog case."""
    out = []
    for key in sorted(_BUILDERS):
        out.append((key, get_case(key).summary))
    return out


def case_axes(case: AnalyticCase, sizes: Sequence[int]) -> tuple[Axis, ...]:
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) == 1:
        sizes = sizes * case.dim
    if len(sizes) != case.dim:
        raise ConfigError(
            f"case {case.name} has {case.dim} axes, got sizes {sizes}"
        )
    return tuple(make_axis(n, 0.0, 1.0) for n in sizes)


def sample_case(case: AnalyticCase, sizes: Sequence[int]) -> GridFunction:
    """Sample a case on the unit cube with the given per-axis sizes."""
    return sample(case.sampler, case_axes(case, sizes))


def geometric_coeffs(m: int, ratio: float = 0.5) -> tuple[float, ...]:
    """Coefficients 1, ratio, ratio^2, ... for SINSUM-style spectra."""
    if m < 1:
        raise ConfigError(f"need m >= 1, got {m}")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"need 0 < ratio < 1, got {ratio}")
    return tuple(ratio**i for i in range(m))


def dense_reference_sigmas(case: AnalyticCase, n: int, count: int) -> np.ndarray:
    """Leading mode-0 singular values at resolution n, for self-refinement.

    For cases without a closed spectrum, values at increasing n converge
    at the second-order rate of the grid; comparing n and 2n - 1 gives a
    Richardson consistency check.
    """
    from .svd_engine import mode_svd

    u = sample_case(case, (n,) * case.dim)
    system = mode_svd(u, 0)
    return system.sigmas[:count].copy()
