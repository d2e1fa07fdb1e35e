"""Discrete Sobolev norms and derivative transfer onto singular vectors.

Norms
-----
With D_j the axis differentiation matrices and all inner products
quadrature-weighted:

* ``norm_l2``:    plain weighted L2 norm.
* ``norm_ek``:    one-direction Sobolev norm, sqrt(|v|^2 + |D_k v|^2).
* ``norm_h1``:    sqrt(|v|^2 + sum_j |D_j v|^2).
* ``norm_mix``:   every derivative subset once, sqrt(sum_S |D_S v|^2).

Derivative transfer
-------------------
For a mode SVD of u with triple (sigma_k, psi_k, phi_k), the singular
vectors inherit the smoothness of u: applying the derivative of u through
the decomposition reproduces the derivative of psi_k,

    gamma_k = (1/lambda_k) M(d_j u) W_c M(u)^T W_r psi_k,
    lambda_k = sigma_k^2,

and gamma_k equals D_j psi_k exactly in the discrete algebra. Its norm is
bounded by (1/lambda_k) |u| |d_j u|, the discrete Cauchy-Schwarz chain.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .discretization import GridFunction, check_mode, inner_l2, partial_derivative
from .errors import DegenerateModeError, ModeError, SobosvdError
from .svd_engine import RETAIN_REL, SingularSystem
from .tensor_core import matricize

# mixed norm enumerates 2^d derivative subsets
MIX_MAX_DIM = 4


def norm_l2(f: GridFunction) -> float:
    """Quadrature-weighted L2 norm."""
    return float(np.sqrt(max(inner_l2(f, f), 0.0)))


def norm_ek(f: GridFunction, mode: int) -> float:
    """Sobolev norm in one direction: L2 of the value and of d/dx_mode."""
    mode = check_mode(mode, f.ndim)
    df = partial_derivative(f, mode)
    return float(np.sqrt(max(inner_l2(f, f) + inner_l2(df, df), 0.0)))


def norm_h1(f: GridFunction) -> float:
    """First-order Sobolev norm: value plus every first derivative."""
    acc = inner_l2(f, f)
    for j in range(f.ndim):
        df = partial_derivative(f, j)
        acc += inner_l2(df, df)
    return float(np.sqrt(max(acc, 0.0)))


def norm_mix(f: GridFunction) -> float:
    """Mixed Sobolev norm over all derivative subsets.

    Cost doubles per dimension, so refuse beyond four axes.
    """
    if f.ndim > MIX_MAX_DIM:
        raise ModeError(f"mixed norm capped at {MIX_MAX_DIM} axes, got {f.ndim}")
    acc = 0.0
    for size in range(f.ndim + 1):
        for subset in combinations(range(f.ndim), size):
            g = f
            for j in subset:
                g = partial_derivative(g, j)
            acc += inner_l2(g, g)
    return float(np.sqrt(max(acc, 0.0)))


@dataclass(frozen=True, eq=False)
class DerivativeData:
    """Derivative transfer data for the retained part of one mode system.

    Column k of ``gammas`` is the transferred derivative of left vector
    ``indices[k]``; ``dpsi_norms`` its weighted L2 norm on the axis and
    ``bound_values`` the Cauchy-Schwarz bound (1/lambda_k) |u| |d_j u|.
    Only directions with lambda_k above RETAIN_REL times lambda_1 are
    kept.
    """

    mode: int
    indices: np.ndarray
    gammas: np.ndarray
    dpsi_norms: np.ndarray
    bound_values: np.ndarray

    @property
    def count(self) -> int:
        return int(self.indices.size)


def retained_count(system: SingularSystem, retain_rel: float = RETAIN_REL) -> int:
    """Number of leading directions with lambda_k > retain_rel * lambda_1."""
    s = system.sigmas
    if s.size == 0 or s[0] <= 0.0:
        return 0
    lam = s * s
    return int(np.count_nonzero(lam > retain_rel * lam[0]))


def singular_derivative_operator(
    u: GridFunction, system: SingularSystem, mode: int, k: int
) -> np.ndarray:
    """Transfer the mode derivative of u onto one left singular vector.

    Evaluates (1/lambda_k) M(d_mode u) W_c M(u)^T W_r psi_k. The inner
    factor M(u)^T W_r psi_k equals sigma_k phi_k for an exact singular
    triple, so the product is computed as (1/sigma_k) M(d_mode u) W_c
    phi_k; the literal quadruple product amplifies rounding by 1/lambda_k
    and is useless for small sigma_k.

    Raises DegenerateModeError when sigma_k is zero.
    """
    mode = check_mode(mode, u.ndim)
    if system.mode != mode:
        raise ModeError(f"system decomposes mode {system.mode}, not {mode}")
    k = int(k)
    if not 0 <= k < system.k_max:
        raise ModeError(f"direction {k} out of range, system has {system.k_max}")
    sigma = float(system.sigmas[k])
    if sigma <= 0.0:
        raise DegenerateModeError(f"zero singular value at direction {k}")
    du = partial_derivative(u, mode)
    md, _ = matricize(du.values, (mode,))
    return (md @ (system.col_weights * system.right_vectors[:, k])) / sigma


def derivative_data(
    u: GridFunction,
    system: SingularSystem,
    mode: int,
    retain_rel: float = RETAIN_REL,
) -> DerivativeData:
    """Derivative transfer for every retained direction of one mode.

    Asserts the Cauchy-Schwarz bound on each transferred norm; the chain
    is exact in the discrete algebra, so a violation beyond 1e-10 means a
    broken decomposition and raises.
    """
    mode = check_mode(mode, u.ndim)
    if system.mode != mode:
        raise ModeError(f"system decomposes mode {system.mode}, not {mode}")
    m = retained_count(system, retain_rel)
    w = u.axes[mode].quad_weights

    du = partial_derivative(u, mode)
    md, _ = matricize(du.values, (mode,))
    gammas = (
        md @ (system.col_weights[:, None] * system.right_vectors[:, :m])
    ) / system.sigmas[:m][None, :]

    dpsi = np.sqrt(np.maximum(np.einsum("ik,i,ik->k", gammas, w, gammas), 0.0))
    u_norm = norm_l2(u)
    du_norm = float(np.sqrt(max(inner_l2(du, du), 0.0)))
    lam = system.sigmas[:m] ** 2
    bounds = u_norm * du_norm / lam

    slack = 1e-10
    if m and np.any(dpsi > bounds + slack):
        worst = int(np.argmax(dpsi - bounds))
        raise SobosvdError(
            f"transfer bound violated at direction {worst}: "
            f"{dpsi[worst]:.6e} > {bounds[worst]:.6e}"
        )
    return DerivativeData(
        mode=mode,
        indices=np.arange(m),
        gammas=gammas,
        dpsi_norms=dpsi,
        bound_values=bounds,
    )
