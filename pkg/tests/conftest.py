"""Shared fixtures. SVDs of the catalog grids are cached per session."""

from __future__ import annotations

import numpy as np
import pytest

import sobosvd as sv

_GRIDS = {
    "SEP1": (65, 65),
    "SINSUM": (129, 129),
    "BROWNIAN": (129, 129),
    "EXPXY": (129, 129),
    "SEP3D": (33, 33, 33),
    "SUM3D": (33, 33, 33),
}


@pytest.fixture(scope="session")
def catalog():
    """name -> (grid function, per-mode systems, per-mode derivative data)."""
    out = {}
    for name, shape in _GRIDS.items():
        u = sv.sample_case(sv.get_case(name), shape)
        systems = tuple(sv.mode_svd(u, j) for j in range(u.values.ndim))
        derivs = tuple(sv.derivative_data(u, systems[j], j) for j in range(u.values.ndim))
        out[name] = (u, systems, derivs)
    return out


@pytest.fixture(scope="session")
def expxy_fine():
    """EXPXY on the acceptance grid; the expensive decomposition, built once."""
    u = sv.sample_case(sv.get_case("EXPXY"), (257, 257))
    systems = tuple(sv.mode_svd(u, j) for j in range(2))
    derivs = tuple(sv.derivative_data(u, systems[j], j) for j in range(2))
    return u, systems, derivs


def weighted_norm(weights, vec):
    return float(np.sqrt(np.sum(weights * np.asarray(vec) ** 2)))
