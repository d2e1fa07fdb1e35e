"""Uniform grids, trapezoid quadrature and second-order differentiation.

An :class:`Axis` is the discrete model of one closed interval: equispaced
nodes, positive quadrature weights and a dense differentiation matrix.
A :class:`GridFunction` binds a d-way array of point samples to d axes.

Every inner product and norm in this package is weighted by the axis
quadrature weights; the plain Euclidean dot product is never the right
thing on these grids.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AxisMismatchError, InvalidAxisError, ModeError, SamplingError
from .tensor_core import mode_product

UNIFORM_TRAPEZOID_FD2 = "uniform-trapezoid-fd2"


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Axis:
    """One discretized interval.

    Attributes
    ----------
    lower, upper : float
        Interval endpoints, ``lower < upper``.
    nodes : ndarray, shape (n,)
        Equispaced nodes including both endpoints.
    quad_weights : ndarray, shape (n,)
        Composite trapezoid weights: h/2 at the endpoints, h inside.
        They sum to the interval length.
    diff_matrix : ndarray, shape (n, n)
        Second-order finite differences: central stencils at interior
        nodes, three-point one-sided stencils at the endpoints. Exact on
        quadratics.
    scheme : str
        Discretization tag, ``"uniform-trapezoid-fd2"``.
    """

    lower: float
    upper: float
    nodes: np.ndarray
    quad_weights: np.ndarray
    diff_matrix: np.ndarray
    scheme: str = UNIFORM_TRAPEZOID_FD2

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.n - 1)

    def is_compatible(self, other: "Axis") -> bool:
        return (
            self.n == other.n
            and self.lower == other.lower
            and self.upper == other.upper
            and self.scheme == other.scheme
        )


def make_axis(n: int, lower: float = 0.0, upper: float = 1.0) -> Axis:
    """Build a uniform axis with n nodes on [lower, upper].

    Raises
    ------
    InvalidAxisError
        If ``n < 3`` or ``lower >= upper``. Three nodes are the minimum
        for the one-sided boundary stencils.
    """
    n = int(n)
    if n < 3:
        raise InvalidAxisError(f"need at least 3 nodes, got {n}")
    if not lower < upper:
        raise InvalidAxisError(f"empty interval: lower={lower!r}, upper={upper!r}")
    h = (upper - lower) / (n - 1)
    nodes = np.linspace(lower, upper, n)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0

    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx - 1] = -1.0 / (2.0 * h)
    d[idx, idx + 1] = 1.0 / (2.0 * h)
    d[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    d[-1, n - 3 : n] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)

    return Axis(float(lower), float(upper), _frozen(nodes), _frozen(w), _frozen(d))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Point samples of a function on a tensor-product grid.

    ``values[i1, ..., id]`` is the sample at ``(axes[0].nodes[i1], ...)``.
    Instances are immutable; arithmetic returns new objects.
    """

    axes: tuple[Axis, ...]
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != len(axes):
            raise AxisMismatchError(
                f"{len(axes)} axes for a {vals.ndim}-way value array"
            )
        shape = tuple(ax.n for ax in axes)
        if vals.shape != shape:
            raise AxisMismatchError(f"values shape {vals.shape} != grid shape {shape}")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise SamplingError(f"non-finite value at index {tuple(int(i) for i in bad)}")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __add__(self, other: "GridFunction") -> "GridFunction":
        require_same_axes(self, other)
        return GridFunction(self.axes, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        require_same_axes(self, other)
        return GridFunction(self.axes, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.axes, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.axes, -self.values)


def require_same_axes(f: GridFunction, g: GridFunction) -> None:
    if f.ndim != g.ndim or not all(
        a.is_compatible(b) for a, b in zip(f.axes, g.axes)
    ):
        raise AxisMismatchError("grid functions live on different axes")


def check_mode(mode: int, ndim: int) -> int:
    mode = int(mode)
    if not 0 <= mode < ndim:
        raise ModeError(f"mode {mode} out of range for {ndim} axes")
    return mode


def sample(f: Callable, axes: Sequence[Axis]) -> GridFunction:
    """Evaluate a callable on the tensor grid of the given axes.

    The callable receives one broadcast array per axis and must evaluate
    elementwise (a scalar result is broadcast, so constants are fine).
    Non-finite samples raise :class:`SamplingError` naming the first
    offending multi-index.
    """
    axes = tuple(axes)
    if not axes:
        raise InvalidAxisError("need at least one axis")
    grids = np.meshgrid(*(ax.nodes for ax in axes), indexing="ij")
    vals = np.asarray(f(*grids), dtype=float)
    shape = tuple(ax.n for ax in axes)
    if vals.shape != shape:
        vals = np.broadcast_to(vals, shape)
    return GridFunction(axes, vals)


def inner_l2(f: GridFunction, g: GridFunction) -> float:
    """Quadrature-weighted L2 inner product of two grid functions."""
    require_same_axes(f, g)
    t = f.values * g.values
    for ax in reversed(f.axes):
        t = t @ ax.quad_weights
    return float(t)


def partial_derivative(f: GridFunction, mode: int) -> GridFunction:
    """Apply the differentiation matrix of one axis along that mode."""
    mode = check_mode(mode, f.ndim)
    vals = mode_product(f.values, f.axes[mode].diff_matrix, mode)
    return GridFunction(f.axes, vals)
