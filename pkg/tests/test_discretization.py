import numpy as np
import pytest

import sobosvd as sv
from sobosvd import Axis, GridFunction
from sobosvd.errors import AxisMismatchError, InvalidAxisError, ModeError, SamplingError
from sobosvd.discretization import check_mode, require_same_axes


def test_make_axis_basic():
    ax = sv.make_axis(5)
    assert ax.n == 5
    assert ax.spacing == 0.25
    assert ax.scheme == "uniform-trapezoid-fd2"
    np.testing.assert_allclose(ax.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(ax.quad_weights, [0.125, 0.25, 0.25, 0.25, 0.125])
    assert ax.quad_weights.sum() == pytest.approx(1.0)


def test_make_axis_general_interval():
    ax = sv.make_axis(9, -2.0, 3.0)
    assert ax.quad_weights.sum() == pytest.approx(5.0)
    assert ax.nodes[0] == -2.0 and ax.nodes[-1] == 3.0


@pytest.mark.parametrize("bad", [0, 1, 2, -4])
def test_make_axis_too_few_nodes(bad):
    with pytest.raises(InvalidAxisError):
        sv.make_axis(bad)


def test_make_axis_empty_interval():
    with pytest.raises(InvalidAxisError):
        sv.make_axis(5, 1.0, 1.0)
    with pytest.raises(InvalidAxisError):
        sv.make_axis(5, 2.0, 1.0)


def test_axis_arrays_immutable():
    ax = sv.make_axis(5)
    with pytest.raises(ValueError):
        ax.nodes[0] = 7.0
    with pytest.raises(ValueError):
        ax.diff_matrix[0, 0] = 7.0


def test_diff_matrix_exact_on_quadratics():
    # central interior stencil and one-sided boundary stencils are all
    # second order, so p(x) = a + b x + c x^2 differentiates exactly
    ax = sv.make_axis(11, 0.0, 2.0)
    for a, b, c in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (2.0, -3.0, 0.5)]:
        p = a + b * ax.nodes + c * ax.nodes**2
        dp = b + 2.0 * c * ax.nodes
        np.testing.assert_allclose(ax.diff_matrix @ p, dp, atol=1e-12)


def test_diff_matrix_second_order_on_sine():
    errs = []
    for n in (33, 65, 129):
        ax = sv.make_axis(n)
        d = ax.diff_matrix @ np.sin(np.pi * ax.nodes)
        errs.append(np.max(np.abs(d - np.pi * np.cos(np.pi * ax.nodes))))
    assert errs[0] / errs[1] > 3.5
    assert errs[1] / errs[2] > 3.5


def test_quadrature_second_order():
    exact = 2.0 / np.pi
    errs = []
    for n in (33, 65):
        ax = sv.make_axis(n)
        errs.append(abs(ax.quad_weights @ np.sin(np.pi * ax.nodes) - exact))
    assert errs[0] / errs[1] > 3.5


def test_axis_compatibility():
    a = sv.make_axis(9)
    assert a.is_compatible(sv.make_axis(9))
    assert not a.is_compatible(sv.make_axis(10))
    assert not a.is_compatible(sv.make_axis(9, 0.0, 2.0))


def test_sample_and_grid_function():
    axes = (sv.make_axis(5), sv.make_axis(7))
    u = sv.sample(lambda x, y: x + 10.0 * y, axes)
    assert u.shape == (5, 7)
    assert u.ndim == 2
    assert u.values[2, 3] == pytest.approx(axes[0].nodes[2] + 10.0 * axes[1].nodes[3])


def test_sample_broadcasts_constants():
    u = sv.sample(lambda x: 4.0, (sv.make_axis(6),))
    np.testing.assert_allclose(u.values, 4.0)


def test_sample_rejects_nonfinite():
    with np.errstate(divide="ignore"), pytest.raises(SamplingError, match=r"\(0,"):
        sv.sample(lambda x, y: 1.0 / (x + y), (sv.make_axis(4), sv.make_axis(4)))


def test_grid_function_shape_mismatch():
    with pytest.raises(AxisMismatchError):
        GridFunction((sv.make_axis(5),), np.zeros((6,)))
    with pytest.raises(AxisMismatchError):
        GridFunction((sv.make_axis(5),), np.zeros((5, 5)))


def test_grid_function_values_frozen():
    u = sv.sample(lambda x: x, (sv.make_axis(5),))
    with pytest.raises(ValueError):
        u.values[0] = 3.0


def test_grid_function_arithmetic():
    axes = (sv.make_axis(5), sv.make_axis(5))
    u = sv.sample(lambda x, y: x * y, axes)
    v = sv.sample(lambda x, y: x + y, axes)
    np.testing.assert_allclose((u + v).values, u.values + v.values)
    np.testing.assert_allclose((u - v).values, u.values - v.values)
    np.testing.assert_allclose((2.5 * u).values, 2.5 * u.values)
    np.testing.assert_allclose((u * 2.5).values, 2.5 * u.values)
    np.testing.assert_allclose((-u).values, -u.values)


def test_arithmetic_requires_same_axes():
    u = sv.sample(lambda x: x, (sv.make_axis(5),))
    v = sv.sample(lambda x: x, (sv.make_axis(6),))
    with pytest.raises(AxisMismatchError):
        u + v
    with pytest.raises(AxisMismatchError):
        require_same_axes(u, v)


def test_check_mode_range():
    assert check_mode(1, 3) == 1
    with pytest.raises(ModeError):
        check_mode(3, 3)
    with pytest.raises(ModeError):
        check_mode(-1, 3)


def test_inner_l2_separable():
    # int x dx * int y^2 dy = 1/2 * 1/3, trapezoid is exact only to O(h^2)
    axes = (sv.make_axis(201), sv.make_axis(201))
    u = sv.sample(lambda x, y: x, axes)
    v = sv.sample(lambda x, y: y * y, axes)
    assert sv.inner_l2(u, v) == pytest.approx(1.0 / 6.0, abs=1e-4)


def test_inner_l2_exact_on_bilinear():
    # x*y is quadratic in each variable jointly of degree 1 per axis;
    # trapezoid integrates piecewise-linear functions of each node exactly
    axes = (sv.make_axis(5), sv.make_axis(5))
    u = sv.sample(lambda x, y: x * y, axes)
    one = sv.sample(lambda x, y: 1.0, axes)
    assert sv.inner_l2(u, one) == pytest.approx(0.25, abs=1e-14)


def test_partial_derivative_modes():
    axes = (sv.make_axis(21), sv.make_axis(21))
    u = sv.sample(lambda x, y: x * x + 3.0 * y, axes)
    dx = sv.partial_derivative(u, 0)
    dy = sv.partial_derivative(u, 1)
    xx, _ = np.meshgrid(axes[0].nodes, axes[1].nodes, indexing="ij")
    np.testing.assert_allclose(dx.values, 2.0 * xx, atol=1e-11)
    np.testing.assert_allclose(dy.values, 3.0, atol=1e-11)
    with pytest.raises(ModeError):
        sv.partial_derivative(u, 2)
