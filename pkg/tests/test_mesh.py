import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from breakfvm.mesh import MeshError, build_custom, build_geometric, build_uniform


def test_uniform_quarters():
    m = build_uniform(1.0, 4)
    np.testing.assert_array_equal(m.edges, [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_array_equal(m.midpoints, [0.125, 0.375, 0.625, 0.875])
    assert m.R == 1.0 and m.I == 4


def test_uniform_single_cell():
    m = build_uniform(1.0, 1)
    np.testing.assert_array_equal(m.edges, [0, 1])
    assert m.midpoints[0] == 0.5


def test_uniform_widths():
    m = build_uniform(10.0, 5)
    np.testing.assert_allclose(m.widths, 2.0, rtol=1e-15)
    assert m.h == pytest.approx(2.0, rel=1e-15)


@pytest.mark.parametrize("R, I", [(0.0, 3), (-1.0, 3), (1.0, 0), (float("nan"), 2)])
def test_uniform_rejects(R, I):
    with pytest.raises(MeshError):
        build_uniform(R, I)


def test_geometric_ratio3():
    m = build_geometric(1.0, 2, 3.0)
    np.testing.assert_allclose(m.widths, [0.25, 0.75], rtol=1e-15)
    np.testing.assert_allclose(m.edges, [0, 0.25, 1], rtol=1e-15)


def test_geometric_ratio2():
    m = build_geometric(1.0, 3, 2.0)
    np.testing.assert_allclose(m.widths, [1 / 7, 2 / 7, 4 / 7], rtol=1e-14)


def test_geometric_ratio1_is_uniform():
    assert build_geometric(1.0, 3, 1.0) == build_uniform(1.0, 3)
    np.testing.assert_array_equal(build_geometric(2.5, 17, 1.0).edges, build_uniform(2.5, 17).edges)


@pytest.mark.parametrize("ratio", [0.0, -2.0])
def test_geometric_rejects_ratio(ratio):
    with pytest.raises(MeshError):
        build_geometric(1.0, 4, ratio)


def test_custom():
    m = build_custom([0, 0.5, 1])
    np.testing.assert_array_equal(m.midpoints, [0.25, 0.75])


def test_custom_non_monotone():
    with pytest.raises(MeshError, match="non-monotone"):
        build_custom([0, 1, 0.5])


def test_custom_first_edge():
    with pytest.raises(MeshError, match="first edge must be 0"):
        build_custom([0.1, 0.5, 1])


def test_arrays_are_read_only():
    m = build_uniform(1.0, 3)
    with pytest.raises(ValueError):
        m.edges[1] = 0.2


def test_nesting():
    assert build_uniform(1.0, 8).is_refinement_of(build_uniform(1.0, 4))
    assert not build_uniform(1.0, 6).is_refinement_of(build_uniform(1.0, 4))


meshes = st.one_of(
    st.builds(build_uniform, st.floats(1e-3, 1e3), st.integers(1, 300)),
    st.tuples(st.floats(1e-3, 1e3), st.integers(1, 200), st.floats(0.8, 1.25))
    .filter(lambda a: abs(a[1] * np.log(a[2])) < 20.0)
    .map(lambda a: build_geometric(*a)),
)


@settings(max_examples=200, deadline=None)
@given(meshes)
def test_mesh_invariants(m):
    e = m.edges
    assert e[0] == 0.0
    assert np.all(np.diff(e) > 0)
    np.testing.assert_array_equal(m.midpoints, (e[:-1] + e[1:]) / 2)
    np.testing.assert_array_equal(m.widths, e[1:] - e[:-1])
    assert m.h == m.widths.max()
    assert m.midpoints[0] > 0 and np.all(np.diff(m.midpoints) > 0)
    # sum of widths telescopes to R up to accumulated rounding
    assert abs(m.widths.sum() - m.R) <= m.I * np.spacing(m.R)
    # midpoint rule is exact for eps: sum x_i w_i = R^2 / 2
    assert np.dot(m.midpoints, m.widths) == pytest.approx(m.R**2 / 2, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(1, 100), st.floats(0.5, 2.0))
def test_geometric_growth_and_pinned_end(R, I, ratio):
    assume(abs(I * np.log(ratio)) < 20.0)
    m = build_geometric(R, I, ratio)
    assert m.edges[-1] == R
    if I > 2 and ratio != 1.0:
        # widths come from differencing edges, so each carries ~ulp(R)/width relative error
        tol = 8 * np.spacing(R) / m.widths[:-2] + 1e-12
        assert np.all(np.abs(m.widths[1:-1] / m.widths[:-2] - ratio) <= tol * ratio)


def test_geometric_degenerate_is_reported():
    with pytest.raises(MeshError, match="degenerate"):
        build_geometric(1.0, 200, 0.7)
