import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnstrip.geometry import (
    BC,
    DofMap,
    Field,
    Grid2D,
    StripConfig,
    Theta,
    Wall,
    build_dof_map,
    classify_wall_node,
    weight_K,
    weighted_l2,
)


def test_theta_parse():
    assert Theta.parse("0") is Theta.UNTWISTED
    assert Theta.parse("pi") is Theta.TWISTED
    assert Theta.parse(Theta.TWISTED) is Theta.TWISTED
    with pytest.raises(ValueError):
        Theta.parse("half")


def test_strip_config_validation():
    with pytest.raises(ValueError):
        StripConfig(a=0.0)
    assert StripConfig(a=2.0, theta="pi").theta is Theta.TWISTED


@pytest.mark.parametrize(
    "x1, wall, theta, expected",
    [
        (-1.0, Wall.BOTTOM, Theta.UNTWISTED, BC.DIRICHLET),
        (1.0, Wall.TOP, Theta.UNTWISTED, BC.NEUMANN),
        (-1.0, Wall.BOTTOM, Theta.TWISTED, BC.DIRICHLET),
        (1.0, Wall.BOTTOM, Theta.TWISTED, BC.NEUMANN),
        (-1.0, Wall.TOP, Theta.TWISTED, BC.NEUMANN),
        (1.0, Wall.TOP, Theta.TWISTED, BC.DIRICHLET),
        # both switching points are Dirichlet
        (0.0, Wall.BOTTOM, Theta.TWISTED, BC.DIRICHLET),
        (0.0, Wall.TOP, Theta.TWISTED, BC.DIRICHLET),
    ],
)
def test_classify_wall_node(x1, wall, theta, expected):
    assert classify_wall_node(x1, wall, theta) is expected


@given(st.floats(-1e3, 1e3, allow_nan=False).filter(lambda x: x != 0))
def test_twisted_walls_are_complementary(x1):
    bcs = {classify_wall_node(x1, w, Theta.TWISTED) for w in Wall}
    assert bcs == {BC.DIRICHLET, BC.NEUMANN}


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(extent=1.0, n1=3, n2=4)
    with pytest.raises(ValueError):
        Grid2D(extent=-1.0, n1=4, n2=4)
    g = Grid2D(extent=2.0, n1=4, n2=2)
    assert g.h1 == 1.0 and g.h2 == 1.0
    assert g.x1[2] == 0.0
    assert g.shape == (5, 3)


def test_small_dof_counts():
    # n1 = 4, n2 = 2: three interior columns of three nodes each
    g = Grid2D(extent=2.0, n1=4, n2=2)
    # untwisted: bottom row removed, top row kept -> 3 x 2
    assert build_dof_map(StripConfig(theta="0"), g).size == 6
    # twisted: column x1=-1 keeps top (N), x1=0 loses both walls, x1=1 keeps bottom
    assert build_dof_map(StripConfig(theta="pi"), g).size == 5


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 12), st.sampled_from(["0", "pi"]))
def test_dof_count_formula(half_n1, n2, theta):
    n1 = 2 * half_n1
    g = Grid2D(extent=3.0, n1=n1, n2=n2)
    dm = build_dof_map(StripConfig(theta=theta), g)
    interior = (n1 - 1) * (n2 - 1)
    if theta == "0":
        neumann_nodes = n1 - 1
    else:
        neumann_nodes = 2 * (half_n1 - 1)
    assert dm.size == interior + neumann_nodes
    assert np.all(dm.mass > 0)


def test_mass_halved_on_neumann_wall():
    g = Grid2D(extent=2.0, n1=4, n2=4)
    dm = build_dof_map(StripConfig(theta="0"), g)
    lat = dm.to_lattice(dm.mass)
    assert lat[2, 4] == pytest.approx(0.5 * g.h1 * g.h2)
    assert lat[2, 2] == pytest.approx(g.h1 * g.h2)
    assert lat[2, 0] == 0.0


def test_dof_map_rejects_mismatched_width():
    with pytest.raises(ValueError):
        build_dof_map(StripConfig(a=2.0), Grid2D(extent=1.0, n1=4, n2=4, a=1.0))


def test_from_lattice_strict():
    g = Grid2D(extent=2.0, n1=4, n2=4)
    dm = build_dof_map(StripConfig(theta="pi"), g)
    bad = np.ones(g.shape)
    with pytest.raises(ValueError):
        dm.from_lattice(bad)
    assert dm.from_lattice(bad, strict=False).shape == (dm.size,)
    v = np.arange(dm.size, dtype=float)
    np.testing.assert_array_equal(dm.from_lattice(dm.to_lattice(v)), v)


def test_column_ordering_is_lexicographic():
    g = Grid2D(extent=2.0, n1=4, n2=4)
    dm = build_dof_map(StripConfig(theta="0"), g)
    cols = [dm.column(i) for i in range(1, 4)]
    flat = np.concatenate(cols)
    np.testing.assert_array_equal(flat, np.arange(dm.size))


def test_field_validation():
    dm = build_dof_map(StripConfig(), Grid2D(extent=2.0, n1=4, n2=4))
    with pytest.raises(ValueError):
        Field(np.zeros(dm.size + 1), dm)
    with pytest.raises(ValueError):
        Field(np.full(dm.size, np.nan), dm)


def test_weight_and_weighted_norm():
    assert weight_K(0.0) == 1.0
    assert weight_K(2.0) == pytest.approx(np.e)
    g = Grid2D(extent=100.0, n1=200, n2=4)
    dm = build_dof_map(StripConfig(), g)
    # K(-60) = e^900 overflows on its own; the product with u^2 does not
    i = int(np.argmin(np.abs(g.x1 + 60.0)))
    v = np.zeros(dm.size)
    v[dm.column(i)] = 1e-300
    expected = np.sqrt(dm.mass[dm.column(i)].sum() * np.exp(2 * np.log(1e-300) + 900.0))
    assert weighted_l2(v, dm) == pytest.approx(expected, rel=1e-12)


def test_weighted_norm_on_center_column_equals_plain_norm():
    dm = build_dof_map(StripConfig(), Grid2D(extent=4.0, n1=8, n2=4))
    u = np.zeros(dm.size)
    u[dm.column(4)] = 1.0
    f = Field(u, dm)
    assert f.weighted_norm() == pytest.approx(f.norm(), rel=1e-15)


def test_weighted_norm_of_bump_at_two():
    # K(2) = e, so the weighted norm is e^{1/2} times the plain norm
    g = Grid2D(extent=4.0, n1=8, n2=4)
    dm = build_dof_map(StripConfig(), g)
    u = np.zeros(dm.size)
    u[dm.column(int(np.argmin(np.abs(g.x1 - 2.0))))] = 1.0
    f = Field(u, dm)
    assert f.weighted_norm() == pytest.approx(np.exp(0.5) * f.norm(), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weighted_norm_dominates(seed):
    dm = build_dof_map(StripConfig(theta="pi"), Grid2D(extent=5.0, n1=20, n2=6))
    f = Field(np.random.default_rng(seed).standard_normal(dm.size), dm)
    assert f.norm() <= f.weighted_norm()


def test_dofmap_sample_matches_coordinates():
    g = Grid2D(extent=2.0, n1=4, n2=4)
    dm = build_dof_map(StripConfig(), g)
    np.testing.assert_allclose(dm.sample(lambda x1, x2: x1 + 10 * x2), dm.x1 + 10 * dm.x2)
    assert isinstance(dm, DofMap)
