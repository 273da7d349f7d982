import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from holelab.geometry import (
    Ball,
    Box,
    Difference,
    Empty,
    FeasibilityWarning,
    HoleFamily,
    HolePlacementError,
    TilingSpec,
    Union,
    capacity_scaled,
    critical_radius,
    instantiate_holes,
    lambda_minus,
    lambda_plus,
    region_from_dict,
    region_measure,
    summed_tile_volumes,
    tile_union_measure,
)

UNIT_DISK = Ball([0.0, 0.0], 1.0)
WIN = Box([-2.0, -2.0], [2.0, 2.0])


def as_set(idx):
    return sorted(tuple(int(v) for v in row) for row in idx)


# --- critical radius -----------------------------------------------------------


@pytest.mark.parametrize(
    "mu, eps, d, expected",
    [(2.0, 0.1, 3, 0.002), (1.0, 0.5, 2, math.exp(-4.0)), (0.0, 0.3, 2, 0.0)],
)
def test_critical_radius_examples(mu, eps, d, expected):
    assert critical_radius(mu, eps, d) == pytest.approx(expected, rel=1e-12, abs=0.0)


@pytest.mark.parametrize("eps", [0.0, -0.1])
def test_critical_radius_rejects_nonpositive_eps(eps):
    with pytest.raises(ValueError):
        critical_radius(1.0, eps, 2)


def test_critical_radius_warns_when_hole_exceeds_guard_ball():
    with pytest.warns(FeasibilityWarning):
        critical_radius(1.0, 0.5, 2, C=0.01)


@settings(max_examples=60, deadline=None)
@given(mu=st.floats(0.05, 20.0), eps=st.floats(0.05, 0.6), d=st.sampled_from([2, 3, 4, 5]))
def test_critical_radius_round_trip(mu, eps, d):
    a = critical_radius(mu, eps, d)
    if a == 0.0:
        return  # planar underflow
    assert capacity_scaled(a, eps, d) == pytest.approx(mu, rel=1e-12)


# --- tile families -------------------------------------------------------------


def test_lambda_minus_square_gives_sixteen(unit_tiling_2d, unit_box_2d):
    assert len(lambda_minus(unit_box_2d, unit_tiling_2d, 0.25)) == 16


def test_lambda_minus_unit_disk_eps_one_is_empty(unit_tiling_2d):
    assert len(lambda_minus(UNIT_DISK, unit_tiling_2d, 1.0, WIN)) == 0


def test_lambda_plus_unit_disk_eps_one(unit_tiling_2d):
    assert as_set(lambda_plus(UNIT_DISK, unit_tiling_2d, 1.0, WIN)) == [(-1, -1), (-1, 0), (0, -1), (0, 0)]


def test_lambda_plus_square_gives_sixteen(unit_tiling_2d, unit_box_2d):
    assert len(lambda_plus(unit_box_2d, unit_tiling_2d, 0.25)) == 16


def test_empty_region_has_no_tiles(unit_tiling_2d):
    assert len(lambda_minus(Empty(2), unit_tiling_2d, 0.25, WIN)) == 0
    assert len(lambda_plus(Empty(2), unit_tiling_2d, 0.25, WIN)) == 0


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
def test_inner_family_inside_outer(unit_tiling_2d, eps):
    inner = set(as_set(lambda_minus(UNIT_DISK, unit_tiling_2d, eps, WIN)))
    outer = set(as_set(lambda_plus(UNIT_DISK, unit_tiling_2d, eps, WIN)))
    assert inner <= outer


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_lambda_rejects_nonpositive_eps(unit_tiling_2d, eps):
    with pytest.raises(ValueError):
        lambda_minus(UNIT_DISK, unit_tiling_2d, eps, WIN)


@settings(max_examples=40, deadline=None)
@given(
    cx=st.floats(-0.7, 0.7), cy=st.floats(-0.7, 0.7), r=st.floats(0.05, 0.9),
    eps=st.sampled_from([0.5, 0.25, 0.2, 0.1, 0.07]),
)
def test_ball_tiles_match_brute_force(cx, cy, r, eps):
    ball = Ball([cx, cy], r)
    tiling = TilingSpec.unit(2)
    for inner, fn in ((True, lambda_minus), (False, lambda_plus)):
        assert as_set(fn(ball, tiling, eps, WIN)) == oracles.lambda_ball([cx, cy], r, eps, inner)


@settings(max_examples=40, deadline=None)
@given(
    lo=st.tuples(st.floats(-1.0, 0.4), st.floats(-1.0, 0.4)),
    size=st.tuples(st.floats(0.05, 1.0), st.floats(0.05, 1.0)),
    eps=st.sampled_from([0.5, 0.25, 0.125, 0.1]),
)
def test_box_tiles_match_brute_force(lo, size, eps):
    hi = [lo[0] + size[0], lo[1] + size[1]]
    box = Box(list(lo), hi)
    tiling = TilingSpec.unit(2)
    for inner, fn in ((True, lambda_minus), (False, lambda_plus)):
        assert as_set(fn(box, tiling, eps, WIN)) == oracles.lambda_box(lo, hi, eps, inner)


@settings(max_examples=25, deadline=None)
@given(
    cx=st.floats(-0.5, 0.5), cy=st.floats(-0.5, 0.5), r=st.floats(0.2, 0.9),
    eps=st.sampled_from([0.25, 0.2, 0.1]), seed=st.integers(0, 2**31),
)
def test_sandwich_by_sampling(cx, cy, r, eps, seed):
    E = Difference(Ball([cx, cy], r), Box([cx, cy], [cx + 2, cy + 2]))
    tiling = TilingSpec.unit(2)
    rng = np.random.default_rng(seed)
    inner = lambda_minus(E, tiling, eps, WIN)
    outer = {tuple(t) for t in as_set(lambda_plus(E, tiling, eps, WIN))}
    # every point of an inner tile lies in E
    if len(inner):
        pts = (inner[:, None, :] + rng.random((len(inner), 20, 2))) * eps
        assert E.contains(pts.reshape(-1, 2)).all()
    # every point of E lies in an outer tile
    pts = rng.uniform(-1.0, 1.0, size=(2000, 2))
    pts = pts[E.contains(pts)]
    tiles = np.floor(pts / eps).astype(int)
    assert all(tuple(t) in outer for t in tiles)


@pytest.mark.parametrize(
    "count, eps, expected", [(16, 0.25, 1.0), (0, 0.5, 0.0), (4, 1.0, 4.0)],
)
def test_tile_union_measure_examples(count, eps, expected):
    idx = np.arange(2 * count).reshape(count, 2)
    assert tile_union_measure(idx, TilingSpec.unit(2), eps) == expected


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05, 0.02, 0.01])
def test_tile_count_identity(unit_tiling_2d, eps):
    for fn in (lambda_minus, lambda_plus):
        idx = fn(UNIT_DISK, unit_tiling_2d, eps, WIN)
        cell = eps**2
        assert round(summed_tile_volumes(idx, unit_tiling_2d, eps) / cell) == len(idx)
        assert tile_union_measure(idx, unit_tiling_2d, eps) == len(idx) * cell


def test_disk_approximations_converge(unit_tiling_2d):
    prev = None
    for eps in [0.2, 0.1, 0.05, 0.02, 0.01]:
        lo = tile_union_measure(lambda_minus(UNIT_DISK, unit_tiling_2d, eps, WIN), unit_tiling_2d, eps)
        hi = tile_union_measure(lambda_plus(UNIT_DISK, unit_tiling_2d, eps, WIN), unit_tiling_2d, eps)
        assert lo <= math.pi <= hi
        if prev is not None:
            assert math.pi - lo < prev[0] and hi - math.pi < prev[1]
        prev = (math.pi - lo, hi - math.pi)
    assert max(prev) <= 0.02 * math.pi


# --- measures ------------------------------------------------------------------


def test_unit_cube_measure_exact():
    assert region_measure(Box([0, 0, 0], [1, 1, 1])) == 1.0


def test_disk_measure():
    assert region_measure(UNIT_DISK, 1e-6) == pytest.approx(math.pi, abs=1e-6)


def test_disk_minus_square_measure():
    E = Difference(UNIT_DISK, Box([0.0, 0.0], [1.0, 1.0]))
    assert region_measure(E, 1e-4) == pytest.approx(0.75 * math.pi, abs=1e-4)


def test_union_of_disjoint_pieces_adds():
    E = Union((Box([0, 0], [0.5, 0.5]), Ball([2.0, 2.0], 0.25)))
    assert region_measure(E, 1e-8) == pytest.approx(0.25 + math.pi / 16, abs=1e-8)


def test_region_round_trip_through_dict():
    spec = {"type": "difference", "of": [
        {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
        {"type": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}]}
    E = region_from_dict(spec)
    assert region_from_dict(E.to_dict()).to_dict() == E.to_dict()


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-1.5, 1.5), y=st.floats(-1.5, 1.5))
def test_membership_predicates_consistent(x, y):
    E = Difference(UNIT_DISK, Box([0.0, 0.0], [1.0, 1.0]))
    p = np.array([x, y])
    interior = bool(E.interior_contains(p))
    closure = bool(E.closure_contains(p))
    assert not interior or closure
    if E.boundary_distance_lb(p) > 0:
        assert interior or not closure


# --- holes ---------------------------------------------------------------------


def test_sixteen_tile_centered_holes(sixteen_hole_domain):
    dom = sixteen_hole_domain(mu=1.0)
    assert dom.n_holes == 16
    assert np.allclose(dom.radii, math.exp(-16.0), rtol=1e-14)
    expected = sorted((0.125 + 0.25 * i, 0.125 + 0.25 * j) for i in range(4) for j in range(4))
    assert sorted(map(tuple, dom.centers.tolist())) == pytest.approx(expected)
    assert dom.check_invariants() == []


def test_zero_density_places_no_holes(sixteen_hole_domain):
    dom = sixteen_hole_domain(mu=0.0)
    assert dom.n_holes == 0
    assert dom.contains(np.array([[0.125, 0.125]])).all()


def test_two_holes_per_tile(unit_tiling_2d, unit_box_2d):
    fam = HoleFamily(unit_box_2d, 2, 1.0, [[0.25, 0.5], [0.75, 0.5]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeasibilityWarning)
        dom = instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.25, 0.2)
    assert dom.n_holes == 32
    assert dom.check_invariants() == []


def test_cell_capacity_violation_rejected(unit_tiling_2d, unit_box_2d):
    fam = HoleFamily(unit_box_2d, 1, 1.0, [[0.5, 0.5]])
    with pytest.raises(HolePlacementError):
        instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.25, 0.6)


def test_overlapping_pattern_rejected(unit_tiling_2d, unit_box_2d):
    fam = HoleFamily(unit_box_2d, 2, 1.0, [[0.4, 0.5], [0.6, 0.5]])
    with pytest.raises(HolePlacementError):
        instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.25, 0.2)


def test_radius_above_guard_ball_rejected(unit_tiling_2d, unit_box_2d):
    fam = HoleFamily(unit_box_2d, 1, 50.0, [[0.5, 0.5]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeasibilityWarning)
        with pytest.raises(HolePlacementError):
            instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.5, 0.1)


def test_holes_only_in_tiles_inside_region(unit_tiling_2d, unit_box_2d):
    disk = Ball([0.5, 0.5], 0.3)
    fam = HoleFamily(disk, 1, 2.0, [[0.5, 0.5]])
    dom = instantiate_holes([fam], unit_tiling_2d, unit_box_2d, 0.1, 0.25)
    inside = {tuple(t) for t in as_set(lambda_minus(disk, unit_tiling_2d, 0.1, unit_box_2d))}
    assert {tuple(int(v) for v in t) for t in dom.tiles} == inside
    assert dom.check_invariants() == []
