import math
import warnings

import numpy as np
import pytest

import oracles
from conftest import CONFIGS, single_hole_domain
from holelab.corrector import PotentialV, w_eval
from holelab.geometry import Ball, Box, FeasibilityWarning, HoleFamily, TilingSpec, instantiate_holes
from holelab.harness import load_config
from holelab.harness.studies import _domain
from holelab.weaklimit import (
    Bump,
    PolyBump,
    hole_avoiding_bumps,
    indicator_limit,
    indicator_pairing,
    indicator_pairing_mc,
    integrate_test_function,
    pairing_direct,
    pairing_inner_flux,
    pairing_lawep,
    pairing_limit,
    support_inside,
    test_function_from_dict,
    w_deficit_l2,
)

# frozen from tests/oracles.py (radial reductions in 30-digit arithmetic);
# one hole at (0.375, ...) with guard radius 0.1, bump centered on it:
# (d, mu, bump radius) -> (direct, lawep, inner flux)
RADIAL = {
    (3, 0.64, 0.24): (-0.009643709963302153, 0.04163269607943788, 0.051276406042740033),
    (3, 0.64, 0.08): (-0.050556768809080544, 0.0, 0.050556768809080544),
    (2, 2.5, 0.24): (-0.10686557136211252, 0.45723251515763128, 0.56409808651974381),
    (2, 2.5, 0.08): (-0.56388172617735872, 0.0, 0.56388172617735872),
}
DEFICIT = {(3, 0.64): 0.0064720863751856645, (2, 2.5): 0.030549075364563611}
BUMP_INTEGRAL = {3: 0.0060976127777117786, 2: 0.02687111384707181}  # radius 0.24


@pytest.fixture(scope="module")
def lattice_domains():
    cfg = load_config(CONFIGS / "lattice_3d.json")
    return cfg, {eps: _domain(cfg, eps) for eps in (0.2, 0.1)}


# --- radial oracles -----------------------------------------------------------


@pytest.mark.parametrize("key", sorted(RADIAL))
def test_single_hole_pairings_match_radial_oracle(key):
    d, mu, rho = key
    dom = single_hole_domain(d, mu)
    phi = Bump(dom.centers[0], rho)
    direct, lawep, inner = RADIAL[key]
    scale = abs(direct) + abs(inner)
    assert pairing_direct(dom, phi).value == pytest.approx(direct, rel=1e-8, abs=1e-10 * scale)
    assert pairing_lawep(dom, phi).value == pytest.approx(lawep, rel=1e-8, abs=1e-10 * scale)
    assert pairing_inner_flux(dom, phi) == pytest.approx(inner, rel=1e-10)


@pytest.mark.parametrize("key", sorted(RADIAL))
def test_frozen_radial_values_agree_with_oracle(key):
    d, mu, rho = key
    a = single_hole_domain(d, mu).radii[0]
    ref = oracles.radial_pairings(a, 0.1, rho, d)
    for frozen, exact in zip(RADIAL[key], ref):
        assert frozen == pytest.approx(float(exact), rel=1e-14, abs=1e-18)


@pytest.mark.parametrize("d, mu", sorted(DEFICIT))
def test_single_hole_deficit(d, mu):
    dom = single_hole_domain(d, mu)
    assert w_deficit_l2(dom) == pytest.approx(DEFICIT[(d, mu)], rel=1e-10)


def test_single_hole_deficit_against_monte_carlo():
    dom = single_hole_domain(3, 0.64)
    mc = oracles.deficit_monte_carlo(0.01, 0.1, 3, 1_000_000, seed=5)
    assert w_deficit_l2(dom) == pytest.approx(mc, rel=0.01)


def test_deficit_without_holes_is_zero(sixteen_hole_domain):
    assert w_deficit_l2(sixteen_hole_domain(mu=0.0)) == 0.0


def test_deficit_decreases_along_eps(lattice_domains):
    cfg, _ = lattice_domains
    values = [w_deficit_l2(_domain(cfg, eps)) for eps in cfg.eps]
    assert all(b < a for a, b in zip(values, values[1:]))


# --- identities on a lattice battery -------------------------------------------


@pytest.mark.parametrize("eps", [0.2, 0.1])
@pytest.mark.parametrize("name", ["central", "tilted", "straddling"])
def test_identity_with_corrector_weight(lattice_domains, eps, name):
    cfg, doms = lattice_domains
    phi = next(t for t in cfg.test_functions if t.name == name)
    direct = pairing_direct(doms[eps], phi, with_corrector=True).value
    lawep = pairing_lawep(doms[eps], phi, with_corrector=True).value
    assert abs(direct - lawep) <= 1e-6 * max(1.0, abs(direct))


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_inner_flux_closes_identity(lattice_domains, eps):
    cfg, doms = lattice_domains
    phi = cfg.test_functions[0]
    direct = pairing_direct(doms[eps], phi).value
    lawep = pairing_lawep(doms[eps], phi).value
    inner = pairing_inner_flux(doms[eps], phi)
    assert direct + inner == pytest.approx(lawep, rel=1e-9)


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_avoiding_bumps(lattice_domains, eps):
    _, doms = lattice_domains
    dom = doms[eps]
    bumps = hole_avoiding_bumps(dom)
    assert len(bumps) == 2
    assert not np.allclose(bumps[0].center, bumps[1].center)
    for phi in bumps:
        dist = np.linalg.norm(dom.centers - phi.center, axis=1)
        assert np.all(dist > dom.radii + phi.radius)
        assert np.any(dist < dom.guard_radius + phi.radius)
        assert support_inside(phi, dom.omega)
        assert pairing_inner_flux(dom, phi) == 0.0
        direct = pairing_direct(dom, phi).value
        assert direct != 0.0
        assert pairing_lawep(dom, phi).value == pytest.approx(direct, rel=1e-6)


def test_pairing_is_linear_in_the_test_function(lattice_domains):
    _, doms = lattice_domains
    dom = doms[0.2]
    c, rho, g = [0.45, 0.5, 0.55], 0.25, (0.5, -0.3, 0.2)
    both = pairing_direct(dom, PolyBump(c, rho, c0=2.0, slope=g)).value
    parts = pairing_direct(dom, PolyBump(c, rho, c0=1.0, slope=g)).value + pairing_direct(dom, Bump(c, rho)).value
    assert both == pytest.approx(parts, rel=1e-10)


def test_zero_test_function_pairs_to_zero(lattice_domains):
    _, doms = lattice_domains
    zero = PolyBump([0.5, 0.5, 0.5], 0.3, c0=0.0)
    assert pairing_direct(doms[0.2], zero).value == 0.0
    assert pairing_lawep(doms[0.2], zero).value == 0.0


# --- limit pairing ------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3])
def test_constant_potential_limit(d):
    F = Box([0.0] * d, [1.0] * d)
    phi = Bump([0.375] * d, 0.24)
    V = PotentialV((F,), (3.0,), d)
    assert pairing_limit(V, phi) == pytest.approx(3.0 * BUMP_INTEGRAL[d], rel=1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_frozen_bump_integrals(d):
    assert BUMP_INTEGRAL[d] == pytest.approx(float(oracles.bump_integral(0.24, d)), rel=1e-14)


def test_zero_potential_limit():
    V = PotentialV((Box([0, 0], [1, 1]),), (0.0,), 2)
    assert pairing_limit(V, Bump([0.5, 0.5], 0.2)) == 0.0


def test_limit_additive_over_families():
    left, right = Box([0.0, 0.0], [0.5, 1.0]), Ball([0.75, 0.5], 0.2)
    phi = PolyBump([0.6, 0.5], 0.3, c0=1.0, slope=(0.4, 0.1))
    both = pairing_limit(PotentialV((left, right), (2.0, 5.0), 2), phi)
    split = pairing_limit(PotentialV((left,), (2.0,), 2), phi) + pairing_limit(PotentialV((right,), (5.0,), 2), phi)
    assert both == pytest.approx(split, rel=1e-10)


def test_ball_region_integral_against_cells():
    from holelab.geometry import integrate_over_region

    F = Ball([0.5, 0.5, 0.5], 0.4)
    phi = Bump([0.5, 0.5, 0.72], 0.2)
    ref, _ = integrate_over_region(phi.value, F, 1e-6, window=phi.support_box())
    assert integrate_test_function(phi, F) == pytest.approx(ref, abs=2e-6)


# --- indicators ---------------------------------------------------------------


@pytest.fixture
def square_family():
    return HoleFamily(Box([0.0, 0.0], [1.0, 1.0]), 1, 10.0, [[0.5, 0.5]])


@pytest.mark.parametrize("eps", [1 / 8, 1 / 16, 1 / 32])
def test_aligned_cube_indicator_is_exact(square_family, eps):
    unit = Box([0.0, 0.0], [1.0, 1.0])
    dom = instantiate_holes([square_family], TilingSpec.unit(2), unit, eps, 0.25)
    cube = Box([0.25, 0.25], [0.75, 0.75])
    assert indicator_pairing(dom, 0, cube) == pytest.approx(math.pi / 64, rel=1e-13)
    assert indicator_limit(dom, 0, cube) == pytest.approx(math.pi / 64, rel=1e-12)


def test_indicator_away_from_family_is_zero():
    fam = HoleFamily(Box([0.0, 0.0], [0.4, 1.0]), 1, 10.0, [[0.5, 0.5]])
    unit = Box([0.0, 0.0], [1.0, 1.0])
    dom = instantiate_holes([fam], TilingSpec.unit(2), unit, 0.05, 0.25)
    cube = Box([0.6, 0.2], [0.9, 0.5])
    assert indicator_pairing(dom, 0, cube) == 0.0
    assert indicator_limit(dom, 0, cube) == 0.0


def test_two_holes_per_tile_double_the_limit():
    unit = Box([0.0, 0.0], [1.0, 1.0])
    one = HoleFamily(unit, 1, 10.0, [[0.5, 0.5]])
    two = HoleFamily(unit, 2, 10.0, [[0.25, 0.5], [0.75, 0.5]])
    cube = Box([0.13, 0.37], [0.42, 0.66])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeasibilityWarning)
        d1 = instantiate_holes([one], TilingSpec.unit(2), unit, 0.05, 0.2)
        d2 = instantiate_holes([two], TilingSpec.unit(2), unit, 0.05, 0.2)
    assert indicator_limit(d2, 0, cube) == pytest.approx(2 * indicator_limit(d1, 0, cube), rel=1e-12)


def test_indicator_against_monte_carlo():
    cfg = load_config(CONFIGS / "tiles_2d.json")
    dom = _domain(cfg, 0.1)
    case = cfg.cubes[1]
    exact = indicator_pairing(dom, case.family, case.cube)
    mc = indicator_pairing_mc(dom, case.family, case.cube, 200_000, seed=3)
    assert mc == pytest.approx(exact, rel=0.05)


# --- (H.2) --------------------------------------------------------------------


def test_corrector_vanishes_inside_holes(lattice_domains, rng):
    _, doms = lattice_domains
    dom = doms[0.1]
    pick = rng.choice(dom.n_holes, size=10, replace=False)
    u = rng.normal(size=(10, 100, 3))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    r = dom.radii[pick, None, None] * 0.999 * rng.random((10, 100, 1)) ** (1 / 3)
    pts = dom.centers[pick, None, :] + r * u
    assert np.all(w_eval(pts.reshape(-1, 3), dom) == 0.0)


# --- test functions -----------------------------------------------------------


def test_bump_gradient_matches_differences(rng):
    phi = PolyBump([0.5, 0.5], 0.3, c0=1.0, slope=(0.5, -0.2))
    x = 0.5 + 0.2 * (rng.random((30, 2)) - 0.5)
    k = 1e-7
    fd = np.stack([(phi.value(x + k * e) - phi.value(x - k * e)) / (2 * k) for e in np.eye(2)], axis=1)
    assert np.allclose(fd, phi.grad(x), rtol=1e-6, atol=1e-10)


def test_test_function_round_trip():
    spec = {"kind": "poly_bump", "name": "p", "center": [0.1, 0.2], "radius": 0.05, "c0": 0.5, "slope": [1.0, 2.0]}
    assert test_function_from_dict(spec).to_dict() == spec


def test_support_inside_omega():
    unit = Box([0.0, 0.0], [1.0, 1.0])
    assert support_inside(Bump([0.5, 0.5], 0.49), unit)
    assert not support_inside(Bump([0.5, 0.5], 0.5), unit)
