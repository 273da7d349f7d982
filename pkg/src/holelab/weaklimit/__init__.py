"""Numerical checks of the weak limits: indicators, corrector deficit and pairings."""

from .pairing import (
    HoleSum,
    PairingQuadratureError,
    hole_avoiding_bumps,
    indicator_limit,
    indicator_pairing,
    indicator_pairing_mc,
    integrate_test_function,
    pairing_direct,
    pairing_inner_flux,
    pairing_lawep,
    pairing_limit,
    sphere_rule,
    w_deficit_l2,
)
from .testfunctions import Bump, CubeIndicator, PolyBump, support_inside, test_function_from_dict
