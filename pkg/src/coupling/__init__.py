"""Dyadic coupling of walk and Brownian bridges, and the coupled loop soups."""

from .kmt import (
    QuantileSpec,
    DyadicCoupling,
    CouplingSample,
    quantile_couple,
    midpoint_normal_params,
    build_coupling,
    realize_bridge,
    realize_walk,
    delta,
    couple_2d,
    cdf_sandwich_check
)
from .soup import (
    Window,
    PoissonField,
    SoupRealization,
    CouplingReport,
    build_field,
    rw_soup,
    brownian_soup,
    phi_N,
    psi_N,
    theorem1_report,
    small_loop_mass
)

__all__ = [
    'QuantileSpec',
    'DyadicCoupling',
    'CouplingSample',
    'quantile_couple',
    'midpoint_normal_params',
    'build_coupling',
    'realize_bridge',
    'realize_walk',
    'delta',
    'couple_2d',
    'cdf_sandwich_check',
    'Window',
    'PoissonField',
    'SoupRealization',
    'CouplingReport',
    'build_field',
    'rw_soup',
    'brownian_soup',
    'phi_N',
    'psi_N',
    'theorem1_report',
    'small_loop_mass'
]
