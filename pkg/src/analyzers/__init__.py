"""Domain restriction, boundary estimates and statistical verification suites."""

from .domain import (
    Domain,
    slit_disk,
    restrict_soup,
    boundary_layer_measure,
    fit_layer_constant,
    fit_loglog_slope,
    beurling_mc,
    gambler_ruin_check
)
from .verification import SUITES, SuiteSettings, SuiteResult, run_suite

__all__ = [
    'Domain',
    'slit_disk',
    'restrict_soup',
    'boundary_layer_measure',
    'fit_layer_constant',
    'fit_loglog_slope',
    'beurling_mc',
    'gambler_ruin_check',
    'SUITES',
    'SuiteSettings',
    'SuiteResult',
    'run_suite'
]
