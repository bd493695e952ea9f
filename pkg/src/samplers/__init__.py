"""Exact lattice walk and Brownian bridge samplers."""

from .lattice_walk import (
    LatticeLoop,
    WalkBridge1D,
    WalkBridge2D,
    loop_count_measure,
    qtilde,
    rooted_loop_weight,
    sample_bridge_1d,
    sample_bridge_2d,
    conditioned_midpoint_pmf,
    local_clt_compare,
    stirling_approx
)
from .brownian import (
    BridgePath,
    ContinuousLoop,
    sample_bridge,
    surgery_compose,
    bridge_with_endpoints,
    loop_from_bridge,
    q_n,
    sample_duration,
    scale_brownian,
    scale_walk,
    sup_distance_rescaled
)

__all__ = [
    'LatticeLoop',
    'WalkBridge1D',
    'WalkBridge2D',
    'loop_count_measure',
    'qtilde',
    'rooted_loop_weight',
    'sample_bridge_1d',
    'sample_bridge_2d',
    'conditioned_midpoint_pmf',
    'local_clt_compare',
    'stirling_approx',
    'BridgePath',
    'ContinuousLoop',
    'sample_bridge',
    'surgery_compose',
    'bridge_with_endpoints',
    'loop_from_bridge',
    'q_n',
    'sample_duration',
    'scale_brownian',
    'scale_walk',
    'sup_distance_rescaled'
]
