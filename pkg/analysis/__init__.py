"""
Experiment harnesses: finite-difference oracles, convergence of the
smoothed gradients, subgradient witnesses and sampling probes.
"""

from analysis.finite_difference import fd_gradient, kink_margin, kink_distances, smooth_region_agreement
from analysis.convergence import (
    convergence_experiment, doubling_schedule, blending_limits, limits_agree
)
from analysis.subgradient import (
    activation_lipschitz, layer_lipschitz_constant, left_approach_sequence,
    sign_condition, limiting_subgradient_check
)
from analysis.probes import lipschitz_probe, probe_spread, uniform_bound_probe

__all__ = [
    'fd_gradient',
    'kink_margin',
    'kink_distances',
    'smooth_region_agreement',
    'convergence_experiment',
    'doubling_schedule',
    'blending_limits',
    'limits_agree',
    'activation_lipschitz',
    'layer_lipschitz_constant',
    'left_approach_sequence',
    'sign_condition',
    'limiting_subgradient_check',
    'lipschitz_probe',
    'probe_spread',
    'uniform_bound_probe',
]
