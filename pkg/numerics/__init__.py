"""
Numerics for generalized gradients of nonsmooth network risks.
Activations and their approximants, networks, risks and gradients.
"""

from numerics.activation import (
    PiecewiseActivation, BlendingFunction, ApproximantFamily, ACTIVATIONS,
    BLENDING_FUNCTIONS, relu, leaky_relu, absolute, hard_tanh, softplus,
    pathological, custom_pwl, smoothstep, bump, blending_function,
    generalized_derivative, half_gap, nearest_kink_index, approximant_value,
    approximant_derivative, validate_approximant_conditions,
    pathological_derivative_probe, validate_activation
)
from numerics.network import (
    check_theta, weight_index, bias_index, weight, bias, unflatten, flatten,
    forward, forward_approx, forward_batch
)
from numerics.risk import (
    LossFunction, LOSSES, mse_loss, weighted_mse_loss, ridge_mse_loss,
    risk, risk_smoothed, loss_growth_probe
)
from numerics.gradients import (
    backprop_generalized, backprop_smoothed, realization_jacobian,
    pathsum_partial_weight, pathsum_partial_bias, pathsum_risk_gradient,
    ORACLE_PATH_LIMIT
)

__all__ = [
    'PiecewiseActivation',
    'BlendingFunction',
    'ApproximantFamily',
    'ACTIVATIONS',
    'BLENDING_FUNCTIONS',
    'relu',
    'leaky_relu',
    'absolute',
    'hard_tanh',
    'softplus',
    'pathological',
    'custom_pwl',
    'smoothstep',
    'bump',
    'blending_function',
    'generalized_derivative',
    'half_gap',
    'nearest_kink_index',
    'approximant_value',
    'approximant_derivative',
    'validate_approximant_conditions',
    'pathological_derivative_probe',
    'validate_activation',
    'check_theta',
    'weight_index',
    'bias_index',
    'weight',
    'bias',
    'unflatten',
    'flatten',
    'forward',
    'forward_approx',
    'forward_batch',
    'LossFunction',
    'LOSSES',
    'mse_loss',
    'weighted_mse_loss',
    'ridge_mse_loss',
    'risk',
    'risk_smoothed',
    'loss_growth_probe',
    'backprop_generalized',
    'backprop_smoothed',
    'realization_jacobian',
    'pathsum_partial_weight',
    'pathsum_partial_bias',
    'pathsum_risk_gradient',
    'ORACLE_PATH_LIMIT',
]
