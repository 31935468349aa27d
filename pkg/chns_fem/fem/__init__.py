"""
Lagrange finite elements: quadrature, reference elements, spaces and assembly of the CHNS forms.
"""
from chns_fem.fem.assembly import (
    assemble_chi_residual_and_jacobian,
    assemble_divergence,
    assemble_gradient_load,
    assemble_load,
    assemble_mass,
    assemble_nonlinear_residual_and_jacobian,
    assemble_phase_convection,
    assemble_skew_convection,
    assemble_stiffness,
    integrate,
)
from chns_fem.fem.nonlinear import Splitting, chi, chi_derivative
from chns_fem.fem.quadrature import DEFAULT_QUADRATURE, Quadrature
from chns_fem.fem.spaces import (
    FieldVector,
    FunctionSpace,
    SpaceKind,
    p1_mean_zero_space,
    p1_space,
    p2_vector_space,
)


__all__ = [
    'DEFAULT_QUADRATURE',
    'FieldVector',
    'FunctionSpace',
    'Quadrature',
    'SpaceKind',
    'Splitting',
    'assemble_chi_residual_and_jacobian',
    'assemble_divergence',
    'assemble_gradient_load',
    'assemble_load',
    'assemble_mass',
    'assemble_nonlinear_residual_and_jacobian',
    'assemble_phase_convection',
    'assemble_skew_convection',
    'assemble_stiffness',
    'chi',
    'chi_derivative',
    'integrate',
    'p1_mean_zero_space',
    'p1_space',
    'p2_vector_space',
]
