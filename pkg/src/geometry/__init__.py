"""
Rigid-body geometry for the spherical robot simulator
"""

from .transforms import (
    Frame,
    RigidTransform,
    compose,
    exp_so3,
    hat,
    inverse,
    log_so3,
    orthonormality_error,
    renormalize,
    right_jacobian,
    right_jacobian_inv,
    rot_x,
    rot_y,
    rot_z,
    vee,
)

__all__ = [
    'Frame', 'RigidTransform', 'compose', 'exp_so3', 'hat', 'inverse', 'log_so3',
    'orthonormality_error', 'renormalize', 'right_jacobian', 'right_jacobian_inv',
    'rot_x', 'rot_y', 'rot_z', 'vee',
]
