"""Stability of few-body Coulomb systems near two-cluster thresholds."""
from ._backend import BACKEND
from .kinematics import InvalidInput, MassCharge, build_frame

__version__ = "0.1.0"
__all__ = ["BACKEND", "InvalidInput", "MassCharge", "build_frame"]
