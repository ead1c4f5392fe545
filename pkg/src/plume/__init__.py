"""Identification of airborne contaminant sources from sparse sensor data.

Finite-element advection-diffusion transport with an exact discrete adjoint,
sparse (measure-valued) source identification by a primal-dual active point
method, and a quadratic-regularization baseline.
"""
from .kernels import BACKEND
from .mesh import TriMesh, build_rect_mesh, locate_point, locate_points
from .sources import RBF, Dirac, Elliptic, SparseMeasure
from .transport import SensorPlan, TransportConfig, TransportOperator

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Dirac", "Elliptic", "RBF", "SensorPlan", "SparseMeasure", "TransportConfig",
    "TransportOperator", "TriMesh", "build_rect_mesh", "locate_point", "locate_points",
]
