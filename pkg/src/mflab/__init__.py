"""Numerical laboratory for magnetic flows of Finsler metrics."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .finsler import (ConnectionPack, CurvaturePack, FundamentalTensorPack, Geometry, connection, curvature,
                      eval_F, fundamental_tensor, geodesic_coefficients_christoffel)
from .identities import (QuadratureGrid, build_grid, gauss_ostrogradskii, int_nabla_checks, integral_identity_2d,
                         integral_identity_nd, menqc_functional, pestov_nd_pointwise, term_dictionary,
                         xnabla_pointwise)
from .jacobi import (IndexFormResult, JacobiFieldND, QProfile, index_form, index_positivity_scan, jacobi_2d,
                     jacobi_nd, lyapunov)
from .magnetic import ClosedOrbit, Trajectory, action, find_closed_orbit, integrate, lorentz_force
from .optical import BarycenterForm, OpticalSpec, barycenter, gauge, shifted
from .report import IdentityReport
from .semibasic import ScalarJet, SemibasicVectorField, check_commutation
from .specs import MagneticSystem, MetricSpec, Point, TangentVector
from .surface import CoframeData2D, FramePoint2D, frame, magnetic_frame_quantities, pestov_2d
