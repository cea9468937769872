"""Boundary-element direct solver and single-measurement inverse pipeline for
time-harmonic electromagnetic scattering from planar perfectly conducting
screens."""

from .bem import (DensityVector, RhsVector, SystemMatrix, assemble_rhs,
                  assemble_system, read_dump, solve_density, write_matrix_dump,
                  write_vector_dump)
from .em_core import (MediumParams, PlaneWaveSpec, grad_phi, helmholtz_phi,
                      parity_decompose, plane_wave_fields)
from .errors import (ConditioningError, DegenerateDataError, FileFormatError,
                     InvalidArgumentError, MeshError, SingularEvaluationError)
from .fields import (DirectionGrid, FarFieldData, boundary_condition_residual,
                     far_field, load_farfield, magnetic_jump_residual,
                     radiation_vector, save_farfield, scattered_fields,
                     silver_muller_residual)
from .geometry import (EdgeBasisSet, PlaneFrame, QuadratureRule, ScreenMesh,
                       make_disk_screen, make_rectangle_screen, quadrature_rule,
                       read_mesh, write_mesh)
from .inverse import (FourierSamples, ImagingGrid, PlaneEstimate,
                      PlaneSearchSpec, SupportImage, extract_fourier_data,
                      fit_hyperplane, full_support_check, load_plane_estimate,
                      load_support_image, plane_fit_objective,
                      reconstruct_support, save_plane_estimate,
                      save_support_image)

__version__ = "0.1.0"
