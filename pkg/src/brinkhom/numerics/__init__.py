from .grid import ScalarField, StaggeredGrid, VectorField, face_shape
from .operators import (CellFaceTransfer, CellPoissonOp, ComponentLaplacianOp,
                        SparseOperator, ViscousOp, assemble_poisson_csr,
                        cell_avg, component_laplacian_coeffs, divergence,
                        edge_mu, face_avg, face_harmonic, gradient_integrated,
                        gradient_pointwise, heat_coefficients, heat_operator,
                        pressure_operator)
from .solvers import (IndefiniteOperatorError, SolverError, StokesResult, pcg,
                      project_div_free, solve_spd, stokes_solve, tdot)
from .transforms import FastDiagPoisson, VelocityPrecond
