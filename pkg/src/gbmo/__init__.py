"""Generalized BMO-type seminorms of vector fields: functionals, limit integrands,
epsilon sweeps and membership verdicts."""

__version__ = "0.1.0"

from .errors import (DomainError, GBMOError, NumericError, ParameterError, ShapeError,
                     SolverError, StructureError, UnsupportedTessellationError)
from .geometry import (Box, Cell, PackingFamily, ReferenceCell, RotationGroup, check_disjoint,
                       make_cell, packing_candidates, rotation_2d, tessellation_family)
from .field import (CATALOG, Field, QuadratureRule, cell_mean, gradient_fd, mollify,
                    symmetric_gradient)
from .functionals import (VARIANTS, AxiomReport, CoreFunctional, SolverConfig, alpha_eval,
                          check_core_axioms, solve_matrix_inf)
from .psi import (PsiEvaluator, SubspaceReport, estimate_null_space, gamma_np, limit_integral,
                  norm_integral, psi_closed_form, psi_generic, psi_iso_eigen,
                  psi_property_check, scalar_psi)
from .seminorm import (ChainReport, PackingConfig, SweepResult, dyadic, mollified_chain_check,
                       seminorm_at, sweep)
from .characterize import (RigidFit, Verdict, constancy_check, divergence_exponent,
                           membership_indicator, verdict_from_sweep)
from . import field as fields
from .kernels import BACKEND

__all__ = [name for name in dir() if not name.startswith("_")]
