"""Discrete de Rham toolkit for curl-curl Navier-Stokes on polyhedral meshes."""

from .mesh import (Mesh, MeshError, Poly3ParseError, generate_cubic_mesh,
                   generate_tet_mesh, read_mesh, write_poly3)
from .operators import DdrComplex
from .quadrature import QuadratureRule, rule_for
from .solutions import TrigSolution
from .solver import (BCRegion, NavierStokesSolver, ProblemSpec, SolverOptions,
                     essential_bc, natural_bc, pressflux_bc)
from .spaces import (DofLayout, DofVector, SerendipityConfig, SpaceKind,
                     boundary_subspace_mask, classify_boundary,
                     load_dofvector, save_dofvector)

__all__ = [
    "Mesh", "MeshError", "Poly3ParseError", "generate_cubic_mesh",
    "generate_tet_mesh", "read_mesh", "write_poly3", "DdrComplex",
    "QuadratureRule", "rule_for", "TrigSolution", "BCRegion",
    "NavierStokesSolver", "ProblemSpec", "SolverOptions", "essential_bc",
    "natural_bc", "pressflux_bc", "DofLayout", "DofVector",
    "SerendipityConfig", "SpaceKind", "boundary_subspace_mask",
    "classify_boundary", "load_dofvector", "save_dofvector",
]
__version__ = "0.1.0"
