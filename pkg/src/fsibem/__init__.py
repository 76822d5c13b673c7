"""Coupled finite-element / time-domain boundary-element solver.

Finite elements discretize linear elastodynamics inside the cube
[-1,1]^3; Galerkin boundary elements in the time domain discretize the
exterior acoustic wave equation on its surface.  The two are coupled
through the normal traces and advanced jointly by a marching-on-in-time
recursion whose right-hand side convolves the solution history with
lagged retarded boundary matrices.
"""

from fsibem.mesh import VolumeMesh, SurfaceMesh, build_cube_mesh, extract_boundary, mesh_size
from fsibem.elastic import (
    MaterialParams,
    CouplingBlocks,
    assemble_lame_stiffness,
    assemble_mass,
    assemble_trace_coupling,
    assemble_boundary_mass,
    assemble_coupling_blocks,
)

__all__ = [
    "VolumeMesh",
    "SurfaceMesh",
    "build_cube_mesh",
    "extract_boundary",
    "mesh_size",
    "MaterialParams",
    "CouplingBlocks",
    "assemble_lame_stiffness",
    "assemble_mass",
    "assemble_trace_coupling",
    "assemble_boundary_mass",
    "assemble_coupling_blocks",
]
