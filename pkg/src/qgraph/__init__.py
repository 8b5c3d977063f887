"""Quantum graphs on square and hexagonal lattices: forward D-N maps and layer-stripping inversion."""
from .lattice import DomainError, LatticeDomain, build_hex_parallelogram, build_square_domain, diagonal_line
from .sturm import DirichletSpectrum, SymmetricPotential, borg_reconstruct, dirichlet_spectrum, propagate
from .vertex_op import CouplingField, DtnOracle, EdgeField, dtn, solve_dirichlet
from .stripping import ReconstructionError, ReconstructionReport, ScanConfig
from .inverse_square import reconstruct_square
from .inverse_hex import reconstruct_hex

__all__ = [
    "CouplingField",
    "DirichletSpectrum",
    "DomainError",
    "DtnOracle",
    "EdgeField",
    "LatticeDomain",
    "ReconstructionError",
    "ReconstructionReport",
    "ScanConfig",
    "SymmetricPotential",
    "borg_reconstruct",
    "build_hex_parallelogram",
    "build_square_domain",
    "diagonal_line",
    "dirichlet_spectrum",
    "dtn",
    "propagate",
    "reconstruct_hex",
    "reconstruct_square",
    "solve_dirichlet",
]
