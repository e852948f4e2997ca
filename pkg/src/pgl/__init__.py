"""Exact and Monte Carlo tools for percolation games on the oriented lattice."""

from .core import (ALPHABET, SMALLNESS, BondParams, CylinderMeasure, GenParams, ParameterError,
                   SeedSpec, make_bond_params, make_gen_params)

__all__ = ["ALPHABET", "SMALLNESS", "BondParams", "CylinderMeasure", "GenParams", "ParameterError",
           "SeedSpec", "make_bond_params", "make_gen_params"]
__version__ = "0.1.0"
