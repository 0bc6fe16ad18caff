"""Numerical toolkit for fractional p-Laplacians, Gagliardo seminorms and nonlocal commutators."""

__version__ = "0.1.0"

from .grid import Box, Domain, FracParams, Grid, SampledFunction, make_preset, mean_value  # noqa: E402
from .sobolev import gagliardo_seminorm  # noqa: E402
from .spectral import FilterBank, frac_laplacian, lp_project, riesz_potential, triebel_norm  # noqa: E402
from .pairing import OperatorSpec, TestSpace, dual_norm_estimate, general_pairing, plap_pairing  # noqa: E402

__all__ = [
    "Box", "Domain", "FracParams", "Grid", "SampledFunction", "make_preset", "mean_value",
    "gagliardo_seminorm", "FilterBank", "frac_laplacian", "lp_project", "riesz_potential",
    "triebel_norm", "OperatorSpec", "TestSpace", "dual_norm_estimate", "general_pairing",
    "plap_pairing",
]
