"""Numerical toolkit for the finite free p-Stam inequality.

Real-rooted polynomial arithmetic, finite free additive convolution, l^p
Fisher information and Stam deficits, the coupling spectrum at the Hermite
point, CLT dynamics, closed-loop extremal search and e-value family screens.
"""

from .aht import evalue, gap_statistic, screen_family, summarize_elites
from .clt import clt_step, clt_trajectory
from .convolution import boxplus_coeffs, boxplus_permutation_average, convolve, omega
from .errors import FFStamError
from .fisher import (
    hermite_pair_deficit_closed_form,
    phi_n_normalized,
    phi_np,
    phi_tilde,
    score_vector,
    stam_deficit,
)
from .realroot import DOUBLE, PolyCoeffs, PrecisionContext, RootConfig, coeffs_to_roots, roots_to_coeffs
from .reference import Family, family_reference, hermite_roots, normalize_shape
from .search import EliteBuffer, SearchConfig, closed_loop_run, srp_search, sweep
from .spectrum import coupling_matrix, meanzero_singular_values, spectrum_audit

__version__ = "0.1.0"

__all__ = [
    "DOUBLE",
    "EliteBuffer",
    "FFStamError",
    "Family",
    "PolyCoeffs",
    "PrecisionContext",
    "RootConfig",
    "SearchConfig",
    "boxplus_coeffs",
    "boxplus_permutation_average",
    "closed_loop_run",
    "clt_step",
    "clt_trajectory",
    "coeffs_to_roots",
    "convolve",
    "coupling_matrix",
    "evalue",
    "family_reference",
    "gap_statistic",
    "hermite_pair_deficit_closed_form",
    "hermite_roots",
    "meanzero_singular_values",
    "normalize_shape",
    "omega",
    "phi_n_normalized",
    "phi_np",
    "phi_tilde",
    "roots_to_coeffs",
    "score_vector",
    "screen_family",
    "spectrum_audit",
    "srp_search",
    "stam_deficit",
    "summarize_elites",
    "sweep",
]
