"""Zero mode spectra of periodic bar-joint frameworks and multigrid quasicrystal frameworks."""

from .errors import (DegenerateBasisError, FullSpectrumError, MMaxExhaustedError, NotInSpectrumError,
                     RumkitError, RumkitIOError, ValidationError, WindowError)
from .framework import (CrystalFramework, FiniteFramework, VelocityField, delone_parameters,
                        flex_residual_max, realize_window, rigid_motion_field, translate_field)
from .geometry import (Basis2, IntegralMatrix2, LineFigure, ProjLine, coefficients_in_basis,
                       reciprocal_line, reduce_line_segments, transform_figure)
from .localisation import (extract_band_flex, extract_line_flex, extract_local_flex, synthesize_ifm,
                           verify_localisation)
from .multigrid import (MultigridSpec, Tiling, check_regularity, dualize, extract_ribbon, framework_of,
                        modulated_ribbon_flex, pair_slippage_flex, rational_approximant, ribbon_figure,
                        shear_flex)
from .rum import (detect_spectral_lines, extract_ifm, scale_spectrum_map, scan_spectrum, sigma_min,
                  symbol_matrix)
from .spectra import (BandedPhaseField, MatricialPhaseField, evaluate_phase_field, figure_distance_clipped,
                      limit_spectrum_multigrid, modulate, mostly_epsilon_close, slippage_spectrum,
                      verify_periodic_slippage)

__version__ = "0.1.0"

__all__ = [
    "BandedPhaseField",
    "Basis2",
    "CrystalFramework",
    "DegenerateBasisError",
    "FiniteFramework",
    "FullSpectrumError",
    "IntegralMatrix2",
    "LineFigure",
    "MMaxExhaustedError",
    "MatricialPhaseField",
    "MultigridSpec",
    "NotInSpectrumError",
    "ProjLine",
    "RumkitError",
    "RumkitIOError",
    "Tiling",
    "ValidationError",
    "VelocityField",
    "WindowError",
    "check_regularity",
    "coefficients_in_basis",
    "delone_parameters",
    "detect_spectral_lines",
    "dualize",
    "evaluate_phase_field",
    "extract_band_flex",
    "extract_ifm",
    "extract_line_flex",
    "extract_local_flex",
    "extract_ribbon",
    "figure_distance_clipped",
    "flex_residual_max",
    "framework_of",
    "limit_spectrum_multigrid",
    "modulate",
    "modulated_ribbon_flex",
    "mostly_epsilon_close",
    "pair_slippage_flex",
    "rational_approximant",
    "realize_window",
    "reciprocal_line",
    "reduce_line_segments",
    "ribbon_figure",
    "rigid_motion_field",
    "scale_spectrum_map",
    "scan_spectrum",
    "shear_flex",
    "sigma_min",
    "slippage_spectrum",
    "symbol_matrix",
    "synthesize_ifm",
    "transform_figure",
    "translate_field",
    "verify_localisation",
    "verify_periodic_slippage",
]
