"""Microwave output-field squeezing in cavity magnomechanics.

A magnon mode of a driven ferrimagnetic sphere couples to a microwave cavity
(beam-splitter interaction) and to a mechanical mode through a dispersive
magnetostrictive force.  The nonlinearity correlates magnon amplitude and
phase; the state swap transfers the resulting squeezing to the cavity output,
observable as a homodyne noise spectral density below the vacuum level 1/2.

The package linearizes the three-mode model, checks stability of the drift
matrix, computes the output noise spectrum over frequency and homodyne phase,
and runs the parameter sweeps, phase optimization, and threshold searches of
the squeezing working points.
"""

from .config import RunConfig, load_config, parse_config_text
from .constants import CONSTANTS, PhysicalConstants
from .dynamics import (BASIS_LABELS, NOISE_LABELS, CovarianceMatrix,
                       LinearizedModel, StabilityReport, build_model,
                       lyapunov_covariance, model_from_params, stability,
                       susceptibility)
from .errors import (BracketError, ConfigError, DegenerateParametersError,
                     MagsqueezeError, UnstableModelError, VerificationError)
from .optimize import (Axis, SweepGrid, ThresholdResult, optimal_phase,
                       power_threshold, sweep_detuning, sweep_kappa,
                       sweep_omega_phi, temperature_ceiling,
                       temperature_curves)
from .params import (OperatingPoint, PhysicalParams, SteadyState,
                     ThermalOccupations, cooperativity, effective_detuning,
                     field_from_power, kerr_validity, linearized_coupling,
                     low_excitation_check, magnon_frequency, operating_point,
                     rabi_frequency, spin_count, steady_state,
                     thermal_occupation, thermal_occupations)
from .spectra import (SpectrumResult, TransferMatrix, monte_carlo_spectrum,
                      nsd_db, output_nsd, quadrature_spectral_matrix,
                      spectrum_grid, transfer_matrix)
from .verify import CheckResult, integrated_spectrum_covariance, run_checks

__version__ = "0.1.0"

__all__ = [
    "BASIS_LABELS", "NOISE_LABELS", "CONSTANTS",
    "PhysicalConstants", "PhysicalParams", "SteadyState",
    "ThermalOccupations", "OperatingPoint", "LinearizedModel",
    "StabilityReport", "CovarianceMatrix", "TransferMatrix",
    "SpectrumResult", "Axis", "SweepGrid", "ThresholdResult", "RunConfig",
    "CheckResult",
    "MagsqueezeError", "ConfigError", "DegenerateParametersError",
    "UnstableModelError", "BracketError", "VerificationError",
    "spin_count", "magnon_frequency", "field_from_power", "rabi_frequency",
    "thermal_occupation", "thermal_occupations", "steady_state",
    "linearized_coupling", "effective_detuning", "kerr_validity",
    "low_excitation_check", "cooperativity", "operating_point",
    "build_model", "model_from_params", "stability", "susceptibility",
    "lyapunov_covariance",
    "transfer_matrix", "quadrature_spectral_matrix", "output_nsd", "nsd_db",
    "spectrum_grid", "monte_carlo_spectrum",
    "optimal_phase", "sweep_omega_phi", "sweep_detuning", "sweep_kappa",
    "temperature_curves", "power_threshold", "temperature_ceiling",
    "load_config", "parse_config_text", "run_checks",
    "integrated_spectrum_covariance",
]
