"""Linearized quadrature dynamics of the cavity-magnon-phonon system.

The quantum Langevin equations for the fluctuations, written in the real
quadrature basis u = (X_a, Y_a, x_m, y_m, q, p) with X = (a + a^dag)/sqrt(2)
and Y = i (a^dag - a)/sqrt(2), take the form

    du/dt = A u + B z(t),

with seven white-noise inputs z = (X_1in, Y_1in, X_2in, Y_2in, x_min, y_min,
xi): two cavity ports, the magnon bath, and the Brownian force on the
mechanical momentum.  The symmetrized input spectral densities are
(n_a + 1/2) for the four cavity quadratures, (n_m + 1/2) for the magnon
quadratures, and gamma (2 n_b + 1) for xi (Markovian Brownian noise, valid
for large mechanical quality factor).

This module builds (A, B, S_z), classifies stability from the eigenvalues of
A, inverts the frequency-domain response, and solves the steady-state
Lyapunov equation used as an internal verification oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .errors import UnstableModelError
from .params import (OperatingPoint, PhysicalParams, ThermalOccupations,
                     operating_point)

__all__ = [
    "BASIS_LABELS",
    "NOISE_LABELS",
    "LinearizedModel",
    "StabilityReport",
    "CovarianceMatrix",
    "build_model",
    "model_from_params",
    "stability",
    "susceptibility",
    "lyapunov_covariance",
]

BASIS_LABELS = ("X_a", "Y_a", "x_m", "y_m", "q", "p")
NOISE_LABELS = ("X_1in", "Y_1in", "X_2in", "Y_2in", "x_min", "y_min", "xi")

# Eigenvalue real parts within +-tol of zero are numerically indistinguishable
# from marginal stability at double precision on rad/s scales.
MARGINAL_TOL_FACTOR = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LinearizedModel:
    """Drift matrix, noise routing, and input spectra of one configuration."""

    drift: np.ndarray            # (6, 6) real, basis BASIS_LABELS
    noise_routing: np.ndarray    # (6, 7) real, inputs NOISE_LABELS
    input_psd: np.ndarray        # (7,) symmetrized white intensities
    kappa_1: float
    kappa_a: float
    omega_b: float
    delta_a: float
    delta_m_tilde: float
    g: float
    g_eff: complex               # linearized magnomechanical coupling G
    occupations: ThermalOccupations

    def __post_init__(self) -> None:
        A = np.asarray(self.drift, dtype=float)
        B = np.asarray(self.noise_routing, dtype=float)
        S = np.asarray(self.input_psd, dtype=float)
        if A.shape != (6, 6) or B.shape != (6, 7) or S.shape != (7,):
            raise ValueError("drift must be 6x6, routing 6x7, input_psd length 7")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
                and np.all(np.isfinite(S))):
            raise ValueError("model matrices must be finite")
        if np.any(S < 0):
            raise ValueError("input spectral densities must be >= 0")
        object.__setattr__(self, "drift", _freeze(A))
        object.__setattr__(self, "noise_routing", _freeze(B))
        object.__setattr__(self, "input_psd", _freeze(S))

    @property
    def diffusion(self) -> np.ndarray:
        """D = B diag(S_z) B^T, the symmetric PSD diffusion matrix."""
        B = self.noise_routing
        return (B * self.input_psd) @ B.T


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalue-based verdict on the drift matrix."""

    eigenvalues: np.ndarray      # (6,) complex
    max_real_part: float         # rad/s
    stable: bool                 # all real parts strictly negative
    margin: float                # rad/s, -max_real_part
    marginal: bool               # |max_real_part| within numerical tolerance

    def __post_init__(self) -> None:
        object.__setattr__(self, "eigenvalues",
                           _freeze(np.asarray(self.eigenvalues, dtype=complex)))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Steady-state covariance of u, from the Lyapunov equation."""

    V: np.ndarray                # (6, 6) real symmetric

    def __post_init__(self) -> None:
        V = np.asarray(self.V, dtype=float)
        if V.shape != (6, 6):
            raise ValueError("V must be 6x6")
        asym = np.abs(V - V.T).max()
        scale = max(1.0, np.abs(V).max())
        if asym > 1e-10 * scale:
            raise ValueError(f"V must be symmetric (asymmetry {asym:.3g})")
        if np.any(np.diag(V) < -1e-12 * scale):
            raise ValueError("variances on the diagonal must be >= 0")
        object.__setattr__(self, "V", _freeze(0.5 * (V + V.T)))

    def physicality_violation(self) -> float:
        """Most negative eigenvalue of V + i J/2 (>= 0 means physical)."""
        J = np.zeros((6, 6))
        for k in range(3):
            J[2 * k, 2 * k + 1] = 1.0
            J[2 * k + 1, 2 * k] = -1.0
        eigs = np.linalg.eigvalsh(self.V + 0.5j * J)
        return float(eigs.min())


def build_model(params: PhysicalParams, G: complex,
                occupations: ThermalOccupations,
                delta_m_tilde: Optional[float] = None) -> LinearizedModel:
    """Assemble (A, B, S_z) for coupling G and the given bath occupations.

    ``delta_m_tilde`` defaults to the value carried by ``params``; it must
    be passed explicitly when the configuration specifies a bare detuning.
    """
    if delta_m_tilde is None:
        delta_m_tilde = params.delta_m_tilde
        if delta_m_tilde is None:
            raise ValueError("delta_m_tilde required (params carry only a "
                             "bare detuning)")
    values = [params.delta_a, delta_m_tilde, params.kappa_a, params.kappa_1,
              params.kappa_2, params.kappa_m, params.gamma, params.g,
              params.omega_b, G.real, G.imag]
    if not np.all(np.isfinite(values)):
        raise ValueError("model parameters must be finite")

    ka, km, g, wb = params.kappa_a, params.kappa_m, params.g, params.omega_b
    da, dm, gam = params.delta_a, delta_m_tilde, params.gamma
    Gr, Gi = G.real, G.imag
    r2 = math.sqrt(2.0)

    A = np.array([
        [-ka / 2,  da,       0.0,      g,        0.0,       0.0],
        [-da,      -ka / 2,  -g,       0.0,      0.0,       0.0],
        [0.0,      g,        -km / 2,  dm,       r2 * Gi,   0.0],
        [-g,       0.0,      -dm,      -km / 2,  -r2 * Gr,  0.0],
        [0.0,      0.0,      0.0,      0.0,      0.0,       wb],
        [0.0,      0.0,      -r2 * Gr, -r2 * Gi, -wb,       -gam],
    ])

    B = np.zeros((6, 7))
    sk1, sk2, skm = math.sqrt(params.kappa_1), math.sqrt(params.kappa_2), math.sqrt(km)
    B[0, 0] = sk1
    B[0, 2] = sk2
    B[1, 1] = sk1
    B[1, 3] = sk2
    B[2, 4] = skm
    B[3, 5] = skm
    B[5, 6] = 1.0

    n_a, n_m, n_b = occupations.n_a, occupations.n_m, occupations.n_b
    S_z = np.array([n_a + 0.5] * 4 + [n_m + 0.5] * 2 + [gam * (2 * n_b + 1)])

    return LinearizedModel(
        drift=A, noise_routing=B, input_psd=S_z,
        kappa_1=params.kappa_1, kappa_a=ka, omega_b=wb, delta_a=da,
        delta_m_tilde=dm, g=g, g_eff=complex(G), occupations=occupations,
    )


def model_from_params(params: PhysicalParams,
                      g_eff: Optional[complex] = None) -> LinearizedModel:
    """Resolve the operating point of ``params`` and linearize around it."""
    op = operating_point(params, g_eff=g_eff)
    return build_model(params, op.G, op.occupations,
                       delta_m_tilde=op.delta_m_tilde)


def stability(model: LinearizedModel) -> StabilityReport:
    """Classify the drift matrix: stable iff all eigenvalue real parts < 0.

    Real parts within MARGINAL_TOL_FACTOR * omega_b of zero are flagged
    marginal; they cannot be told apart from zero at double precision.
    """
    try:
        eigenvalues = np.linalg.eigvals(model.drift)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigenvalue solver failed: {exc}") from exc
    max_real = float(eigenvalues.real.max())
    tol = MARGINAL_TOL_FACTOR * model.omega_b
    return StabilityReport(
        eigenvalues=eigenvalues,
        max_real_part=max_real,
        stable=max_real < 0.0,
        margin=-max_real,
        marginal=abs(max_real) < tol,
    )


def susceptibility(model: LinearizedModel,
                   omega: Union[float, np.ndarray]) -> np.ndarray:
    """Frequency-domain response chi(w) = (-i w I - A)^(-1).

    Accepts a scalar (returns 6x6) or an array of frequencies (returns
    (n, 6, 6)).  Raises for a singular response, which can only occur at
    marginal stability.
    """
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    I6 = np.eye(6)
    lhs = -1j * omega_arr[:, None, None] * I6 - model.drift
    try:
        chi = np.linalg.solve(lhs, np.broadcast_to(I6, lhs.shape))
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(
            f"(-i w I - A) singular at one of the requested frequencies: {exc}"
        ) from exc
    if not np.all(np.isfinite(chi)):
        raise ArithmeticError("susceptibility overflowed; system is at or "
                              "beyond marginal stability")
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return chi[0]
    return chi


def lyapunov_covariance(model: LinearizedModel,
                        residual_tol: float = 1e-10) -> CovarianceMatrix:
    """Steady-state covariance V solving A V + V A^T = -D.

    Requires a stable model (no stationary state otherwise).  The solver
    residual ||A V + V A^T + D|| / ||D|| is checked against residual_tol.
    """
    report = stability(model)
    if not report.stable:
        raise UnstableModelError(
            f"no stationary covariance: max Re(eig) = {report.max_real_part:.6g}")
    A = model.drift
    D = model.diffusion
    V = scipy.linalg.solve_continuous_lyapunov(A, -D)
    V = 0.5 * (V + V.T)
    residual = np.linalg.norm(A @ V + V @ A.T + D) / max(np.linalg.norm(D), 1e-300)
    if residual > residual_tol:
        raise ArithmeticError(
            f"Lyapunov residual {residual:.3g} exceeds {residual_tol:.3g}")
    return CovarianceMatrix(V=V)
