"""Self-consistency checks runnable on any stable configuration.

These checks need no external reference data: they compare two independent
routes to the same quantity (frequency-domain spectra vs the Lyapunov
covariance vs time-domain Monte Carlo) and enforce structural invariants of
the model (evenness, phase periodicity, coupling-phase invariance, spectral
uncertainty bounds, and the vacuum floor of the decoupled system).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.integrate

from .dynamics import (LinearizedModel, build_model, lyapunov_covariance,
                       model_from_params, stability, susceptibility)
from .params import PhysicalParams, ThermalOccupations, operating_point
from .spectra import monte_carlo_spectrum, output_nsd, quadrature_spectral_matrix

__all__ = ["CheckResult", "run_checks", "integrated_spectrum_covariance"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": float(self.measured),
            "tolerance": float(self.tolerance),
            "detail": self.detail,
        }


def integrated_spectrum_covariance(model: LinearizedModel,
                                   epsrel: float = 1e-7) -> np.ndarray:
    """Steady-state covariance from quadrature of the intracavity spectrum.

    Integrates chi(w) D chi(w)^H dw / 2pi over the real line with adaptive
    quadrature; equals the Lyapunov covariance for a stable model.  This is
    the slow, independent route used to validate the algebraic one.
    """
    D = model.diffusion

    def integrand(w: float) -> np.ndarray:
        chi = susceptibility(model, w)
        return (chi @ D @ chi.conj().T).real / (2 * math.pi)

    scale = max(model.omega_b, model.g, abs(model.delta_a),
                abs(model.delta_m_tilde), model.kappa_a, abs(model.g_eff))
    inner = 20 * scale
    marks = np.array([0.25, 0.5, 0.75, 0.9, 0.95, 1.0, 1.05, 1.1, 1.25,
                      1.5, 2.0, 3.0, 5.0, 10.0]) * scale
    points = np.unique(np.concatenate([-marks, [0.0], marks]))
    mid, _ = scipy.integrate.quad_vec(integrand, -inner, inner,
                                      epsrel=epsrel, points=points)
    left, _ = scipy.integrate.quad_vec(integrand, -np.inf, -inner,
                                       epsrel=epsrel)
    right, _ = scipy.integrate.quad_vec(integrand, inner, np.inf,
                                        epsrel=epsrel)
    return mid + left + right


def _rel(diff: float, ref: float) -> float:
    return diff / max(abs(ref), 1e-300)


def _decoupled_vacuum(params: PhysicalParams) -> LinearizedModel:
    p0 = params.with_(temperature=0.0, g=0.0)
    occ = ThermalOccupations(0.0, 0.0, 0.0)
    delta = p0.delta_m_tilde if p0.delta_m_tilde is not None else 0.0
    return build_model(p0, 0j, occ, delta_m_tilde=delta)


def run_checks(params: PhysicalParams, g_eff: Optional[complex] = None,
               seed: int = 1234, omega_range: tuple[float, float] = (0.5, 1.5),
               mc_points: int = 31, mc_phi: float = 0.3 * math.pi,
               mc_segments: int = 16) -> list[CheckResult]:
    """Run the full property suite on one configuration.

    Returns one CheckResult per check with the measured discrepancy; the
    caller decides what to do with failures.
    """
    model = model_from_params(params, g_eff=g_eff)
    report = stability(model)
    wb = model.omega_b
    omegas = np.linspace(omega_range[0], omega_range[1], 101) * wb
    phis = np.linspace(0.0, math.pi, 7, endpoint=False)
    results: list[CheckResult] = []

    results.append(CheckResult(
        name="stable", passed=report.stable,
        measured=report.max_real_part / wb, tolerance=0.0,
        detail="max Re(eig)/omega_b must be < 0"))
    if not report.stable:
        return results

    # Susceptibility inversion quality at representative frequencies.
    probe = np.array([0.0, 0.5, 1.0, 1.5, 3.0]) * wb
    chi = susceptibility(model, probe)
    lhs = -1j * probe[:, None, None] * np.eye(6) - model.drift
    resid = max(np.linalg.norm(L @ c - np.eye(6), 2)
                for L, c in zip(lhs, chi))
    results.append(CheckResult("susceptibility_residual", resid <= 1e-10,
                               float(resid), 1e-10))

    # Lyapunov solver residual.
    V = lyapunov_covariance(model).V
    A, D = model.drift, model.diffusion
    lyap_resid = np.linalg.norm(A @ V + V @ A.T + D) / np.linalg.norm(D)
    results.append(CheckResult("lyapunov_residual", lyap_resid <= 1e-10,
                               float(lyap_resid), 1e-10))

    # Physicality of the stationary state.
    viol = lyapunov_covariance(model).physicality_violation()
    tol_phys = 1e-8 * max(1.0, float(np.abs(V).max()))
    results.append(CheckResult("covariance_physicality", viol >= -tol_phys,
                               float(viol), tol_phys,
                               "min eig of V + iJ/2"))

    # Independent covariance route: integrated intracavity spectrum.
    V_int = integrated_spectrum_covariance(model)
    dv = np.linalg.norm(V_int - V) / np.linalg.norm(V)
    results.append(CheckResult("integrated_spectrum_vs_lyapunov", dv <= 1e-4,
                               float(dv), 1e-4))

    # Evenness in frequency.
    M_pos = quadrature_spectral_matrix(model, omegas)
    M_neg = quadrature_spectral_matrix(model, -omegas)
    even = float(np.abs(M_pos - M_neg).max() / np.abs(M_pos).max())
    results.append(CheckResult("even_in_omega", even <= 1e-10, even, 1e-10))

    # Periodicity in phase.
    per = 0.0
    for phi in phis:
        s1 = output_nsd(model, omegas, phi)
        s2 = output_nsd(model, omegas, phi + math.pi)
        per = max(per, float(np.abs(s1 - s2).max() / np.abs(s1).max()))
    results.append(CheckResult("pi_periodic_in_phi", per <= 1e-10, per, 1e-10))

    # Invariance under the phase of G.  Rotating G by theta rotates the
    # cavity and magnon quadrature frames jointly by theta, so the spectrum
    # obeys the exact covariance S(w, phi; G e^{i theta}) = S(w, phi - theta;
    # G); the phase-optimized spectrum (eigenvalues of M) is pointwise
    # invariant.  Both forms are checked.
    rng = np.random.default_rng(seed)
    op = operating_point(params, g_eff=g_eff)
    eigs_ref = np.linalg.eigvalsh(M_pos)
    inv = 0.0
    for theta in rng.uniform(0.0, 2 * math.pi, size=3):
        rotated = build_model(params, op.G * np.exp(1j * theta),
                              op.occupations, delta_m_tilde=op.delta_m_tilde)
        for phi in (0.3 * math.pi, 0.8 * math.pi):
            s_rot = output_nsd(rotated, omegas, phi)
            s_ref = output_nsd(model, omegas, phi - theta)
            inv = max(inv, float(np.abs(s_rot - s_ref).max()
                                 / np.abs(s_ref).max()))
        eigs_rot = np.linalg.eigvalsh(
            quadrature_spectral_matrix(rotated, omegas))
        inv = max(inv, float(np.abs(eigs_rot - eigs_ref).max()
                             / np.abs(eigs_ref).max()))
    results.append(CheckResult("coupling_phase_invariance", inv <= 1e-10,
                               inv, 1e-10,
                               "S(w, phi; G e^{i t}) vs S(w, phi - t; G) and "
                               "min/max phase-optimized spectra"))

    # No squeezing without the magnomechanical coupling.
    zero_g = build_model(params, 0j, op.occupations,
                         delta_m_tilde=op.delta_m_tilde)
    M0 = quadrature_spectral_matrix(zero_g, omegas)
    min_eig = float(np.linalg.eigvalsh(M0).min())
    results.append(CheckResult("no_squeezing_without_coupling",
                               min_eig >= 0.5 - 1e-10, min_eig, 0.5 - 1e-10,
                               "min over omega/phi of S at G = 0"))

    # Spectral uncertainty bound det M >= 1/4.
    det = float(np.linalg.det(M_pos).min())
    results.append(CheckResult("spectral_uncertainty", det >= 0.25 - 1e-6,
                               det, 0.25 - 1e-6, "min det M over grid"))

    # Vacuum floor of the decoupled system at T = 0.
    vac = _decoupled_vacuum(params)
    M_vac = quadrature_spectral_matrix(vac, omegas)
    floor = float(np.abs(M_vac - 0.5 * np.eye(2)).max())
    results.append(CheckResult("vacuum_floor", floor <= 1e-12, floor, 1e-12,
                               "|M - I/2| for decoupled T=0 system"))

    # Time-domain Monte Carlo oracle vs the analytic spectrum.
    rate = max(float(np.abs(report.eigenvalues).max()), wb)
    dt = 0.008 / rate
    grid = np.linspace(omega_range[0], omega_range[1], mc_points) * wb
    gap = grid[1] - grid[0]
    n_seg = 1 << max(int(math.ceil(math.log2(2 * math.pi / (gap * dt)))), 8)
    total_time = (mc_segments + 0.5) * n_seg * dt
    mc = monte_carlo_spectrum(model, grid, seed=seed, total_time=total_time,
                              dt=dt, phi=mc_phi)
    s_ref = output_nsd(model, mc.omega_over_omega_b * wb, mc_phi)
    pulls = np.abs(mc.S[:, 0] - s_ref) / np.maximum(mc.stderr[:, 0], 1e-300)
    frac = float(np.mean(pulls <= 3.0))
    results.append(CheckResult("monte_carlo_agreement", frac >= 0.95, frac,
                               0.95, f"fraction within 3 standard errors; "
                               f"max pull {pulls.max():.2f}"))
    return results
