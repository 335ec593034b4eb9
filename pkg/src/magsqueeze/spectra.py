"""Noise spectral density of the cavity output field.

The output field leaves through cavity port 1 via the input-output relation
a_out = sqrt(kappa_1) a - a_1in, so the output quadratures (X_out, Y_out)
respond to the seven inputs through

    T(w) = C chi(w) B + D_dir,

where C selects sqrt(kappa_1) times the cavity rows of the state, chi is the
susceptibility, B the noise routing, and D_dir the direct -1 feedthrough of
the port-1 input quadratures.  With diagonal symmetrized input intensities
S_z the symmetrized 2x2 output spectral matrix is

    M(w) = Re[ T(w) diag(S_z) T(w)^H ],

and the homodyne NSD at local-oscillator phase phi is the quadratic form
S_W(w, phi) = e(phi)^T M(w) e(phi) with e(phi) = (cos phi, sin phi).  The
vacuum level is 1/2; squeezing in dB is -10 log10(S / (1/2)).

A time-domain Monte Carlo estimator of the same spectrum (exact exponential
propagation of the linear SDE, Hann-windowed averaged periodograms) serves as
an independent cross-validation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg
import scipy.signal

from .dynamics import LinearizedModel, lyapunov_covariance, stability, susceptibility
from .errors import UnstableModelError

__all__ = [
    "TransferMatrix",
    "SpectrumResult",
    "transfer_matrix",
    "quadrature_spectral_matrix",
    "output_nsd",
    "nsd_db",
    "spectrum_grid",
    "monte_carlo_spectrum",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransferMatrix:
    """Output-quadrature response to the seven inputs at one frequency."""

    T: np.ndarray        # (2, 7) complex
    omega: float         # rad/s

    def __post_init__(self) -> None:
        T = np.asarray(self.T, dtype=complex)
        if T.shape != (2, 7):
            raise ValueError("T must be 2x7")
        object.__setattr__(self, "T", _freeze(T))


@dataclass(frozen=True)
class SpectrumResult:
    """Homodyne NSD over a frequency x phase grid.

    Frequencies are stored as omega/omega_b and phases as phi/pi, matching
    the plotting conventions.  ``S`` has shape (n_omega, n_phi); the vacuum
    level is 0.5.  ``stderr`` is populated by the Monte Carlo estimator.
    """

    omega_over_omega_b: np.ndarray
    phi_over_pi: np.ndarray
    S: np.ndarray
    S_db: np.ndarray
    metadata: dict = field(default_factory=dict)
    stderr: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        w = np.atleast_1d(np.asarray(self.omega_over_omega_b, dtype=float))
        p = np.atleast_1d(np.asarray(self.phi_over_pi, dtype=float))
        S = np.asarray(self.S, dtype=float).reshape(len(w), len(p))
        if not np.all(np.isfinite(S)) or np.any(S < 0):
            raise ValueError("S must be finite and >= 0")
        object.__setattr__(self, "omega_over_omega_b", _freeze(w))
        object.__setattr__(self, "phi_over_pi", _freeze(p))
        object.__setattr__(self, "S", _freeze(S))
        object.__setattr__(self, "S_db", _freeze(
            np.asarray(self.S_db, dtype=float).reshape(S.shape)))
        if self.stderr is not None:
            object.__setattr__(self, "stderr", _freeze(
                np.asarray(self.stderr, dtype=float).reshape(S.shape)))

    @property
    def min_S(self) -> float:
        return float(self.S.min())

    def min_location(self) -> tuple[float, float]:
        """(omega/omega_b, phi/pi) of the grid minimum."""
        i, j = np.unravel_index(int(np.argmin(self.S)), self.S.shape)
        return float(self.omega_over_omega_b[i]), float(self.phi_over_pi[j])


def _output_operators(model: LinearizedModel) -> tuple[np.ndarray, np.ndarray]:
    """(C, D_dir): state readout and direct feedthrough of the output port."""
    C = np.zeros((2, 6))
    C[0, 0] = C[1, 1] = math.sqrt(model.kappa_1)
    D = np.zeros((2, 7))
    D[0, 0] = D[1, 1] = -1.0
    return C, D


def transfer_matrix(model: LinearizedModel, omega: float) -> TransferMatrix:
    """T(w) = C chi(w) B + D_dir at a single frequency (rad/s)."""
    C, D = _output_operators(model)
    chi = susceptibility(model, float(omega))
    return TransferMatrix(T=C @ chi @ model.noise_routing + D, omega=float(omega))


def _transfer_batch(model: LinearizedModel, omegas: np.ndarray) -> np.ndarray:
    """(n, 2, 7) complex transfer matrices over a frequency array."""
    C, D = _output_operators(model)
    chi = susceptibility(model, omegas)
    return np.einsum("ij,njk,kl->nil", C, chi, model.noise_routing,
                     optimize=True) + D


def _require_stable(model: LinearizedModel) -> None:
    report = stability(model)
    if not report.stable:
        raise UnstableModelError(
            f"spectrum undefined: max Re(eig) = {report.max_real_part:.6g} >= 0")


def _spectral_matrix_batch(model: LinearizedModel,
                           omegas: np.ndarray) -> np.ndarray:
    T = _transfer_batch(model, omegas)
    M = np.einsum("nij,j,nkj->nik", T, model.input_psd, T.conj(),
                  optimize=True)
    return M.real


def quadrature_spectral_matrix(model: LinearizedModel,
                               omega: Union[float, np.ndarray]) -> np.ndarray:
    """Symmetrized 2x2 output spectral matrix M(w) = Re[T S_z T^H].

    S_X = M[0,0], S_Y = M[1,1], S_XY = M[0,1]; the homodyne NSD at any phase
    is the quadratic form of M with (cos phi, sin phi).  Scalar omega gives a
    (2, 2) array, a frequency array gives (n, 2, 2).
    """
    _require_stable(model)
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    M = _spectral_matrix_batch(model, omega_arr)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return M[0]
    return M


def output_nsd(model: LinearizedModel, omega: Union[float, np.ndarray],
               phi: float) -> Union[float, np.ndarray]:
    """Homodyne NSD S_W(w, phi) of the cavity output field (vacuum = 1/2)."""
    _require_stable(model)
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    M = _spectral_matrix_batch(model, omega_arr)
    e = np.array([math.cos(phi), math.sin(phi)])
    S = np.einsum("i,nij,j->n", e, M, e)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return float(S[0])
    return S


def nsd_db(S: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Squeezing in dB below vacuum: -10 log10(S / 0.5); positive = squeezed."""
    S_arr = np.asarray(S, dtype=float)
    if np.any(S_arr <= 0):
        raise ValueError("S must be positive to convert to dB")
    out = -10.0 * np.log10(S_arr / 0.5)
    return float(out) if np.ndim(S) == 0 else out


def spectrum_grid(model: LinearizedModel, omegas: np.ndarray,
                  phis: np.ndarray, metadata: Optional[dict] = None) -> SpectrumResult:
    """Evaluate S_W on the outer product of frequency and phase grids.

    ``omegas`` in rad/s, ``phis`` in rad.  One susceptibility solve per
    frequency; phases are quadratic forms of the cached 2x2 matrices.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    _require_stable(model)
    M = _spectral_matrix_batch(model, omegas)
    E = np.stack([np.cos(phis), np.sin(phis)])          # (2, n_phi)
    S = np.einsum("ip,nij,jp->np", E, M, E, optimize=True)
    meta = dict(metadata or {})
    meta.setdefault("stable", True)
    return SpectrumResult(
        omega_over_omega_b=omegas / model.omega_b,
        phi_over_pi=phis / math.pi,
        S=S,
        S_db=nsd_db(np.maximum(S, 1e-300)),
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# Monte Carlo cross-validation oracle
# ---------------------------------------------------------------------------

def _discretization(model: LinearizedModel, dt: float):
    """Exact one-step statistics of the linear SDE over an interval dt.

    Returns (F, mean_coupling, L_resid) with
      F = exp(A dt),
      mean_coupling = A^-1 (F - I) B   (regression of the state increment on
                                        the interval-averaged noise),
      L_resid = square root of the residual increment covariance.
    """
    A = model.drift
    B = model.noise_routing
    D = model.diffusion
    n = A.shape[0]
    # Van Loan block-matrix trick for the full increment covariance.
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = -A
    H[:n, n:] = D
    H[n:, n:] = A.T
    E = scipy.linalg.expm(H * dt)
    F = E[n:, n:].T
    Q_full = F @ E[:n, n:]
    Q_full = 0.5 * (Q_full + Q_full.T)

    Aint = np.linalg.solve(A, F - np.eye(n))       # int_0^dt exp(A s) ds
    mean_coupling = Aint @ B
    Q_resid = Q_full - (mean_coupling * model.input_psd) @ mean_coupling.T / dt
    Q_resid = 0.5 * (Q_resid + Q_resid.T)
    w, U = np.linalg.eigh(Q_resid)
    L_resid = U * np.sqrt(np.clip(w, 0.0, None))
    return F, mean_coupling, L_resid


def monte_carlo_spectrum(model: LinearizedModel, omega_grid: np.ndarray,
                         seed: int, total_time: float, dt: float,
                         phi: float = 0.0) -> SpectrumResult:
    """Estimate S_W(w, phi) by integrating the stochastic dynamics.

    The linear SDE is propagated with the exact exponential update (no Euler
    bias): per step the state increment is regressed on the interval-averaged
    input noise, so the direct feedthrough of the output and the filtered
    state share one noise realization.  The output record is split into
    Hann-windowed non-overlapping segments whose averaged periodograms give
    the estimate; the segment scatter gives the standard error.

    Classical white noises with the symmetrized intensities S_z are a valid
    surrogate for the symmetrized spectra of a linear system.  Results are
    bit-reproducible for a given seed.  The returned frequency grid holds the
    FFT bins nearest the requested frequencies.
    """
    report = stability(model)
    if not report.stable:
        raise UnstableModelError("Monte Carlo oracle requires a stable model")
    rate_scale = max(float(np.abs(report.eigenvalues).max()), model.omega_b)
    if dt > 0.01 / rate_scale:
        raise ValueError(
            f"dt = {dt:.3g} too coarse for dynamics at scale {rate_scale:.3g} "
            f"rad/s (need dt <= {0.01 / rate_scale:.3g})")

    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    n_total = int(total_time / dt)
    # Segment length: resolve the requested grid, stay a power of two.
    gaps = np.diff(np.sort(np.abs(omega_grid)))
    min_gap = gaps[gaps > 0].min() if np.any(gaps > 0) else model.omega_b / 100
    need = 2 * math.pi / (min_gap * dt)
    n_seg = 1 << max(int(math.ceil(math.log2(need))), 8)
    n_segments = n_total // n_seg
    if n_segments < 8:
        raise ValueError(
            f"total_time supports only {n_segments} segments of {n_seg} "
            "samples; need >= 8 for error bars (increase total_time or "
            "thin the omega grid)")

    F, mean_coupling, L_resid = _discretization(model, dt)
    # Modal decomposition turns the 6-dim recursion into six scalar
    # first-order IIR filters (C-speed via lfilter).
    lam, Vm = np.linalg.eig(F)
    sigma_w = np.sqrt(model.input_psd / dt)
    C, Ddir = _output_operators(model)
    e = np.array([math.cos(phi), math.sin(phi)])
    c_row = e @ C
    d_row = e @ Ddir

    rng = np.random.default_rng(seed)
    # Stationary start: no burn-in transient.
    V0 = lyapunov_covariance(model).V
    w0, U0 = np.linalg.eigh(V0)
    u = U0 @ (np.sqrt(np.clip(w0, 0, None)) * rng.standard_normal(6))

    window = scipy.signal.get_window("hann", n_seg, fftbins=True)
    win_power = float(np.mean(window ** 2))
    freqs = 2 * math.pi * np.fft.rfftfreq(n_seg, d=dt)
    if np.abs(omega_grid).max() > freqs[-1]:
        raise ValueError("requested frequency exceeds the Nyquist rate pi/dt")
    bins = np.array([int(np.argmin(np.abs(freqs - abs(w)))) for w in omega_grid])

    psd_sum = np.zeros(len(bins))
    psd_sqsum = np.zeros(len(bins))
    for _ in range(n_segments):
        wbar = sigma_w[:, None] * rng.standard_normal((7, n_seg))
        resid = L_resid @ rng.standard_normal((6, n_seg))
        drive = mean_coupling @ wbar + resid
        eta = np.linalg.solve(Vm, drive)
        states = np.empty((6, n_seg), dtype=complex)
        s_prev = np.linalg.solve(Vm, u)
        for k in range(6):
            zi = np.array([lam[k] * s_prev[k]])
            states[k], _ = scipy.signal.lfilter(
                [1.0], [1.0, -lam[k]], eta[k], zi=zi)
        u_traj = (Vm @ states).real           # u at the END of each step
        y = np.empty(n_seg)
        y[0] = c_row @ u + d_row @ wbar[:, 0]
        y[1:] = c_row @ u_traj[:, :-1] + d_row @ wbar[:, 1:]
        u = u_traj[:, -1]
        spec = np.fft.rfft(window * y)
        psd = (np.abs(spec) ** 2) * dt / (n_seg * win_power)
        psd_sum += psd[bins]
        psd_sqsum += psd[bins] ** 2

    S_est = psd_sum / n_segments
    var = np.maximum(psd_sqsum / n_segments - S_est ** 2, 0.0)
    scatter = np.sqrt(var / max(n_segments - 1, 1))
    # Windowed periodograms of a Gaussian process are asymptotically
    # exponential (SD = mean); the model-based error floor guards against
    # scatter underestimates at small segment counts.
    stderr = np.maximum(scatter, S_est / math.sqrt(n_segments))

    return SpectrumResult(
        omega_over_omega_b=freqs[bins] / model.omega_b,
        phi_over_pi=np.array([phi / math.pi]),
        S=np.maximum(S_est, 0.0)[:, None],
        S_db=nsd_db(np.maximum(S_est, 1e-300))[:, None],
        metadata={
            "estimator": "monte-carlo",
            "seed": seed,
            "dt": dt,
            "segments": n_segments,
            "segment_samples": n_seg,
        },
        stderr=stderr[:, None],
    )
