"""Phase optimization, parameter sweeps, and threshold searches.

The homodyne NSD at fixed frequency is a quadratic form of the 2x2 spectral
matrix M(w), so the optimal local-oscillator phase and the attainable
minimum are the minor eigenpair of M in closed form.  Sweeps evaluate the
spectrum over frequency/phase, cavity-detuning, cavity-linewidth, and
temperature grids; bisection searches locate the maximum drive power allowed
by stability and the temperature where squeezing disappears.

Grid conventions follow the plots: frequencies in units of omega_b, phases
in units of pi.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import LinearizedModel, model_from_params, stability
from .errors import BracketError, UnstableModelError
from .params import PhysicalParams, operating_point
from .spectra import nsd_db, quadrature_spectral_matrix

__all__ = [
    "Axis",
    "SweepGrid",
    "ThresholdResult",
    "optimal_phase",
    "sweep_omega_phi",
    "sweep_detuning",
    "sweep_kappa",
    "temperature_curves",
    "power_threshold",
    "temperature_ceiling",
    "DEFAULT_OMEGA_RANGE",
    "DEFAULT_GRID_POINTS",
]

# Default plotting window around the mechanical frequency and axis density;
# 201 points resolve the squeezing feature while keeping sweeps in seconds.
DEFAULT_OMEGA_RANGE = (0.5, 1.5)     # in units of omega_b
DEFAULT_GRID_POINTS = 201

# Below this anisotropy the spectral matrix is numerically isotropic and the
# optimizing phase is defined by the tie-break phi = 0.
_ISOTROPY_RTOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Axis:
    """One labeled sweep axis."""

    name: str
    unit: str
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values",
                           _freeze(np.atleast_1d(np.asarray(self.values, float))))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SweepGrid:
    """Labeled grid of spectrum values with per-point stability flags.

    ``S`` has one entry per grid point (shape = product of axis lengths);
    unstable points are flagged False in ``stable`` and carry NaN.  When the
    phase was optimized per point, ``phi_opt_over_pi`` holds the optimizer.
    """

    axes: tuple[Axis, ...]
    S: np.ndarray
    stable: np.ndarray
    phi_opt_over_pi: Optional[np.ndarray] = None
    fixed: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = tuple(len(ax) for ax in self.axes)
        S = np.asarray(self.S, dtype=float).reshape(shape)
        stable = np.asarray(self.stable, dtype=bool).reshape(shape)
        if np.any(np.isfinite(S) & ~stable):
            raise ValueError("unstable grid points must carry no spectrum value")
        object.__setattr__(self, "S", _freeze(S))
        object.__setattr__(self, "stable", _freeze(stable))
        if self.phi_opt_over_pi is not None:
            object.__setattr__(self, "phi_opt_over_pi", _freeze(
                np.asarray(self.phi_opt_over_pi, float).reshape(shape)))

    @property
    def min_S(self) -> float:
        return float(np.nanmin(self.S))

    def min_location(self) -> tuple[float, ...]:
        """Axis values at the grid minimum."""
        idx = np.unravel_index(int(np.nanargmin(self.S)), self.S.shape)
        return tuple(float(ax.values[i]) for ax, i in zip(self.axes, idx))


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of a bisection search on a stability/squeezing predicate."""

    threshold: float
    unit: str
    bracket: tuple[float, float]
    iterations: int
    at_threshold: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        lo, hi = self.bracket
        if not lo <= self.threshold <= hi:
            raise ValueError("threshold must lie inside the final bracket")


def optimal_phase(model: LinearizedModel, omega: float) -> tuple[float, float]:
    """Phase minimizing S_W at frequency omega, with the attained minimum.

    The NSD is e(phi)^T M e(phi), so the minimizer is the minor eigenvector
    angle of M, returned in [0, pi).  An isotropic M (vacuum-like) has no
    preferred phase; the tie breaks to phi = 0.
    """
    M = quadrature_spectral_matrix(model, omega)
    return next(_minor_eig_phase(M[None, ...]))


def _minor_eig_phase(M: np.ndarray):
    """Yield (phi_star, S_min) per 2x2 matrix in a stacked array."""
    a, b, c = M[..., 0, 0], M[..., 1, 1], M[..., 0, 1]
    mean = 0.5 * (a + b)
    R = np.hypot(0.5 * (a - b), c)
    phi = np.mod(0.5 * (np.arctan2(c, 0.5 * (a - b)) + math.pi), math.pi)
    phi = np.where(R <= _ISOTROPY_RTOL * np.maximum(mean, 1e-300), 0.0, phi)
    smin = mean - R
    for p, s in zip(np.atleast_1d(phi), np.atleast_1d(smin)):
        yield float(p), float(s)


def _phase_optimized_curve(model: LinearizedModel,
                           omegas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi_star, S_min) arrays over a frequency grid, closed form."""
    M = quadrature_spectral_matrix(model, omegas)
    pairs = list(_minor_eig_phase(M))
    phi = np.array([p for p, _ in pairs])
    smin = np.array([s for _, s in pairs])
    return phi, smin


def _omega_grid(model_omega_b: float, omega_range: tuple[float, float],
                n_omega: int) -> np.ndarray:
    lo, hi = omega_range
    return np.linspace(lo, hi, n_omega) * model_omega_b


def _provenance(params: PhysicalParams, **extra) -> dict:
    prov = {"created_unix": time.time()}
    prov.update(extra)
    return prov


def _fixed_snapshot(params: PhysicalParams, model: LinearizedModel) -> dict:
    wb = params.omega_b
    return {
        "omega_a_hz": params.omega_a / (2 * math.pi),
        "omega_b_hz": wb / (2 * math.pi),
        "g_over_omega_b": params.g / wb,
        "kappa_a_over_omega_b": params.kappa_a / wb,
        "kappa_1_over_omega_b": params.kappa_1 / wb,
        "kappa_m_over_omega_b": params.kappa_m / wb,
        "gamma_hz": params.gamma / (2 * math.pi),
        "delta_a_over_omega_b": params.delta_a / wb,
        "delta_m_tilde_over_omega_b": model.delta_m_tilde / wb,
        "g_eff_over_omega_b": abs(model.g_eff) / wb,
        "temperature_k": params.temperature,
    }


def sweep_omega_phi(params: PhysicalParams,
                    omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                    phi_range: tuple[float, float] = (0.0, 1.0),
                    n_omega: int = DEFAULT_GRID_POINTS,
                    n_phi: int = DEFAULT_GRID_POINTS,
                    g_eff: Optional[complex] = None) -> SweepGrid:
    """Dense S_W grid over frequency (units of omega_b) and phase (units of pi).

    The base configuration must be stable; instability is rejected up front.
    """
    if n_omega < 2 or n_phi < 2:
        raise ValueError("need at least 2 points per axis")
    model = model_from_params(params, g_eff=g_eff)
    report = stability(model)
    if not report.stable:
        raise UnstableModelError(
            f"base parameters unstable (max Re eig = {report.max_real_part:.6g})")
    omegas = _omega_grid(model.omega_b, omega_range, n_omega)
    phis = np.linspace(phi_range[0], phi_range[1], n_phi) * math.pi
    M = quadrature_spectral_matrix(model, omegas)
    E = np.stack([np.cos(phis), np.sin(phis)])
    S = np.einsum("ip,nij,jp->np", E, M, E, optimize=True)
    return SweepGrid(
        axes=(Axis("omega", "omega_b", omegas / model.omega_b),
              Axis("phi", "pi", phis / math.pi)),
        S=S,
        stable=np.ones_like(S, dtype=bool),
        fixed=_fixed_snapshot(params, model),
        provenance=_provenance(params, kind="omega-phi"),
    )


def sweep_detuning(params: PhysicalParams,
                   delta_a_values: Sequence[float],
                   omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                   n_omega: int = DEFAULT_GRID_POINTS,
                   phi: float = 0.3 * math.pi,
                   g_eff: Optional[complex] = None) -> SweepGrid:
    """S_W over (cavity detuning, frequency) at a fixed homodyne phase.

    ``delta_a_values`` in units of omega_b.  Each detuning re-solves the
    operating point; unstable rows are flagged and carry NaN.
    """
    delta_a_values = np.atleast_1d(np.asarray(delta_a_values, dtype=float))
    base_model = model_from_params(params, g_eff=g_eff)
    if not stability(base_model).stable:
        raise UnstableModelError("base parameters unstable")
    omegas = _omega_grid(params.omega_b, omega_range, n_omega)
    e = np.array([math.cos(phi), math.sin(phi)])
    S = np.full((len(delta_a_values), n_omega), np.nan)
    ok = np.zeros((len(delta_a_values), n_omega), dtype=bool)
    for i, da in enumerate(delta_a_values):
        p_i = params.with_(delta_a=da * params.omega_b)
        model = model_from_params(p_i, g_eff=g_eff)
        if not stability(model).stable:
            continue
        M = quadrature_spectral_matrix(model, omegas)
        S[i] = np.einsum("i,nij,j->n", e, M, e)
        ok[i] = True
    return SweepGrid(
        axes=(Axis("delta_a", "omega_b", delta_a_values),
              Axis("omega", "omega_b", omegas / params.omega_b)),
        S=S,
        stable=ok,
        phi_opt_over_pi=None,
        fixed={**_fixed_snapshot(params, base_model), "phi_over_pi": phi / math.pi},
        provenance=_provenance(params, kind="detuning"),
    )


def sweep_kappa(params: PhysicalParams,
                kappa_a_values: Sequence[float],
                omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                n_omega: int = DEFAULT_GRID_POINTS,
                phi: float = 0.3 * math.pi,
                g_eff: Optional[complex] = None) -> SweepGrid:
    """Family of fixed-phase spectra, one per total cavity linewidth.

    ``kappa_a_values`` in units of omega_b.  The port split kappa_1/kappa_a
    is held at the base configuration's ratio as kappa_a varies.
    """
    kappa_a_values = np.atleast_1d(np.asarray(kappa_a_values, dtype=float))
    ratio = params.kappa_1 / params.kappa_a
    base_model = model_from_params(params, g_eff=g_eff)
    if not stability(base_model).stable:
        raise UnstableModelError("base parameters unstable")
    omegas = _omega_grid(params.omega_b, omega_range, n_omega)
    e = np.array([math.cos(phi), math.sin(phi)])
    S = np.full((len(kappa_a_values), n_omega), np.nan)
    ok = np.zeros_like(S, dtype=bool)
    for i, ka in enumerate(kappa_a_values):
        kappa_a = ka * params.omega_b
        p_i = params.with_(kappa_a=kappa_a, kappa_1=ratio * kappa_a,
                           kappa_2=(1 - ratio) * kappa_a)
        model = model_from_params(p_i, g_eff=g_eff)
        if not stability(model).stable:
            continue
        M = quadrature_spectral_matrix(model, omegas)
        S[i] = np.einsum("i,nij,j->n", e, M, e)
        ok[i] = True
    return SweepGrid(
        axes=(Axis("kappa_a", "omega_b", kappa_a_values),
              Axis("omega", "omega_b", omegas / params.omega_b)),
        S=S,
        stable=ok,
        fixed={**_fixed_snapshot(params, base_model), "phi_over_pi": phi / math.pi,
               "kappa_1_ratio": ratio},
        provenance=_provenance(params, kind="kappa"),
    )


def temperature_curves(params: PhysicalParams,
                       temperatures: Sequence[float],
                       omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                       n_omega: int = DEFAULT_GRID_POINTS,
                       global_phi: bool = False,
                       g_eff: Optional[complex] = None,
                       n_phi_global: int = 721) -> SweepGrid:
    """Phase-optimized spectra at several temperatures.

    By default the phase is optimized per frequency point (closed form).
    With ``global_phi`` a single phase per temperature is chosen, the one
    whose fixed-phase curve reaches the deepest minimum.
    """
    temperatures = np.atleast_1d(np.asarray(temperatures, dtype=float))
    if np.any(temperatures < 0):
        raise ValueError("temperatures must be >= 0")
    omegas = _omega_grid(params.omega_b, omega_range, n_omega)
    S = np.full((len(temperatures), n_omega), np.nan)
    phi_opt = np.full_like(S, np.nan)
    ok = np.zeros_like(S, dtype=bool)
    base_model = None
    for i, T in enumerate(temperatures):
        p_i = params.with_(temperature=float(T))
        model = model_from_params(p_i, g_eff=g_eff)
        if base_model is None:
            base_model = model
        if not stability(model).stable:
            continue
        if global_phi:
            phis = np.linspace(0, math.pi, n_phi_global, endpoint=False)
            M = quadrature_spectral_matrix(model, omegas)
            E = np.stack([np.cos(phis), np.sin(phis)])
            grid = np.einsum("ip,nij,jp->np", E, M, E, optimize=True)
            j = int(np.argmin(grid.min(axis=0)))
            S[i] = grid[:, j]
            phi_opt[i] = phis[j] / math.pi
        else:
            phi_i, s_i = _phase_optimized_curve(model, omegas)
            S[i] = s_i
            phi_opt[i] = phi_i / math.pi
        ok[i] = True
    return SweepGrid(
        axes=(Axis("temperature", "K", temperatures),
              Axis("omega", "omega_b", omegas / params.omega_b)),
        S=S,
        stable=ok,
        phi_opt_over_pi=phi_opt,
        fixed=_fixed_snapshot(params, base_model),
        provenance=_provenance(params, kind="temperature",
                               global_phi=global_phi),
    )


def _best_squeezing(params: PhysicalParams, omega_range, n_omega,
                    g_eff: Optional[complex] = None) -> dict:
    """Deepest phase-optimized squeezing over the fine frequency window."""
    model = model_from_params(params, g_eff=g_eff)
    omegas = _omega_grid(params.omega_b, omega_range, n_omega)
    phi, smin = _phase_optimized_curve(model, omegas)
    i = int(np.argmin(smin))
    return {
        "min_S": float(smin[i]),
        "db": float(nsd_db(smin[i])),
        "omega_over_omega_b": float(omegas[i] / params.omega_b),
        "phi_over_pi": float(phi[i] / math.pi),
    }


def _power_chain_params(params: PhysicalParams, power: float,
                        self_consistent: bool,
                        delta_m_bare: Optional[float]) -> PhysicalParams:
    """Parameters at drive power P under the chosen detuning convention."""
    if self_consistent:
        return params.with_(drive_power=power, drive_field=None,
                            delta_m_tilde=None, delta_m=delta_m_bare)
    return params.with_(drive_power=power, drive_field=None)


def power_threshold(params: PhysicalParams,
                    p_bracket: tuple[float, float],
                    rel_tol: float = 1e-3,
                    self_consistent: bool = False,
                    omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                    n_omega: int = 601) -> ThresholdResult:
    """Maximum drive power (W) allowed by stability, by bisection.

    The chain P -> B -> Omega -> <m> -> G is re-solved at every probe.  By
    default the effective magnon detuning stays at its configured value (the
    free-parameter practice); with ``self_consistent`` the bare detuning is
    anchored at the base operating point and the magnetostrictive shift is
    re-solved at each power.  Reports the deepest squeezing at 0.99 times the
    threshold.
    """
    if params.delta_m_tilde is None:
        raise ValueError("power_threshold expects params in effective-"
                         "detuning form")
    delta_m_bare = None
    if self_consistent:
        # The bare detuning is anchored at the configured drive (falling back
        # to the lower bracket edge) so the base operating point is identical
        # in both conventions.
        if params.drive_power is not None or params.drive_field is not None:
            base_op = operating_point(params)
        else:
            base_op = operating_point(params.with_(drive_power=p_bracket[0]))
        assert base_op.steady is not None
        delta_m_bare = effective_to_bare(params, base_op.steady.m_avg)

    def is_stable(power: float) -> bool:
        p = _power_chain_params(params, power, self_consistent, delta_m_bare)
        return stability(model_from_params(p)).stable

    lo, hi = p_bracket
    if not (0 <= lo < hi):
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    if not is_stable(lo):
        raise BracketError(f"system already unstable at P = {lo} W")
    if is_stable(hi):
        raise BracketError(f"no instability up to P = {hi} W: bracket does "
                           "not straddle the stability boundary")
    iterations = 0
    while (hi - lo) > rel_tol * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if is_stable(mid):
            lo = mid
        else:
            hi = mid
        iterations += 1
    threshold = 0.5 * (lo + hi)
    best = _best_squeezing(
        _power_chain_params(params, 0.99 * threshold, self_consistent,
                            delta_m_bare),
        omega_range, n_omega)
    return ThresholdResult(
        threshold=threshold, unit="W", bracket=(lo, hi),
        iterations=iterations,
        at_threshold={**best, "probe_power_w": 0.99 * threshold,
                      "self_consistent_detuning": self_consistent},
    )


def effective_to_bare(params: PhysicalParams, m_avg: complex) -> float:
    """Bare magnon detuning implied by the configured effective one."""
    assert params.delta_m_tilde is not None
    return params.delta_m_tilde + params.G0 ** 2 * abs(m_avg) ** 2 / params.omega_b


def temperature_ceiling(params: PhysicalParams,
                        t_bracket: tuple[float, float],
                        resolution: float = 1e-3,
                        omega_range: tuple[float, float] = DEFAULT_OMEGA_RANGE,
                        n_omega: int = 601,
                        g_eff: Optional[complex] = None) -> ThresholdResult:
    """Temperature (K) above which no phase squeezes below vacuum.

    Bisects the predicate min_{w, phi} S_W < 1/2 down to ``resolution``
    kelvin.  The bracket must straddle the disappearance of squeezing.
    """

    def squeezed(T: float) -> bool:
        p = params.with_(temperature=float(T))
        model = model_from_params(p, g_eff=g_eff)
        if not stability(model).stable:
            return False
        omegas = _omega_grid(params.omega_b, omega_range, n_omega)
        _, smin = _phase_optimized_curve(model, omegas)
        return bool(smin.min() < 0.5)

    lo, hi = t_bracket
    if not (0 <= lo < hi):
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    if not squeezed(lo):
        raise BracketError(f"no squeezing at T = {lo} K: bracket must start "
                           "inside the squeezing region")
    if squeezed(hi):
        raise BracketError(f"squeezing persists at T = {hi} K: bracket does "
                           "not straddle the ceiling")
    iterations = 0
    while (hi - lo) > resolution:
        mid = 0.5 * (lo + hi)
        if squeezed(mid):
            lo = mid
        else:
            hi = mid
        iterations += 1
    ceiling = 0.5 * (lo + hi)
    best = _best_squeezing(params.with_(temperature=lo), omega_range, n_omega,
                           g_eff=g_eff)
    return ThresholdResult(
        threshold=ceiling, unit="K", bracket=(lo, hi), iterations=iterations,
        at_threshold={**best, "probe_temperature_k": lo},
    )
