"""Physical parameters of the three-mode magnomechanical system.

Covers unit conversions and every derived quantity of the operating point:
spin count of the YIG sphere, drive field and Rabi frequency, classical
steady-state amplitudes of magnon/cavity/phonon modes, the linearized
magnomechanical coupling G = G0 <m>, the magnetostriction-shifted magnon
detuning, thermal occupations, and the validity diagnostics (magnon Kerr
ratio, low-excitation ratio, cooperativity).

Everything here is a pure function of immutable inputs; all frequencies and
rates are angular (rad/s) unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constants import CONSTANTS, PhysicalConstants
from .errors import DegenerateParametersError

__all__ = [
    "PhysicalParams",
    "SteadyState",
    "ThermalOccupations",
    "OperatingPoint",
    "spin_count",
    "magnon_frequency",
    "field_from_power",
    "rabi_frequency",
    "thermal_occupation",
    "thermal_occupations",
    "steady_state",
    "linearized_coupling",
    "effective_detuning",
    "kerr_validity",
    "low_excitation_check",
    "cooperativity",
    "operating_point",
]

# Drive-field calibration anchor: 100 mW through the loop antenna produces
# B = 1.3e-4 T on the sphere.  Amplitude scales as sqrt(power).
POWER_ANCHOR_W = 0.100
FIELD_ANCHOR_T = 1.3e-4

# Fixed point iteration for the detuning <-> |<m>|^2 loop (bare-detuning mode).
_SELF_CONSISTENT_TOL = 1e-12
_SELF_CONSISTENT_MAX_ITER = 100


@dataclass(frozen=True)
class PhysicalParams:
    """Raw inputs describing one configuration of the system.

    The magnon detuning is specified in exactly one of three ways:
    ``delta_m_tilde`` (effective detuning, the free-parameter workflow),
    ``delta_m`` (bare detuning; the magnetostrictive shift is then solved
    self-consistently), or ``bias_field`` (H0 - Hd in tesla, converted to a
    bare detuning via the gyromagnetic ratio).

    The drive is given as at most one of ``drive_power`` (W) or
    ``drive_field`` (T); it may be omitted when the linearized coupling G is
    supplied directly to the model builder.
    """

    omega_a: float                  # rad/s, cavity resonance
    omega_b: float                  # rad/s, phonon frequency
    kappa_a: float                  # rad/s, total cavity linewidth
    kappa_1: float                  # rad/s, readout-port coupling
    kappa_2: float                  # rad/s, remaining cavity loss
    kappa_m: float                  # rad/s, magnon linewidth
    gamma: float                    # rad/s, mechanical damping
    g: float                        # rad/s, cavity-magnon coupling
    G0: float                       # rad/s, bare magnomechanical coupling
    delta_a: float                  # rad/s, cavity-drive detuning
    temperature: float              # K
    sphere_radius: float = 125e-6   # m
    kerr_K: float = 2 * math.pi * 6.4e-9   # rad/s, magnon Kerr coefficient
    delta_m_tilde: Optional[float] = None  # rad/s, effective magnon detuning
    delta_m: Optional[float] = None        # rad/s, bare magnon detuning
    bias_field: Optional[float] = None     # T, H0 - Hd
    drive_power: Optional[float] = None    # W
    drive_field: Optional[float] = None    # T
    constants: PhysicalConstants = CONSTANTS

    def __post_init__(self) -> None:
        rates = {
            "kappa_a": self.kappa_a, "kappa_1": self.kappa_1,
            "kappa_2": self.kappa_2, "kappa_m": self.kappa_m,
            "gamma": self.gamma, "g": self.g, "G0": self.G0,
        }
        for name, value in rates.items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be a finite rate >= 0, got {value}")
        if abs(self.kappa_1 + self.kappa_2 - self.kappa_a) > 1e-9 * max(self.kappa_a, 1.0):
            raise ValueError(
                f"kappa_1 + kappa_2 must equal kappa_a "
                f"({self.kappa_1 + self.kappa_2} != {self.kappa_a})")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.omega_b <= 0 or self.omega_a <= 0:
            raise ValueError("mode frequencies must be positive")
        if self.gamma > 0 and self.omega_b / self.gamma < 1:
            raise ValueError("mechanical quality factor omega_b/gamma must be >= 1")
        detuning_modes = sum(x is not None for x in
                             (self.delta_m_tilde, self.delta_m, self.bias_field))
        if detuning_modes != 1:
            raise ValueError("specify exactly one of delta_m_tilde, delta_m, "
                             "bias_field")
        if self.drive_power is not None and self.drive_field is not None:
            raise ValueError("specify at most one of drive_power, drive_field")
        for name in ("drive_power", "drive_field", "sphere_radius"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def omega_d(self) -> float:
        """Drive frequency, rad/s (from Delta_a = omega_a - omega_d)."""
        return self.omega_a - self.delta_a

    def with_(self, **changes) -> "PhysicalParams":
        """Copy with selected fields replaced (keeps immutability)."""
        return replace(self, **changes)


@dataclass(frozen=True)
class SteadyState:
    """Classical steady-state amplitudes under a coherent magnon drive."""

    m_avg: complex      # magnon amplitude <m>
    a_avg: complex      # cavity amplitude <a>
    q_avg: float        # phonon displacement <q>
    Omega: float        # rad/s, Rabi frequency of the drive
    G_eff: complex      # rad/s, linearized coupling G0 <m>


@dataclass(frozen=True)
class ThermalOccupations:
    """Mean bath occupations of the three modes at temperature T."""

    n_a: float
    n_m: float
    n_b: float

    def __post_init__(self) -> None:
        if min(self.n_a, self.n_m, self.n_b) < 0:
            raise ValueError("occupations must be >= 0")


@dataclass(frozen=True)
class OperatingPoint:
    """Derived quantities of one configuration, ready for linearization."""

    params: PhysicalParams
    delta_m_tilde: float        # rad/s, effective magnon detuning in use
    G: complex                  # rad/s, linearized magnomechanical coupling
    steady: Optional[SteadyState]   # None when G was supplied directly
    occupations: ThermalOccupations
    n_spins: float
    drive_field: Optional[float]    # T
    kerr_ratio: float           # K |<m>|^3 / Omega
    excitation_ratio: float     # |<m>|^2 / (2 N s)
    cooperativity: float        # |G|^2 / (kappa_m gamma)


def spin_count(radius: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Number of spins N = 4 pi rho R^3 / 3 in a YIG sphere of radius R (m)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return 4 * math.pi * constants.spin_density * radius ** 3 / 3


def magnon_frequency(field_difference: float,
                     constants: PhysicalConstants = CONSTANTS) -> float:
    """Kittel-mode frequency omega_m = gamma0 (H0 - Hd), input in tesla."""
    if field_difference < 0:
        raise ValueError("H0 - Hd must be >= 0")
    return constants.gamma0 * field_difference


def field_from_power(power: float,
                     power_anchor: float = POWER_ANCHOR_W,
                     field_anchor: float = FIELD_ANCHOR_T) -> float:
    """Drive field amplitude B (T) at power P (W), B proportional sqrt(P).

    The proportionality constant is pinned by the calibration anchor
    (100 mW -> 1.3e-4 T); antenna geometry is not modeled.
    """
    if power < 0:
        raise ValueError("power must be >= 0")
    return field_anchor * math.sqrt(power / power_anchor)


def rabi_frequency(field: float, n_spins: float,
                   constants: PhysicalConstants = CONSTANTS) -> float:
    """Magnon drive Rabi frequency Omega = (sqrt(5)/4) gamma0 sqrt(N) B."""
    if field < 0 or n_spins < 0:
        raise ValueError("field and spin count must be >= 0")
    return math.sqrt(5) / 4 * constants.gamma0 * math.sqrt(n_spins) * field


def thermal_occupation(omega: float, temperature: float,
                       constants: PhysicalConstants = CONSTANTS) -> float:
    """Bose-Einstein occupation n = 1/(exp(hbar w / kB T) - 1); 0 at T = 0."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = constants.hbar * omega / (constants.kB * temperature)
    return 1.0 / math.expm1(x)


def thermal_occupations(params: PhysicalParams,
                        delta_m_tilde: Optional[float] = None) -> ThermalOccupations:
    """Occupations of the three baths at the mode frequencies.

    The magnon frequency is reconstructed as omega_d + detuning; for a
    microwave-range magnon the distinction between bare and effective
    detuning shifts n_m at the 1e-5 relative level and is irrelevant.
    """
    if delta_m_tilde is None:
        delta_m_tilde = params.delta_m_tilde
        if delta_m_tilde is None:
            delta_m_tilde = _bare_delta_m(params)
    omega_m = params.omega_d + delta_m_tilde
    T = params.temperature
    return ThermalOccupations(
        n_a=thermal_occupation(params.omega_a, T, params.constants),
        n_m=thermal_occupation(omega_m, T, params.constants),
        n_b=thermal_occupation(params.omega_b, T, params.constants),
    )


def steady_state(Omega: float, delta_m_tilde: float, delta_a: float,
                 kappa_m: float, kappa_a: float, g: float,
                 G0: float, omega_b: float) -> SteadyState:
    """Classical amplitudes of the driven three-mode system.

    <m> = Omega (kappa_a/2 + i Delta_a) /
          [(kappa_m/2 + i Delta_m~)(kappa_a/2 + i Delta_a) + g^2],
    <a> = -i g <m> / (kappa_a/2 + i Delta_a),
    <q> = -G0 |<m>|^2 / omega_b.
    """
    chi_a_inv = kappa_a / 2 + 1j * delta_a
    denom = (kappa_m / 2 + 1j * delta_m_tilde) * chi_a_inv + g ** 2
    scale = max(abs(chi_a_inv) * (kappa_m / 2 + abs(delta_m_tilde)), g ** 2,
                omega_b ** 2 * 1e-30)
    if abs(denom) <= 1e-14 * scale:
        raise DegenerateParametersError(
            "steady-state denominator (kappa_m/2 + i Dm~)(kappa_a/2 + i Da) + g^2 "
            "is singular for these parameters")
    m_avg = Omega * chi_a_inv / denom
    a_avg = -1j * g * m_avg / chi_a_inv
    q_avg = -G0 * abs(m_avg) ** 2 / omega_b
    return SteadyState(m_avg=m_avg, a_avg=a_avg, q_avg=q_avg, Omega=Omega,
                       G_eff=linearized_coupling(G0, m_avg))


def linearized_coupling(G0: float, m_avg: complex) -> complex:
    """Drive-enhanced magnomechanical coupling G = G0 <m>.

    Convention: no extra sqrt(2); with G0/2pi = 0.1 Hz and |<m>| = 1.9e7
    this reproduces |G| = 0.19 omega_b for omega_b/2pi = 10 MHz.  Output
    spectra are independent of arg(G), so no phase convention is imposed.
    """
    return G0 * m_avg


def effective_detuning(delta_m: float, G0: float, m_avg: complex,
                       omega_b: float) -> float:
    """Magnon detuning including the magnetostrictive frequency pull.

    Delta_m~ = Delta_m + G0 <q> = Delta_m - G0^2 |<m>|^2 / omega_b.
    """
    if omega_b <= 0:
        raise ValueError("omega_b must be positive")
    return delta_m - G0 ** 2 * abs(m_avg) ** 2 / omega_b


def kerr_validity(K: float, m_avg: complex, Omega: float) -> float:
    """Kerr-nonlinearity ratio K |<m>|^3 / Omega; < 1 keeps the model linear."""
    if Omega <= 0:
        raise ValueError("Omega must be positive")
    return K * abs(m_avg) ** 3 / Omega


def low_excitation_check(m_avg: complex, n_spins: float, spin_s: float) -> float:
    """Holstein-Primakoff validity ratio |<m>|^2 / (2 N s)."""
    if n_spins <= 0:
        raise ValueError("n_spins must be positive")
    return abs(m_avg) ** 2 / (2 * n_spins * spin_s)


def cooperativity(G: complex, kappa_m: float, gamma: float) -> float:
    """Magnomechanical cooperativity C = |G|^2 / (kappa_m gamma)."""
    if kappa_m <= 0 or gamma <= 0:
        raise ValueError("kappa_m and gamma must be positive")
    return abs(G) ** 2 / (kappa_m * gamma)


def _bare_delta_m(params: PhysicalParams) -> float:
    if params.delta_m is not None:
        return params.delta_m
    if params.bias_field is not None:
        omega_m = magnon_frequency(params.bias_field, params.constants)
        return omega_m - params.omega_d
    raise ValueError("no bare magnon detuning available")


def _drive_field(params: PhysicalParams) -> float:
    if params.drive_field is not None:
        return params.drive_field
    if params.drive_power is not None:
        return field_from_power(params.drive_power)
    raise ValueError("params carry no drive (set drive_power or drive_field, "
                     "or pass G directly)")


def _solve_self_consistent(params: PhysicalParams, Omega: float,
                           delta_m_bare: float) -> tuple[float, SteadyState]:
    """Fixed-point loop Delta_m~ <-> |<m>|^2 for the bare-detuning mode."""
    delta = delta_m_bare
    state = None
    for _ in range(_SELF_CONSISTENT_MAX_ITER):
        state = steady_state(Omega, delta, params.delta_a, params.kappa_m,
                             params.kappa_a, params.g, params.G0, params.omega_b)
        new_delta = effective_detuning(delta_m_bare, params.G0, state.m_avg,
                                       params.omega_b)
        if abs(new_delta - delta) <= _SELF_CONSISTENT_TOL * max(abs(new_delta), 1.0):
            return new_delta, steady_state(Omega, new_delta, params.delta_a,
                                           params.kappa_m, params.kappa_a,
                                           params.g, params.G0, params.omega_b)
        delta = new_delta
    raise DegenerateParametersError(
        "self-consistent detuning loop did not converge in "
        f"{_SELF_CONSISTENT_MAX_ITER} iterations")


def _invert_rabi(params: PhysicalParams, delta_m_tilde: float,
                 m_mag: float) -> float:
    """Rabi frequency that would produce magnon amplitude |<m>| = m_mag."""
    chi_a_inv = params.kappa_a / 2 + 1j * params.delta_a
    denom = (params.kappa_m / 2 + 1j * delta_m_tilde) * chi_a_inv + params.g ** 2
    return m_mag * abs(denom) / abs(chi_a_inv)


def operating_point(params: PhysicalParams,
                    g_eff: Optional[complex] = None) -> OperatingPoint:
    """Resolve the full operating point of a configuration.

    With a power or field drive this runs the chain
    P -> B -> Omega -> <m> -> G and (in bare-detuning mode) the
    self-consistent detuning loop.  With ``g_eff`` given, the coupling is
    taken as-is and the magnon amplitude implied by ``|G|/G0`` is used for
    the validity diagnostics.

    Raises if the implied excitation ratio |<m>|^2/(2Ns) reaches 1, where
    the low-lying-excitation bosonization has broken down entirely.
    """
    N = spin_count(params.sphere_radius, params.constants)

    if g_eff is not None:
        if params.delta_m_tilde is None:
            raise ValueError("direct G requires delta_m_tilde (the shifted "
                             "detuning cannot be solved without a drive)")
        delta = params.delta_m_tilde
        G = complex(g_eff)
        steady = None
        m_mag = abs(G) / params.G0 if params.G0 > 0 else 0.0
        Omega = _invert_rabi(params, delta, m_mag)
    else:
        field = _drive_field(params)
        Omega = rabi_frequency(field, N, params.constants)
        if params.delta_m_tilde is not None:
            delta = params.delta_m_tilde
            steady = steady_state(Omega, delta, params.delta_a, params.kappa_m,
                                  params.kappa_a, params.g, params.G0,
                                  params.omega_b)
        else:
            delta, steady = _solve_self_consistent(params, Omega,
                                                   _bare_delta_m(params))
        G = steady.G_eff
        m_mag = abs(steady.m_avg)

    excitation = (m_mag ** 2 / (2 * N * params.constants.spin_s)) if N > 0 else 0.0
    if excitation >= 1.0:
        raise DegenerateParametersError(
            f"|<m>|^2 = {m_mag**2:.3g} exceeds 2Ns = "
            f"{2 * N * params.constants.spin_s:.3g}: low-excitation regime lost")
    kerr = kerr_validity(params.kerr_K, m_mag, Omega) if Omega > 0 else 0.0
    coop = (cooperativity(G, params.kappa_m, params.gamma)
            if params.kappa_m > 0 and params.gamma > 0 else math.inf)

    return OperatingPoint(
        params=params,
        delta_m_tilde=delta,
        G=G,
        steady=steady,
        occupations=thermal_occupations(params, delta),
        n_spins=N,
        drive_field=None if g_eff is not None else field,
        kerr_ratio=kerr,
        excitation_ratio=excitation,
        cooperativity=coop,
    )
