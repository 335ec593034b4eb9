"""Physical constants and YIG material properties.

SI units throughout: energies in J, frequencies in rad/s, fields in tesla.
Angular frequencies are written omega (rad/s); "Hz values" in comments always
mean omega/2pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_GAMMA0_HZ_PER_T = 28e9  # YIG gyromagnetic ratio, gamma0/2pi in Hz/T


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants plus YIG material data used by the model."""

    hbar: float = 1.054571817e-34       # J s (CODATA 2018)
    kB: float = 1.380649e-23            # J/K (exact, SI 2019)
    gamma0: float = 2 * math.pi * _GAMMA0_HZ_PER_T  # rad s^-1 T^-1
    spin_density: float = 4.22e27       # m^-3, YIG net spin density
    spin_s: float = 2.5                 # ground-state Fe3+ spin

    def __post_init__(self) -> None:
        for name in ("hbar", "kB", "gamma0", "spin_density", "spin_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be strictly positive")
        rel = abs(self.gamma0 / (2 * math.pi) - _GAMMA0_HZ_PER_T) / _GAMMA0_HZ_PER_T
        if rel > 1e-12:
            raise ValueError("gamma0/2pi must equal 28 GHz/T (got relative "
                             f"deviation {rel:.3g})")


CONSTANTS = PhysicalConstants()
