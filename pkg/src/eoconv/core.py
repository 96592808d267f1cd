"""Domain types, unit helpers and detuning denominators.

Unit convention: every attribute holding a frequency or a rate is an
*angular* quantity in rad/s unless its name ends in ``_hz``. Rates are
amplitude decay rates (half-widths), so a mode with external rate
``gamma`` and intrinsic rate ``gamma_prime`` has a loaded FWHM of
``2 * (gamma + gamma_prime) / (2 pi)`` Hz.

The detuning denominators are returned as plain Python ``complex``
values (real part: total rate, imaginary part: minus the detuning).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from scipy import constants

from .errors import DomainError, PhaseMatchingError

HBAR = constants.hbar
EPS0 = constants.epsilon_0
TWO_PI = 2.0 * math.pi

_CRITICAL_RTOL = 1e-9


def hz_to_rad(f_hz):
    """Ordinary frequency [Hz] -> angular frequency [rad/s]."""
    return TWO_PI * f_hz


def rad_to_hz(omega):
    """Angular frequency [rad/s] -> ordinary frequency [Hz]."""
    return omega / TWO_PI


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class OpticalMode:
    """One whispering gallery resonance.

    omega0, gamma and gamma_prime are in rad/s; ``m`` is the azimuthal
    number and ``n`` the refractive index at ``omega0``.
    """

    omega0: float
    gamma: float
    gamma_prime: float
    m: int
    n: float = 2.14
    polarization: Polarization = Polarization.TE

    def __post_init__(self):
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be positive, got {self.omega0}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")
        if not self.gamma_prime > 0:
            raise DomainError(f"gamma_prime must be > 0, got {self.gamma_prime}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"azimuthal number must be an integer >= 1, got {self.m}")
        if not self.n > 1:
            raise DomainError(f"refractive index must exceed 1, got {self.n}")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    @property
    def total_rate(self) -> float:
        """gamma + gamma_prime [rad/s]."""
        return self.gamma + self.gamma_prime

    @property
    def frequency_hz(self) -> float:
        return rad_to_hz(self.omega0)

    @property
    def fwhm_hz(self) -> float:
        """Loaded full width at half maximum [Hz]."""
        return 2.0 * self.total_rate / TWO_PI

    @property
    def loaded_q(self) -> float:
        return self.omega0 / (2.0 * self.total_rate)

    @property
    def critically_coupled(self) -> bool:
        return math.isclose(self.gamma, self.gamma_prime, rel_tol=_CRITICAL_RTOL)

    @classmethod
    def from_hz(cls, frequency_hz, gamma_hz, gamma_prime_hz, m, **kwargs):
        """Build from ordinary frequency and rates given as rate / 2pi [Hz]."""
        return cls(hz_to_rad(frequency_hz), hz_to_rad(gamma_hz), hz_to_rad(gamma_prime_hz), m, **kwargs)


@dataclass(frozen=True)
class MicrowaveMode:
    """Microwave cavity resonance (angular quantities in rad/s).

    ``E_single_photon`` [V/m] and ``V_mw`` [m^3] are mutually exclusive;
    both may be absent when the mode is only used spectrally.
    """

    Omega0: float
    gamma_mw: float
    gamma_mw_prime: float
    m_mw: int = 1
    n_mw: float = math.sqrt(28.0)
    E_single_photon: Optional[float] = None
    V_mw: Optional[float] = None

    def __post_init__(self):
        if not self.Omega0 > 0:
            raise DomainError(f"Omega0 must be positive, got {self.Omega0}")
        if not self.gamma_mw >= 0:
            raise DomainError(f"gamma_mw must be >= 0, got {self.gamma_mw}")
        if not self.gamma_mw_prime > 0:
            raise DomainError(f"gamma_mw_prime must be > 0, got {self.gamma_mw_prime}")
        if int(self.m_mw) != self.m_mw:
            raise DomainError(f"m_mw must be an integer, got {self.m_mw}")
        if self.E_single_photon is not None and self.V_mw is not None:
            raise DomainError("set at most one of E_single_photon and V_mw")
        if self.V_mw is not None and not self.V_mw > 0:
            raise DomainError("V_mw must be positive")
        if self.E_single_photon is not None and not self.E_single_photon >= 0:
            raise DomainError("E_single_photon must be non-negative")

    @property
    def total_rate(self) -> float:
        return self.gamma_mw + self.gamma_mw_prime

    @property
    def frequency_hz(self) -> float:
        return rad_to_hz(self.Omega0)

    @property
    def fwhm_hz(self) -> float:
        return 2.0 * self.total_rate / TWO_PI

    @property
    def loaded_q(self) -> float:
        return self.Omega0 / (2.0 * self.total_rate)

    @property
    def undercoupled(self) -> bool:
        return self.gamma_mw < self.gamma_mw_prime

    @classmethod
    def from_hz(cls, frequency_hz, gamma_hz, gamma_prime_hz, **kwargs):
        return cls(hz_to_rad(frequency_hz), hz_to_rad(gamma_hz), hz_to_rad(gamma_prime_hz), **kwargs)


@dataclass(frozen=True)
class ConverterSystem:
    """Pump, two sideband modes and the microwave mode with their drives.

    ``g`` is the single-photon coupling rate [rad/s]; ``P_pump`` the
    optical power reaching the coupler [W] of which the fraction
    ``mode_matching`` couples to the resonator mode; ``P_mw`` the
    microwave power at the pin coupler [W]. Drive frequencies default to
    the respective resonances.
    """

    pump: OpticalMode
    sb_plus: OpticalMode
    sb_minus: OpticalMode
    mw: MicrowaveMode
    g: float
    P_pump: float
    P_mw: float
    omega_drive: Optional[float] = None
    Omega_drive: Optional[float] = None
    mode_matching: float = 1.0

    def __post_init__(self):
        if self.omega_drive is None:
            object.__setattr__(self, "omega_drive", self.pump.omega0)
        if self.Omega_drive is None:
            object.__setattr__(self, "Omega_drive", self.mw.Omega0)
        m_plus, m_minus = self.pump.m + self.mw.m_mw, self.pump.m - self.mw.m_mw
        if self.sb_plus.m != m_plus or self.sb_minus.m != m_minus:
            raise PhaseMatchingError(
                f"sideband azimuthal numbers ({self.sb_plus.m}, {self.sb_minus.m}) "
                f"do not match pump {self.pump.m} +/- m_mw {self.mw.m_mw}"
            )
        if not self.g >= 0:
            raise DomainError(f"g must be >= 0, got {self.g}")
        if not self.P_pump >= 0 or not self.P_mw >= 0:
            raise DomainError("drive powers must be non-negative")
        if not 0.0 <= self.mode_matching <= 1.0:
            raise DomainError(f"mode_matching must lie in [0, 1], got {self.mode_matching}")

    @property
    def P_pump_coupled(self) -> float:
        """Pump power that overlaps the resonator mode [W]."""
        return self.mode_matching * self.P_pump

    def sideband(self, sign: int) -> OpticalMode:
        return self.sb_plus if _sign(sign) > 0 else self.sb_minus


def _sign(sign) -> int:
    if sign in (+1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise DomainError(f"sideband sign must be + or -, got {sign!r}")


def denominator(detuning, total_rate) -> complex:
    """Gamma = -i * detuning + total_rate."""
    return complex(total_rate, -detuning)


def gamma_p(sys: ConverterSystem) -> complex:
    """Pump denominator -i(omega - omega_p) + gamma + gamma' [rad/s]."""
    return denominator(sys.omega_drive - sys.pump.omega0, sys.pump.total_rate)


def gamma_sb(sys: ConverterSystem, sign) -> complex:
    """Sideband denominator -i(omega +/- Omega - omega_sb) + gamma + gamma'.

    Uses the sideband mode's own rates, which equal the pump rates in the
    usual same-family configuration.
    """
    s = _sign(sign)
    mode = sys.sideband(s)
    return denominator(sys.omega_drive + s * sys.Omega_drive - mode.omega0, mode.total_rate)


def gamma_mw_total(sys: ConverterSystem) -> complex:
    """Microwave denominator -i(Omega - Omega_0) + gamma_mw + gamma_mw'."""
    return denominator(sys.Omega_drive - sys.mw.Omega0, sys.mw.total_rate)
