"""Temperature-tuned mode ladders with avoided crossings.

All frequencies here are ordinary frequencies in Hz (the crossing
coupling ``kappa`` too, so the minimum splitting is ``2*kappa`` Hz).
Temperatures enter and leave the public functions in degrees Celsius;
thermal slopes are in Hz/K, which only ever multiply temperature
differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .core import Polarization
from .errors import DegenerateSlopes, DegenerateTarget, DomainError, NoRootInBracket

ZERO_CELSIUS = 273.15
_SLOPE_RTOL = 1e-9


def celsius_to_kelvin(t_c):
    return np.asarray(t_c, dtype=float) + ZERO_CELSIUS


@dataclass(frozen=True)
class BareMode:
    """Uncoupled mode tuning linearly with temperature."""

    nu_ref: float
    slope: float
    polarization: Polarization = Polarization.TE
    T_ref: float = 25.0  # degC

    def __post_init__(self):
        if not np.isfinite(self.slope) or not np.isfinite(self.nu_ref):
            raise DomainError("nu_ref and slope must be finite")
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    def frequency(self, T):
        dT = celsius_to_kelvin(T) - celsius_to_kelvin(self.T_ref)
        return self.nu_ref + self.slope * dT


@dataclass(frozen=True)
class CrossingModel:
    """Two bare modes linearly coupled with rate ``kappa`` [Hz]."""

    mode_a: BareMode
    mode_b: BareMode
    kappa: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")

    def detuning(self, T):
        """Bare difference nu_a - nu_b [Hz]."""
        return self.mode_a.frequency(T) - self.mode_b.frequency(T)

    def crossing_temperature(self) -> float:
        """Temperature [degC] at which the bare modes are degenerate."""
        ds = self.mode_a.slope - self.mode_b.slope
        if np.isclose(ds, 0.0, rtol=0.0, atol=_SLOPE_RTOL * max(abs(self.mode_a.slope), abs(self.mode_b.slope), 1.0)):
            raise DegenerateSlopes("bare modes tune at the same rate and never cross")
        return float(self.mode_a.T_ref - self.detuning(self.mode_a.T_ref) / ds)


def hybridized_frequencies(model: CrossingModel, T):
    """Upper and lower eigenfrequencies [Hz] of the coupled pair at T [degC]."""
    nu_a, nu_b = model.mode_a.frequency(T), model.mode_b.frequency(T)
    mean = 0.5 * (nu_a + nu_b)
    half = np.sqrt(model.kappa**2 + 0.25 * (nu_a - nu_b) ** 2)
    return mean + half, mean - half


def tracked_branch(model: CrossingModel, T, which: Union[str, Polarization] = "TE"):
    """Eigen-branch that coincides with the selected bare mode on the cold side.

    ``which`` names a polarization ('TE'/'TM') or 'a'/'b'. The branch is
    continuous in T: on the warm side of the crossing it continues into
    the partner mode's asymptote.
    """
    if which in ("a", "b"):
        target = model.mode_a if which == "a" else model.mode_b
    else:
        pol = Polarization(which)
        matches = [m for m in (model.mode_a, model.mode_b) if m.polarization == pol]
        if len(matches) != 1:
            raise DomainError(f"crossing model has {len(matches)} modes with polarization {pol.value}")
        target = matches[0]
    other = model.mode_b if target is model.mode_a else model.mode_a
    ds = target.slope - other.slope
    scale = max(abs(target.slope), abs(other.slope), 1.0)
    if abs(ds) <= _SLOPE_RTOL * scale:
        raise DegenerateSlopes("equal bare slopes: branch labelling undefined")
    upper, lower = hybridized_frequencies(model, T)
    # cold side (T -> -inf): target above partner iff ds < 0
    return upper if ds < 0 else lower


ModelLike = Union[BareMode, CrossingModel]


@dataclass(frozen=True)
class ModeLadder:
    """Consecutive azimuthal modes of one family, each bare or crossing.

    ``entries`` is a sequence of (m, model); crossing entries are followed
    along the branch of the ladder's own polarization.
    """

    entries: tuple
    polarization: Polarization = Polarization.TE

    def __post_init__(self):
        entries = tuple(sorted(((int(m), model) for m, model in self.entries), key=lambda e: e[0]))
        ms = [m for m, _ in entries]
        if len(ms) < 3:
            raise DomainError("a ladder needs at least three consecutive modes")
        if any(b - a != 1 for a, b in zip(ms, ms[1:])):
            raise DomainError(f"azimuthal numbers must be consecutive, got {ms}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "polarization", Polarization(self.polarization))

    @property
    def m_values(self):
        return [m for m, _ in self.entries]

    def frequency(self, m: int, T):
        for mm, model in self.entries:
            if mm == m:
                if isinstance(model, CrossingModel):
                    return tracked_branch(model, T, self.polarization)
                return model.frequency(T)
        raise DomainError(f"mode m={m} is not in the ladder")


def fsr_pair(ladder: ModeLadder, T, m: int = None):
    """(FSR+, FSR-) [Hz] around mode ``m`` (default: the central entry)."""
    if m is None:
        ms = ladder.m_values
        m = ms[len(ms) // 2]
    nu = ladder.frequency(m, T)
    return ladder.frequency(m + 1, T) - nu, nu - ladder.frequency(m - 1, T)


def fsr_asymmetry(ladder: ModeLadder, T, m: int = None):
    plus, minus = fsr_pair(ladder, T, m)
    return plus - minus


class OperatingTemperature(NamedTuple):
    temperature: float
    roots: tuple


def find_operating_temperature(
    ladder: ModeLadder,
    target_asymmetry: float,
    bracket: Sequence[float],
    m: int = None,
    scan_points: int = 4001,
    xtol: float = 1e-9,
) -> OperatingTemperature:
    """Temperature [degC] where FSR+ - FSR- equals ``target_asymmetry`` [Hz].

    The bracket is scanned for sign changes, each is refined with Brent's
    method to ``xtol`` kelvin (well below 0.1 mK). Returns the lowest root
    and the full list.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not hi > lo:
        raise DomainError("bracket must satisfy T_lo < T_hi")

    def f(t):
        return fsr_asymmetry(ladder, t, m) - target_asymmetry

    ts = np.linspace(lo, hi, scan_points)
    vals = np.asarray(f(ts), dtype=float)
    if np.all(np.abs(vals) <= 1e-6 * max(abs(target_asymmetry), 1.0)):
        raise DegenerateTarget("target asymmetry holds across the whole bracket")
    roots = []
    for i in range(len(ts) - 1):
        v0, v1 = vals[i], vals[i + 1]
        if v0 == 0.0:
            roots.append(float(ts[i]))
        elif v0 * v1 < 0:
            roots.append(float(brentq(f, ts[i], ts[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    if vals[-1] == 0.0:
        roots.append(float(ts[-1]))
    if not roots:
        raise NoRootInBracket(
            f"FSR asymmetry never reaches {target_asymmetry:.6g} Hz in [{lo}, {hi}] degC"
        )
    return OperatingTemperature(roots[0], tuple(roots))
