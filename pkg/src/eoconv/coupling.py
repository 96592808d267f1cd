"""Electro-optic single-photon coupling rate and phase matching.

Field profiles live on a cylindrical (r, z) cross-section grid with an
``exp(i m phi)`` azimuthal factor; the azimuthal integral is done
analytically, so only the cross-section is sampled. Quadrature is the
midpoint rule: sample coordinates are cell centres of a uniform grid and
each cell contributes ``2*pi * r * dr * dz`` to a volume integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .core import EPS0, HBAR
from .errors import DomainError, GridMismatch, PhaseMatchingError, TraceParseError, ZeroNormVolume

R33_LITHIUM_NIOBATE = 31e-12  # m/V


@dataclass(frozen=True)
class MaterialEO:
    r33: float = R33_LITHIUM_NIOBATE
    n_opt: float = 2.14
    eps_r_mw: float = 28.0
    n_mw: Optional[float] = None  # defaults to sqrt(eps_r_mw)

    def __post_init__(self):
        if not self.r33 > 0:
            raise DomainError("r33 must be positive")
        if not self.eps_r_mw >= 1:
            raise DomainError("eps_r_mw must be >= 1")
        if self.n_mw is None:
            object.__setattr__(self, "n_mw", math.sqrt(self.eps_r_mw))


@dataclass(frozen=True)
class Grid:
    """Midpoint grid: cell centres ``r`` and ``z`` [m] with uniform spacing."""

    r: np.ndarray
    z: np.ndarray

    @classmethod
    def regular(cls, r_lo, r_hi, nr, z_lo, z_hi, nz):
        dr = (r_hi - r_lo) / nr
        dz = (z_hi - z_lo) / nz
        r = r_lo + dr * (np.arange(nr) + 0.5)
        z = z_lo + dz * (np.arange(nz) + 0.5)
        return cls(r, z)

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0]) if len(self.r) > 1 else 1.0

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0]) if len(self.z) > 1 else 1.0

    def weights(self) -> np.ndarray:
        """Volume per cell, 2 pi r dr dz, shape (nr, nz)."""
        return (2.0 * math.pi * self.r * self.dr)[:, None] * self.dz * np.ones((1, len(self.z)))

    def same_as(self, other: "Grid") -> bool:
        return (
            self.r.shape == other.r.shape
            and self.z.shape == other.z.shape
            and np.allclose(self.r, other.r, rtol=1e-12, atol=0)
            and np.allclose(self.z, other.z, rtol=1e-12, atol=0)
        )

    def integrate(self, values) -> complex:
        # pairwise summation (numpy) keeps the result order-independent of chunking
        return np.sum(values * self.weights())


@dataclass(frozen=True)
class FieldProfile:
    """Scalar field amplitude on a grid, azimuthal number ``m``.

    ``norm_volume`` [m^3] is the integral of |Psi|^2 over the whole mode.
    When not given it is recomputed from the samples; profiles whose
    support extends beyond the sampled grid (e.g. a microwave field over
    the whole cavity) should pass it explicitly.
    """

    grid: Grid
    values: np.ndarray
    m: int = 0
    norm_volume: Optional[float] = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (len(self.grid.r), len(self.grid.z)):
            raise GridMismatch(f"profile values {vals.shape} do not match grid")
        object.__setattr__(self, "values", vals)
        if self.norm_volume is None:
            object.__setattr__(self, "norm_volume", self.sampled_norm_volume())
        if not self.norm_volume > 0:
            raise ZeroNormVolume(f"profile {self.label!r} has zero normalisation volume")

    def sampled_norm_volume(self) -> float:
        return float(np.real(self.grid.integrate(np.abs(self.values) ** 2)))

    def scaled(self, c: float) -> "FieldProfile":
        return FieldProfile(self.grid, c * self.values, self.m, abs(c) ** 2 * self.norm_volume, self.label)

    @classmethod
    def gaussian(cls, grid, r0, z0, sigma_r, sigma_z, m=0, label=""):
        rr, zz = np.meshgrid(grid.r, grid.z, indexing="ij")
        vals = np.exp(-0.5 * ((rr - r0) / sigma_r) ** 2 - 0.5 * ((zz - z0) / sigma_z) ** 2)
        return cls(grid, vals, m, None, label)

    @classmethod
    def wgm_gaussian(cls, grid, R, m, label="optical"):
        """Fundamental WGM approximated by a Gaussian cross-section.

        Radial width ~ R m^(-2/3), polar width ~ R m^(-1/2) for a rim whose
        curvature radius equals R; peak set back from the rim by R m^(-2/3).
        """
        sigma_r = 0.5 * R * m ** (-2.0 / 3.0)
        sigma_z = R * m ** (-0.5) / math.sqrt(2.0)
        r0 = R * (1.0 - m ** (-2.0 / 3.0))
        return cls.gaussian(grid, r0, 0.0, sigma_r, sigma_z, m, label)

    @classmethod
    def rim_annulus(cls, grid, R, width, thickness, m=1, label="microwave"):
        """Unit field filling the annulus R-width < r < R, |z| < thickness/2.

        The normalisation volume is the analytic annulus volume, so the grid
        only needs to cover the optical mode region.
        """
        rr, zz = np.meshgrid(grid.r, grid.z, indexing="ij")
        inside = (rr > R - width) & (rr <= R) & (np.abs(zz) <= 0.5 * thickness)
        volume = math.pi * (R**2 - (R - width) ** 2) * thickness
        return cls(grid, inside.astype(float), m, volume, label)

    @classmethod
    def from_file(cls, path, m=0, norm_volume=None, label=None):
        """Read a sampled profile: header ``# r z re im``, one sample per line.

        Samples must cover a full regular (r, z) grid in any order.
        """
        path = Path(path)
        rows = []
        header_seen = False
        with path.open() as fh:
            for no, line in enumerate(fh, 1):
                s = line.strip()
                if not s:
                    continue
                if s.startswith("#"):
                    if s.lstrip("#").split() == ["r", "z", "re", "im"]:
                        header_seen = True
                        continue
                    if not header_seen:
                        raise TraceParseError(path, no, "expected header '# r z re im'")
                    continue
                if not header_seen:
                    raise TraceParseError(path, no, "data before '# r z re im' header")
                parts = s.split()
                if len(parts) != 4:
                    raise TraceParseError(path, no, f"expected 4 columns, got {len(parts)}")
                try:
                    rows.append([float(p) for p in parts])
                except ValueError as exc:
                    raise TraceParseError(path, no, str(exc)) from None
        if not rows:
            raise TraceParseError(path, 0, "no samples")
        data = np.array(rows)
        r = np.unique(data[:, 0])
        z = np.unique(data[:, 1])
        if len(r) * len(z) != len(data):
            raise GridMismatch(f"{path}: samples do not form a full r-z grid")
        vals = np.zeros((len(r), len(z)), dtype=complex)
        ir = np.searchsorted(r, data[:, 0])
        iz = np.searchsorted(z, data[:, 1])
        vals[ir, iz] = data[:, 2] + 1j * data[:, 3]
        return cls(Grid(r, z), vals, m, norm_volume, label or path.stem)

    def to_file(self, path):
        rr, zz = np.meshgrid(self.grid.r, self.grid.z, indexing="ij")
        with Path(path).open("w", newline="\n") as fh:
            fh.write("# r z re im\n")
            for r, z, v in zip(rr.ravel(), zz.ravel(), self.values.ravel()):
                fh.write(f"{r:.12g} {z:.12g} {v.real:.12g} {v.imag:.12g}\n")


def overlap_integral(psi_p: FieldProfile, psi_mw: FieldProfile, psi_sb: FieldProfile, sign: int = +1) -> complex:
    """Three-field overlap [m^3] with analytic azimuthal selection rule.

    The sideband field enters conjugated; for the lower sideband
    (``sign=-1``) the microwave field is conjugated as well.
    """
    for prof in (psi_mw, psi_sb):
        if not psi_p.grid.same_as(prof.grid):
            raise GridMismatch("profiles must share a common grid")
    if psi_p.m + sign * psi_mw.m != psi_sb.m:
        return 0j
    mw = psi_mw.values if sign > 0 else np.conj(psi_mw.values)
    return psi_p.grid.integrate(psi_p.values * mw * np.conj(psi_sb.values))


def g_from_overlap(mat: MaterialEO, omega_p, omega_sb, Omega0, profiles, sign: int = +1, n_sb=None) -> float:
    """Coupling rate [rad/s] from the full overlap expression.

    ``profiles`` is (Psi_p, Psi_sb, Psi_mw); all frequencies angular.
    """
    psi_p, psi_sb, psi_mw = profiles
    vols = (psi_p.norm_volume, psi_sb.norm_volume, psi_mw.norm_volume)
    if not all(v > 0 for v in vols):
        raise ZeroNormVolume("all normalisation volumes must be positive")
    overlap = overlap_integral(psi_p, psi_mw, psi_sb, sign)
    n_p = mat.n_opt
    n_sb = n_p if n_sb is None else n_sb
    pref = n_p * n_sb / mat.n_mw * mat.r33
    root = math.sqrt(HBAR * omega_p * omega_sb * Omega0 / (8.0 * EPS0 * vols[0] * vols[1] * vols[2]))
    return pref * root * abs(overlap)


def g_simplified(mat: MaterialEO, omega_p, E_mw) -> float:
    """g = n^2 omega_p r33 E / 2 for a microwave field uniform over the optical mode."""
    if not E_mw >= 0:
        raise DomainError("E_mw must be non-negative")
    return mat.n_opt**2 * omega_p * mat.r33 * E_mw / 2.0


def single_photon_field(Omega0, V_mw, eps_r_mw) -> float:
    """Vacuum field amplitude [V/m] of a microwave mode of volume V_mw [m^3]."""
    if not V_mw > 0:
        raise DomainError("V_mw must be positive")
    return math.sqrt(HBAR * Omega0 / (2.0 * EPS0 * eps_r_mw * V_mw))


def mode_volume_for_field(Omega0, E_mw, eps_r_mw) -> float:
    """Inverse of single_photon_field."""
    return HBAR * Omega0 / (2.0 * EPS0 * eps_r_mw * E_mw**2)


def air_gap_factor(d_resonator, gap_total, eps_r_mw) -> float:
    """Field reduction in the dielectric from series air gaps (1D capacitor proxy)."""
    if not d_resonator > 0:
        raise DomainError("resonator thickness must be positive")
    if not gap_total >= 0:
        raise DomainError("gap must be non-negative")
    return d_resonator / (d_resonator + eps_r_mw * gap_total)


class PhaseMatch(NamedTuple):
    m_plus: int
    m_minus: int
    degenerate: bool


def phase_match(m_pump: int, m_mw: int) -> PhaseMatch:
    """Sideband azimuthal numbers m_pump +/- m_mw."""
    if m_pump < 1:
        raise PhaseMatchingError(f"m_pump must be >= 1, got {m_pump}")
    m_plus, m_minus = m_pump + m_mw, m_pump - m_mw
    if m_plus < 1 or m_minus < 1:
        raise PhaseMatchingError(f"sideband azimuthal number below 1 for m_pump={m_pump}, m_mw={m_mw}")
    return PhaseMatch(m_plus, m_minus, m_mw == 0)


def g_thickness_scaling(g_ref, d_ref, d_new) -> float:
    if not d_new > 0:
        raise DomainError("d_new must be positive")
    return g_ref * d_ref / d_new
