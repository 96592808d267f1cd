"""Steady-state coupled-mode solutions of the triply resonant converter.

The classical equations of motion follow from the three-wave interaction
Hamiltonian  hbar*g*(a b-^+ c^+ + a b+^+ c + h.c.)  in the frame rotating
at the drives (pump at omega, microwave at Omega, sidebands at
omega +/- Omega):

    da/dt  = -Gp a  - i g (b- c + b+ c*) + sqrt(2 gamma_p)  a_in
    db+/dt = -G+ b+ - i g a c
    db-/dt = -G- b- - i g a c*
    dc/dt  = -GW c  - i g (a b-* + a* b+) + sqrt(2 gamma_mw) c_in

with |a_in|^2, |c_in|^2 the incident photon fluxes. Amplitudes are in
sqrt(photons); output power of a mode is 2*gamma*hbar*omega*|b|^2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    HBAR,
    ConverterSystem,
    OpticalMode,
    gamma_mw_total,
    gamma_p,
    gamma_sb,
)
from .errors import DomainError, NoConvergence, NonPositiveLinewidth, ZeroLinewidth

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200


class PerturbativeRegimeWarning(UserWarning):
    """Perturbative conversion efficiency exceeds unity."""


@dataclass(frozen=True)
class SteadyState:
    a: complex
    b_plus: complex
    b_minus: complex
    c: complex
    converged: bool
    residual: float
    iterations: int = 0

    @property
    def n_pump(self) -> float:
        return abs(self.a) ** 2

    @property
    def n_mw(self) -> float:
        return abs(self.c) ** 2


@dataclass(frozen=True)
class ConversionResult:
    """Sideband output powers [W], efficiencies and conversion coefficients [1/W]."""

    P_plus: float
    P_minus: float
    eta_plus: float
    eta_minus: float
    zeta_plus: float
    zeta_minus: float
    regime_warning: bool = False

    @property
    def sideband_ratio(self) -> float:
        """P+ / P- (inf if the lower sideband vanishes while the upper does not)."""
        if self.P_minus == 0.0:
            return math.inf if self.P_plus > 0 else math.nan
        return self.P_plus / self.P_minus


def _check_rates(sys: ConverterSystem):
    for name, rate in (
        ("pump", sys.pump.total_rate),
        ("sb_plus", sys.sb_plus.total_rate),
        ("sb_minus", sys.sb_minus.total_rate),
        ("microwave", sys.mw.total_rate),
    ):
        if not rate > 0 or not math.isfinite(rate):
            raise NonPositiveLinewidth(f"{name} total rate must be positive and finite, got {rate}")


def conversion_coefficient(sys: ConverterSystem, sign) -> float:
    """zeta [1/W]: sideband power per unit (pump power x microwave power)."""
    sb = sys.sideband(sign)
    Gp, Gs, Gw = gamma_p(sys), gamma_sb(sys, sign), gamma_mw_total(sys)
    num = 8.0 * sys.g**2 / (HBAR * sys.Omega_drive) * sys.pump.gamma * sb.gamma * sys.mw.gamma_mw
    return num / (abs(Gp) ** 2 * abs(Gs) ** 2 * abs(Gw) ** 2)


def sideband_powers_undepleted(sys: ConverterSystem) -> ConversionResult:
    """Sideband powers and photon-number efficiencies with undepleted drives."""
    _check_rates(sys)
    Pp = sys.P_pump_coupled
    zp = conversion_coefficient(sys, +1)
    zm = conversion_coefficient(sys, -1)
    eta_p = sys.Omega_drive / sys.sb_plus.omega0 * zp * Pp
    eta_m = sys.Omega_drive / sys.sb_minus.omega0 * zm * Pp
    flagged = eta_p > 1.0 or eta_m > 1.0
    if flagged:
        warnings.warn(
            f"perturbative efficiency exceeds unity (eta+={eta_p:.3g}, eta-={eta_m:.3g}); "
            "undepleted-pump assumption no longer holds",
            PerturbativeRegimeWarning,
            stacklevel=2,
        )
    return ConversionResult(
        P_plus=zp * Pp * sys.P_mw,
        P_minus=zm * Pp * sys.P_mw,
        eta_plus=eta_p,
        eta_minus=eta_m,
        zeta_plus=zp,
        zeta_minus=zm,
        regime_warning=flagged,
    )


# -- nonlinear steady state ---------------------------------------------------


class _Equations:
    """Steady-state residuals, each divided by its own mode denominator."""

    def __init__(self, sys: ConverterSystem):
        _check_rates(sys)
        self.g = sys.g
        self.Gp = gamma_p(sys)
        self.Gplus = gamma_sb(sys, +1)
        self.Gminus = gamma_sb(sys, -1)
        self.Gw = gamma_mw_total(sys)
        flux_p = sys.P_pump_coupled / (HBAR * sys.omega_drive)
        flux_w = sys.P_mw / (HBAR * sys.Omega_drive)
        self.drive_a = math.sqrt(2.0 * sys.pump.gamma * flux_p)
        self.drive_c = math.sqrt(2.0 * sys.mw.gamma_mw * flux_w)

    def linear(self) -> np.ndarray:
        a = self.drive_a / self.Gp
        c = self.drive_c / self.Gw
        ig = 1j * self.g
        return np.array([a, -ig * a * c / self.Gplus, -ig * a * np.conj(c) / self.Gminus, c])

    def terms(self, z):
        a, bp, bm, c = z
        ig = 1j * self.g
        return np.array([
            (self.drive_a - ig * (bm * c + bp * np.conj(c))) / self.Gp,
            -ig * a * c / self.Gplus,
            -ig * a * np.conj(c) / self.Gminus,
            (self.drive_c - ig * (a * np.conj(bm) + np.conj(a) * bp)) / self.Gw,
        ])

    def residual(self, z):
        return z - self.terms(z)

    def relative_residual(self, z) -> float:
        t = self.terms(z)
        r = np.abs(z - t)
        scale = np.abs(z) + np.abs(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0, r / np.where(scale > 0, scale, 1.0), 0.0)
        return float(rel.max())

    def jacobian(self, z) -> np.ndarray:
        """Real 8x8 Jacobian of [Re G, Im G] w.r.t. [Re z, Im z]."""
        a, bp, bm, c = z
        ig = 1j * self.g
        A = np.eye(4, dtype=complex)  # dG/dz
        B = np.zeros((4, 4), dtype=complex)  # dG/dz*
        A[0, 1] = ig * np.conj(c) / self.Gp
        A[0, 2] = ig * c / self.Gp
        A[0, 3] = ig * bm / self.Gp
        B[0, 3] = ig * bp / self.Gp
        A[1, 0] = ig * c / self.Gplus
        A[1, 3] = ig * a / self.Gplus
        A[2, 0] = ig * np.conj(c) / self.Gminus
        B[2, 3] = ig * a / self.Gminus
        A[3, 0] = ig * np.conj(bm) / self.Gw
        A[3, 1] = ig * np.conj(a) / self.Gw
        B[3, 0] = ig * bp / self.Gw
        B[3, 2] = ig * a / self.Gw
        S, D = A + B, A - B
        return np.block([[S.real, -D.imag], [S.imag, D.real]])


def solve_steady_state(
    sys: ConverterSystem,
    deplete: bool = False,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SteadyState:
    """Steady-state mode amplitudes.

    With ``deplete=False`` the pump and microwave amplitudes keep their
    linear (uncoupled) values and the sidebands follow in one step. With
    ``deplete=True`` the full four-mode system, including back-action on
    the pump and the microwave, is solved by damped Newton iteration
    starting from the linear solution.

    Raises NoConvergence if the relative residual does not reach ``tol``
    within ``max_iter`` iterations.
    """
    eqs = _Equations(sys)
    z = eqs.linear()
    if not deplete:
        a, bp, bm, c = z
        return SteadyState(complex(a), complex(bp), complex(bm), complex(c), True, 0.0, 0)

    res = eqs.relative_residual(z)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NoConvergence(
                f"steady-state solver stalled after {it} iterations (residual {res:.3e})",
                iterations=it,
                residual=res,
            )
        it += 1
        G = eqs.residual(z)
        rhs = -np.concatenate([G.real, G.imag])
        try:
            step = np.linalg.solve(eqs.jacobian(z), rhs)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at iteration {it}", it, res) from exc
        dz = step[:4] + 1j * step[4:]
        norm0 = np.linalg.norm(G)
        lam = 1.0
        for _ in range(40):
            trial = z + lam * dz
            if np.linalg.norm(eqs.residual(trial)) < norm0 or lam < 1e-9:
                break
            lam *= 0.5
        z = trial
        res = eqs.relative_residual(z)
    a, bp, bm, c = z
    return SteadyState(complex(a), complex(bp), complex(bm), complex(c), True, res, it)


def output_powers(sys: ConverterSystem, state: SteadyState) -> tuple[float, float]:
    """(P+, P-) leaving the resonator through the coupler [W]."""
    p = 2.0 * sys.sb_plus.gamma * HBAR * sys.sb_plus.omega0 * abs(state.b_plus) ** 2
    m = 2.0 * sys.sb_minus.gamma * HBAR * sys.sb_minus.omega0 * abs(state.b_minus) ** 2
    return p, m


def sideband_powers(sys: ConverterSystem, deplete: bool = False) -> tuple[float, float]:
    return output_powers(sys, solve_steady_state(sys, deplete=deplete))


def saturation_knee(sys: ConverterSystem, P_mw_values, threshold: float = 0.1):
    """Lowest microwave power at which depleted P+ departs from the linear slope.

    Returns (knee_power or None, relative deviations per power).
    """
    slope = conversion_coefficient(sys, +1) * sys.P_pump_coupled
    devs = []
    knee = None
    for P in P_mw_values:
        p_plus, _ = sideband_powers(replace(sys, P_mw=float(P)), deplete=True)
        linear = slope * P
        dev = abs(p_plus / linear - 1.0) if linear > 0 else 0.0
        devs.append(dev)
        if knee is None and dev > threshold:
            knee = float(P)
    return knee, np.asarray(devs)


# -- closed-form helpers -------------------------------------------------------


def suppression(delta_minus, gamma, gamma_prime) -> float:
    """Power ratio of wanted to unwanted sideband, Delta^2/(gamma+gamma')^2 + 1."""
    total = gamma + gamma_prime
    if not total > 0:
        raise ZeroLinewidth(f"gamma + gamma_prime must be positive, got {total}")
    return delta_minus**2 / total**2 + 1.0


def detuning_scheme_pump_penalty(S) -> float:
    """Extra pump power of the pump-detuning scheme relative to asymmetric FSR."""
    if not S >= 1:
        raise DomainError(f"suppression factor must be >= 1, got {S}")
    return (S - 1.0) / 4.0 + 1.0


def intracavity_photon_number(mode: OpticalMode, P_in, detuning=0.0) -> float:
    """Photons stored in ``mode`` driven with coupled power P_in [W] at the given detuning [rad/s]."""
    if not P_in >= 0:
        raise DomainError(f"P_in must be >= 0, got {P_in}")
    flux = P_in / (HBAR * mode.omega0)
    return 2.0 * mode.gamma * flux / (detuning**2 + mode.total_rate**2)


def cooperativity(sys: ConverterSystem) -> float:
    """Electro-optic cooperativity g^2 n_pump / (|G+| |GW|)."""
    n = intracavity_photon_number(sys.pump, sys.P_pump_coupled, sys.omega_drive - sys.pump.omega0)
    den = abs(gamma_sb(sys, +1)) * abs(gamma_mw_total(sys))
    if not den > 0:
        raise ZeroLinewidth("degenerate denominator in cooperativity")
    return sys.g**2 * n / den


def measured_efficiency(P_plus, P_mw, Omega, omega_plus) -> float:
    """Photon-number efficiency from measured powers: (Omega/omega+) P+/P_mw."""
    if P_mw == 0:
        raise ZeroDivisionError("microwave power must be non-zero")
    return Omega / omega_plus * P_plus / P_mw


def infer_g_from_slope(slope, sys: ConverterSystem) -> float:
    """Single-photon coupling rate [rad/s] reproducing the measured slope P+/P_mw."""
    if not slope > 0:
        raise DomainError(f"slope must be positive, got {slope}")
    _check_rates(sys)
    unit = conversion_coefficient(replace(sys, g=1.0), +1) * sys.P_pump_coupled
    if not unit > 0:
        raise DomainError("working point has no pump power or no external coupling")
    return math.sqrt(slope / unit)


def copropagating_g(g_eff) -> float:
    """Scale an effective g to the single-direction value (pin coupler excites both directions)."""
    return math.sqrt(2.0) * g_eff
