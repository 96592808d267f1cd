"""Spectral forward models and least-squares fits.

Forward models take angular frequencies (rad/s) like the rest of the
core. Traces and fit reports use the axis units of the data: Hz for
spectra, degC and Hz for crossing traces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .core import MicrowaveMode, OpticalMode
from .dispersion import CrossingModel, hybridized_frequencies, tracked_branch
from .errors import (
    DomainError,
    FitNoConvergence,
    IllConditioned,
    TraceParseError,
    UnresolvedCrossing,
)

MAX_ITER = 500
XTOL = 1e-10
MIN_POINTS = 8


class TraceKind(str, enum.Enum):
    OPTICAL_REFLECTION = "OpticalReflection"
    MICROWAVE_REFLECTION = "MicrowaveReflection"
    CROSSING_BRANCHES = "CrossingBranches"


# -- forward models ------------------------------------------------------------


def reflection_model_optical(omega, mode: OpticalMode, mode_matching: float = 1.0):
    """Normalised reflected power of a prism-coupled mode."""
    if not 0.0 <= mode_matching <= 1.0:
        raise DomainError("mode_matching must lie in [0, 1]")
    delta = np.asarray(omega, dtype=float) - mode.omega0
    k = mode.total_rate
    return 1.0 - mode_matching * 4.0 * mode.gamma * mode.gamma_prime / (delta**2 + k**2)


def mw_reflection_coefficient(Omega, mode: MicrowaveMode):
    """Complex single-port reflection coefficient."""
    delta = np.asarray(Omega, dtype=float) - mode.Omega0
    den = -1j * delta + mode.gamma_mw + mode.gamma_mw_prime
    return (-1j * delta + mode.gamma_mw_prime - mode.gamma_mw) / den


def mw_reflection_model(Omega, mode: MicrowaveMode):
    """Normalised reflected microwave power |S11|^2."""
    delta = np.asarray(Omega, dtype=float) - mode.Omega0
    k = mode.total_rate
    return 1.0 - 4.0 * mode.gamma_mw * mode.gamma_mw_prime / (delta**2 + k**2)


def mw_reflection_phase(Omega, mode: MicrowaveMode):
    """Unwrapped reflection phase [rad]; sweeps < pi if undercoupled, 2 pi if overcoupled."""
    return np.unwrap(np.angle(mw_reflection_coefficient(Omega, mode)))


def lorentzian_dip(x, x0, hw, depth, baseline):
    return baseline - depth * hw**2 / ((x - x0) ** 2 + hw**2)


# -- traces --------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumTrace:
    """Sampled response. ``y2`` holds the second branch of a crossing trace."""

    x: np.ndarray
    y: np.ndarray
    kind: TraceKind
    y2: Optional[np.ndarray] = None
    x_unit: str = "Hz"
    y_unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", TraceKind(self.kind))
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError("x and y must be 1-D arrays of equal length")
        if np.any(np.diff(x) <= 0):
            raise DomainError("x must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise DomainError("y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.y2 is not None:
            y2 = np.asarray(self.y2, dtype=float)
            if y2.shape != x.shape or not np.all(np.isfinite(y2)):
                raise DomainError("y2 must be finite and match x")
            object.__setattr__(self, "y2", y2)


_HEADER_KEYS = {"kind", "x", "y"}


def read_trace(path) -> SpectrumTrace:
    """Parse a plain-text trace.

    Header lines are ``# key: value`` with keys ``kind``, ``x`` and ``y``
    (axis units); data lines carry two columns, or three for dual-branch
    crossing traces.
    """
    path = Path(path)
    meta = {}
    rows = []
    ncol = None
    with path.open() as fh:
        for no, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                if rows:
                    raise TraceParseError(path, no, "header line after data")
                body = s.lstrip("#").strip()
                if not body:
                    continue
                key, sep, value = body.partition(":")
                key = key.strip().lower()
                if not sep or not value.strip():
                    raise TraceParseError(path, no, f"malformed header line {s!r}; expected '# key: value'")
                if key not in _HEADER_KEYS:
                    raise TraceParseError(path, no, f"unknown header key {key!r}")
                meta[key] = value.strip()
                continue
            parts = s.replace(",", " ").split()
            if ncol is None:
                ncol = len(parts)
                if ncol not in (2, 3):
                    raise TraceParseError(path, no, f"expected 2 or 3 columns, got {ncol}")
            elif len(parts) != ncol:
                raise TraceParseError(path, no, f"expected {ncol} columns, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise TraceParseError(path, no, f"non-numeric value in {s!r}") from None
    if "kind" not in meta:
        raise TraceParseError(path, 1, "missing '# kind:' header")
    try:
        kind = TraceKind(meta["kind"])
    except ValueError:
        raise TraceParseError(path, 1, f"unknown trace kind {meta['kind']!r}") from None
    if not rows:
        raise TraceParseError(path, 0, "no data rows")
    data = np.array(rows)
    try:
        return SpectrumTrace(
            data[:, 0], data[:, 1], kind, data[:, 2] if ncol == 3 else None,
            x_unit=meta.get("x", ""), y_unit=meta.get("y", ""),
        )
    except DomainError as exc:
        raise TraceParseError(path, 0, str(exc)) from None


def write_trace(path, trace: SpectrumTrace):
    with Path(path).open("w", newline="\n") as fh:
        fh.write(f"# kind: {trace.kind.value}\n# x: {trace.x_unit or '-'}\n# y: {trace.y_unit or '-'}\n")
        for i in range(len(trace.x)):
            cols = [trace.x[i], trace.y[i]] + ([trace.y2[i]] if trace.y2 is not None else [])
            fh.write(" ".join(f"{v:.15g}" for v in cols) + "\n")


# -- reports -------------------------------------------------------------------


@dataclass
class FitReport:
    params: dict  # name -> (value, sigma)
    residual_rms: float
    converged: bool
    derived: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)
    kind: str = ""
    iterations: int = 0

    def value(self, name):
        return self.params[name][0]

    def sigma(self, name):
        return self.params[name][1]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_rms": self.residual_rms,
            "params": {k: {"value": v, "sigma": s} for k, (v, s) in self.params.items()},
            "derived": self.derived,
            "assumptions": list(self.assumptions),
        }


def _solve(fun, jac, p0, n_data):
    res = least_squares(
        fun, p0, jac=jac, method="lm", xtol=XTOL, ftol=1e-15, gtol=1e-15, max_nfev=MAX_ITER
    )
    if res.status <= 0:
        raise FitNoConvergence(f"least-squares fit failed: {res.message}", iterations=res.nfev)
    dof = max(n_data - len(p0), 1)
    s2 = float(res.fun @ res.fun) / dof
    J = res.jac
    try:
        cov = np.linalg.pinv(J.T @ J) * s2
    except np.linalg.LinAlgError:
        cov = np.full((len(p0), len(p0)), np.nan)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return res, sig


# -- Lorentzian ------------------------------------------------------------------


def _seed_lorentzian(x, y):
    n = len(x)
    edge = max(n // 10, 1)
    baseline = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    i0 = int(np.argmin(y))
    depth = baseline - float(y[i0])
    half = baseline - 0.5 * depth
    below = np.nonzero(y <= half)[0]
    if len(below) >= 2:
        width = x[below[-1]] - x[below[0]]
    else:
        width = 4 * (x[1] - x[0])
    return float(x[i0]), max(0.5 * width, x[1] - x[0]), depth, baseline


def fit_lorentzian(
    trace: SpectrumTrace,
    assumption: str = "critical",
    mode_matching: Optional[float] = None,
) -> FitReport:
    """Fit a Lorentzian reflection dip.

    Fitted parameters are centre ``nu0`` and total half-width ``halfwidth``
    [Hz, i.e. (gamma+gamma')/2pi], absolute ``depth`` and ``baseline``.
    The external/intrinsic split needs a declared assumption:

    * ``critical``: gamma = gamma', mode matching from the dip depth.
    * ``undercoupled`` / ``overcoupled`` with a known ``mode_matching``
      (1 if omitted): split from the normalised depth.
    * ``none``: no split.
    """
    if trace.kind not in (TraceKind.OPTICAL_REFLECTION, TraceKind.MICROWAVE_REFLECTION):
        raise DomainError(f"cannot fit a Lorentzian to a {trace.kind.value} trace")
    if len(trace.x) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} samples")
    x, y = trace.x, trace.y
    x0, hw0, d0, b0 = _seed_lorentzian(x, y)
    # work in units of the seeded half-width around the seeded centre
    xs = (x - x0) / hw0
    yscale = max(abs(b0), d0, 1e-300)
    ys = y / yscale

    def fun(p):
        c, h, d, b = p
        return lorentzian_dip(xs, c, h, d, b) - ys

    def jac(p):
        c, h, d, b = p
        u = xs - c
        den = u**2 + h**2
        L = h**2 / den
        J = np.empty((len(xs), 4))
        J[:, 0] = -d * 2.0 * u * h**2 / den**2
        J[:, 1] = -d * 2.0 * h * u**2 / den**2
        J[:, 2] = -L
        J[:, 3] = 1.0
        return J

    res, sig = _solve(fun, jac, np.array([0.0, 1.0, d0 / yscale, b0 / yscale]), len(x))
    c, h, d, b = res.x
    h = abs(h)
    nu0 = x0 + c * hw0
    hw = h * hw0
    depth = d * yscale
    baseline = b * yscale
    params = {
        "nu0": (float(nu0), float(sig[0] * hw0)),
        "halfwidth": (float(hw), float(sig[1] * hw0)),
        "depth": (float(depth), float(sig[2] * yscale)),
        "baseline": (float(baseline), float(sig[3] * yscale)),
    }
    rms = float(np.sqrt(np.mean(res.fun**2)) * yscale)
    if depth < 3.0 * rms:
        raise IllConditioned(f"dip depth {depth:.3g} is below 3x the residual rms {rms:.3g}")
    if hw > np.ptp(x):
        # dip wider than the window: depth and baseline trade off freely
        raise IllConditioned(f"fitted half-width {hw:.3g} exceeds the trace span {np.ptp(x):.3g}")

    norm_depth = depth / baseline
    derived = {
        "loaded_Q": float(nu0 / (2.0 * hw)),
        "fwhm": float(2.0 * hw),
        "normalized_depth": float(norm_depth),
    }
    assumptions = []
    if assumption == "critical":
        derived.update(gamma=float(hw / 2), gamma_prime=float(hw / 2), mode_matching=float(norm_depth),
                       coupling_efficiency=float(norm_depth), regime="critical")
        assumptions.append("critical coupling declared: gamma = gamma'; mode matching taken from dip depth")
    elif assumption in ("undercoupled", "overcoupled"):
        lam = 1.0 if mode_matching is None else float(mode_matching)
        q = norm_depth / lam
        if q > 1.0 + 1e-9:
            raise DomainError(f"dip depth {norm_depth:.4g} impossible with mode matching {lam}")
        root = math.sqrt(max(1.0 - q, 0.0))
        small, large = 0.5 * hw * (1.0 - root), 0.5 * hw * (1.0 + root)
        g_ext, g_int = (small, large) if assumption == "undercoupled" else (large, small)
        derived.update(gamma=float(g_ext), gamma_prime=float(g_int), mode_matching=lam,
                       coupling_efficiency=float(norm_depth), regime=assumption)
        assumptions.append(f"{assumption} declared with mode matching {lam:g}")
    elif assumption in (None, "none"):
        assumptions.append("no coupling-regime assumption; external/intrinsic split not reported")
    else:
        raise DomainError(f"unknown assumption {assumption!r}")
    assumptions.append("power reflection is symmetric under gamma <-> gamma'; the split is assumption-driven")
    return FitReport(params, rms, True, derived, assumptions, trace.kind.value, int(res.nfev))


# -- avoided crossing -------------------------------------------------------------


def _linfit(t, y):
    A = np.vstack([t, np.ones_like(t)]).T
    (s, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    return s, c


def fit_avoided_crossing(trace: SpectrumTrace, segment: float = 0.2) -> FitReport:
    """Fit two coupled linearly tuned modes to branch positions versus temperature.

    A single branch is interpreted as the continuous branch that starts on
    ``mode_a`` at the cold end; a second column (``y2``) holds the other
    branch. Reported ``nu_a``/``nu_b`` [Hz] refer to the trace's mid
    temperature ``T_ref``; ``kappa`` [Hz] is half the minimum splitting.
    """
    if trace.kind is not TraceKind.CROSSING_BRANCHES:
        raise DomainError(f"expected a CrossingBranches trace, got {trace.kind.value}")
    T = trace.x
    if len(T) < MIN_POINTS:
        raise DomainError(f"need at least {MIN_POINTS} samples")
    T_ref = float(0.5 * (T[0] + T[-1]))
    offset = float(np.mean(trace.y))
    y1 = trace.y - offset
    y2 = None if trace.y2 is None else trace.y2 - offset
    t = T - T_ref
    nseg = max(int(segment * len(T)), 3)

    # asymptote seeds from the two end segments
    if y2 is None:
        sa, ca = _linfit(t[:nseg], y1[:nseg])
        sb, cb = _linfit(t[-nseg:], y1[-nseg:])
        # the branch sits kappa away from the asymptote crossing point
        tx = (cb - ca) / (sa - sb) if sa != sb else 0.0
        ix = int(np.argmin(np.abs(t - tx)))
        k0 = abs(y1[ix] - (sa * t[ix] + ca))
    else:
        hi = np.maximum(y1, y2)
        lo = np.minimum(y1, y2)
        s_hi0, c_hi0 = _linfit(t[:nseg], hi[:nseg])
        s_lo0, c_lo0 = _linfit(t[:nseg], lo[:nseg])
        # on the cold side the upper branch is mode_a, the lower one mode_b
        sa, ca = s_hi0, c_hi0
        sb, cb = s_lo0, c_lo0
        k0 = 0.5 * float(np.min(hi - lo))
    fscale = max(np.ptp(y1) if y2 is None else np.ptp(np.concatenate([y1, y2])), 1.0)
    tscale = max(np.ptp(t), 1e-12)
    ts = t / tscale

    def model(p):
        na, nb, a, b, k = p
        nu_a = na + a * ts
        nu_b = nb + b * ts
        mean = 0.5 * (nu_a + nu_b)
        half = np.sqrt(k**2 + 0.25 * (nu_a - nu_b) ** 2)
        return nu_a, nu_b, mean, half

    def branch_sign(p):
        # +1: single branch is the upper one (mode_a above mode_b when cold)
        return 1.0 if p[2] - p[3] < 0 else -1.0

    def fun(p):
        _, _, mean, half = model(p)
        if y2 is None:
            return (mean + branch_sign(p) * half) - y1 / fscale
        upper, lower = mean + half, mean - half
        return np.concatenate([upper - np.maximum(y1, y2) / fscale, lower - np.minimum(y1, y2) / fscale])

    def jac(p):
        na, nb, a, b, k = p
        nu_a, nu_b, mean, half = model(p)
        dlt = nu_a - nu_b
        safe = np.where(half > 0, half, 1.0)
        dh_dd = 0.25 * dlt / safe  # d half / d(nu_a - nu_b)
        dh_dk = k / safe
        cols_mean = np.stack([0.5 * np.ones_like(ts), 0.5 * np.ones_like(ts), 0.5 * ts, 0.5 * ts, 0 * ts], 1)
        cols_half = np.stack([dh_dd, -dh_dd, dh_dd * ts, -dh_dd * ts, dh_dk], 1)
        if y2 is None:
            return cols_mean + branch_sign(p) * cols_half
        return np.vstack([cols_mean + cols_half, cols_mean - cols_half])

    p0 = np.array([ca / fscale, cb / fscale, sa * tscale / fscale, sb * tscale / fscale, max(k0, 1e-3 * fscale) / fscale])
    n_data = len(t) * (1 if y2 is None else 2)
    res, sig = _solve(fun, jac, p0, n_data)
    na, nb, a, b, k = res.x
    slope_a = a * fscale / tscale
    slope_b = b * fscale / tscale
    kappa = abs(k) * fscale
    rms = float(np.sqrt(np.mean(res.fun**2)) * fscale)
    params = {
        "nu_a": (float(na * fscale + offset), float(sig[0] * fscale)),
        "nu_b": (float(nb * fscale + offset), float(sig[1] * fscale)),
        "slope_a": (float(slope_a), float(sig[2] * fscale / tscale)),
        "slope_b": (float(slope_b), float(sig[3] * fscale / tscale)),
        "kappa": (float(kappa), float(sig[4] * fscale)),
    }
    if 2.0 * kappa < 3.0 * rms:
        raise UnresolvedCrossing(
            f"fitted splitting 2*kappa = {2 * kappa:.4g} Hz is below 3x the noise rms {rms:.4g} Hz"
        )
    ds = slope_a - slope_b
    t_cross = T_ref - (na - nb) * fscale / ds if ds != 0 else math.nan
    steep, shallow = sorted((abs(slope_a), abs(slope_b)), reverse=True)
    ratio = steep / shallow if shallow > 0 else math.inf
    derived = {
        "T_ref": T_ref,
        "slope_ratio": float(ratio),  # steeper / shallower asymptote
        "crossing_temperature": float(t_cross),
        "min_splitting": float(2.0 * kappa),
    }
    assumptions = ["single branch starts on mode_a at the cold end" if y2 is None else "two branches: upper/lower"]
    return FitReport(params, rms, True, derived, assumptions, trace.kind.value, int(res.nfev))


def synthetic_crossing_trace(model: CrossingModel, T, noise_hz: float = 0.0, seed: int = 0,
                             both: bool = True) -> SpectrumTrace:
    """Forward-model crossing trace with seeded Gaussian noise on each branch.

    ``both=False`` returns only the continuous branch that starts on
    ``mode_a`` at the cold end.
    """
    T = np.asarray(T, dtype=float)
    rng = np.random.default_rng(seed)
    if both:
        upper, lower = hybridized_frequencies(model, T)
        y, y2 = upper + rng.normal(0.0, noise_hz, T.shape), lower + rng.normal(0.0, noise_hz, T.shape)
    else:
        y, y2 = tracked_branch(model, T, "a") + rng.normal(0.0, noise_hz, T.shape), None
    return SpectrumTrace(T, y, TraceKind.CROSSING_BRANCHES, y2, x_unit="degC", y_unit="Hz")


def fit_trace(trace: SpectrumTrace, **kwargs) -> FitReport:
    if trace.kind is TraceKind.CROSSING_BRANCHES:
        return fit_avoided_crossing(trace)
    return fit_lorentzian(trace, **kwargs)
