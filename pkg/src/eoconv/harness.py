"""Scenario-driven evaluations behind the command-line interface.

Every function returns plain data (dicts / strings) with floats rounded
to 12 significant digits so that reruns are byte-identical.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import scenario as sc_mod
from .scenario import dbm_to_watt
from .core import (
    ConverterSystem,
    gamma_mw_total,
    gamma_p,
    gamma_sb,
    rad_to_hz,
)
from .coupling import air_gap_factor
from .dispersion import find_operating_temperature, fsr_pair
from .engine import (
    conversion_coefficient,
    cooperativity,
    copropagating_g,
    detuning_scheme_pump_penalty,
    infer_g_from_slope,
    measured_efficiency,
    output_powers,
    sideband_powers_undepleted,
    solve_steady_state,
    suppression,
)
from .errors import EOConvError, ScenarioError
from .fitlab import fit_trace, read_trace

SIG_DIGITS = 12


def _r(x):
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _r(obj)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def db(x):
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def _header(sc) -> dict:
    return {
        "name": sc.name,
        "version": sc.version,
        "hash": sc.hash,
        "provenance_counts": sc.provenance_counts(),
        "defaults": list(sc.defaults),
    }


def observables(sys: ConverterSystem, deplete: bool = False) -> dict:
    """All scalar observables at one working point."""
    pert = sideband_powers_undepleted(sys)
    state = solve_steady_state(sys, deplete=deplete)
    if deplete:
        p_plus, p_minus = output_powers(sys, state)
        if sys.P_mw > 0:
            eta_plus = measured_efficiency(p_plus, sys.P_mw, sys.Omega_drive, sys.sb_plus.omega0)
            eta_minus = measured_efficiency(p_minus, sys.P_mw, sys.Omega_drive, sys.sb_minus.omega0)
        else:
            eta_plus = eta_minus = 0.0
    else:
        p_plus, p_minus = pert.P_plus, pert.P_minus
        eta_plus, eta_minus = pert.eta_plus, pert.eta_minus
    delta_minus = sys.omega_drive - sys.Omega_drive - sys.sb_minus.omega0
    return {
        "P_plus": p_plus,
        "P_minus": p_minus,
        "eta_plus": eta_plus,
        "eta_minus": eta_minus,
        "zeta_plus": pert.zeta_plus,
        "zeta_minus": pert.zeta_minus,
        "slope": pert.zeta_plus * sys.P_pump_coupled,
        "sideband_ratio": p_plus / p_minus if p_minus > 0 else math.inf,
        "S_predicted": suppression(delta_minus, sys.sb_minus.gamma, sys.sb_minus.gamma_prime),
        "delta_minus_hz": rad_to_hz(delta_minus),
        "G0": cooperativity(sys),
        "n_pump": state.n_pump,
        "n_mw": state.n_mw,
        "abs_gamma_p_hz": rad_to_hz(abs(gamma_p(sys))),
        "abs_gamma_plus_hz": rad_to_hz(abs(gamma_sb(sys, +1))),
        "abs_gamma_minus_hz": rad_to_hz(abs(gamma_sb(sys, -1))),
        "abs_gamma_mw_hz": rad_to_hz(abs(gamma_mw_total(sys))),
        "g_hz": rad_to_hz(sys.g),
        "converged": state.converged,
        "iterations": state.iterations,
        "residual": state.residual,
        "regime_warning": pert.regime_warning,
    }


def run_point(sc, deplete: bool = False) -> dict:
    sys = sc_mod.build_system(sc)
    obs = observables(sys, deplete)
    ref = sc.reference()
    report = {
        "scenario": _header(sc),
        "deplete": deplete,
        "working_point": {
            "pump_frequency_hz": sys.pump.frequency_hz,
            "pump_drive_hz": rad_to_hz(sys.omega_drive),
            "sb_plus_frequency_hz": sys.sb_plus.frequency_hz,
            "sb_minus_frequency_hz": sys.sb_minus.frequency_hz,
            "microwave_frequency_hz": sys.mw.frequency_hz,
            "microwave_drive_hz": rad_to_hz(sys.Omega_drive),
            "P_pump_coupled_w": sys.P_pump_coupled,
            "P_mw_w": sys.P_mw,
            "optical_loaded_Q": sys.pump.loaded_q,
            "microwave_loaded_Q": sys.mw.loaded_q,
        },
        "observables": obs,
        "suppression": {
            "S_predicted": obs["S_predicted"],
            "S_predicted_db": db(obs["S_predicted"]),
            "sideband_ratio_db": db(obs["sideband_ratio"]) if obs["sideband_ratio"] != math.inf else None,
            "measured_db_reference": ref.get("suppression_db"),
        },
        "reference": ref,
    }
    slope = ref.get("slope", obs["slope"])
    coupling = {"slope_used": slope, "slope_source": "reference" if "slope" in ref else "model"}
    if slope > 0 and sys.P_pump_coupled > 0:
        g_eff = infer_g_from_slope(slope, sys)
        coupling["g_eff_hz"] = rad_to_hz(g_eff)
        coupling["g_copropagating_hz"] = rad_to_hz(copropagating_g(g_eff))
        g_sim = sc.section("coupling").get("g_simulated_hz")
        if g_sim:
            coupling["g_simulated_hz"] = g_sim
            coupling["simulated_over_copropagating"] = g_sim / coupling["g_copropagating_hz"]
    cpl = sc.section("coupling")
    if "air_gap_m" in ref and "thickness_m" in cpl:
        eps = sc_mod.material(sc).eps_r_mw
        coupling["air_gap_factor_reference_gap"] = air_gap_factor(cpl["thickness_m"], ref["air_gap_m"], eps)
    report["coupling"] = coupling
    if sc_mod.build_ladder(sc) is not None:
        T = sc_mod.temperature(sc)
        fp, fm = fsr_pair(sc_mod.build_ladder(sc), T)
        report["dispersion"] = {"temperature_c": T, "fsr_plus_hz": fp, "fsr_minus_hz": fm, "fsr_asymmetry_hz": fp - fm}
    return _clean(report)


# -- sweeps ---------------------------------------------------------------------

_LADDER_OUTPUTS = ("fsr_plus", "fsr_minus", "fsr_asymmetry")


def _override(spec, value) -> dict:
    v = spec.variable
    if v == "microwave_frequency":
        return {"microwave_frequency_hz": value}
    if v == "temperature":
        return {"temperature_c": value}
    if v == "pump_detuning":
        return {"pump_detuning_hz": value}
    power = dbm_to_watt(value) if spec.unit.lower() == "dbm" else value
    return {"microwave_power_w": power} if v == "microwave_power" else {"pump_power_w": power}


def _evaluate(sc, spec, value, deplete, ladder):
    row = {spec.variable: value}
    try:
        sys = sc_mod.build_system(sc, **_override(spec, value))
        obs = observables(sys, deplete)
        if ladder is not None:
            T = value if spec.variable == "temperature" else sc_mod.temperature(sc)
            fp, fm = fsr_pair(ladder, T)
            obs.update(fsr_plus=fp, fsr_minus=fm, fsr_asymmetry=fp - fm)
        for name in spec.outputs:
            if name not in obs:
                raise ScenarioError(f"unknown output {name!r}")
            row[name] = obs[name]
        row["error"] = ""
    except ScenarioError:
        raise
    except EOConvError as exc:
        for name in spec.outputs:
            row[name] = math.nan
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_rows(sc, spec, deplete: bool = False, jobs: int = 1) -> list:
    """Evaluate the sweep grid; results come back in grid order."""
    ladder = sc_mod.build_ladder(sc)
    if any(o in _LADDER_OUTPUTS for o in spec.outputs) and ladder is None:
        raise ScenarioError("FSR outputs need a [ladder] section")
    values = spec.values()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda v: _evaluate(sc, spec, v, deplete, ladder), values))
    return [_evaluate(sc, spec, v, deplete, ladder) for v in values]


def _fmt(v):
    if isinstance(v, str):
        return v.replace(",", ";").replace("\n", " ")
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.{SIG_DIGITS}g}"


def rows_to_csv(sc, spec, rows, deplete=False) -> str:
    cols = [spec.variable, *spec.outputs, "error"]
    buf = io.StringIO(newline="")
    unit = f" [{spec.unit}]" if spec.unit else ""
    buf.write(f"# eoconv sweep {spec.name}\n")
    buf.write(f"# scenario: {sc.name} v{sc.version}\n")
    buf.write(f"# scenario_hash: {sc.hash}\n")
    buf.write(f"# variable: {spec.variable}{unit}\n")
    buf.write(f"# deplete: {str(deplete).lower()}\n")
    buf.write(",".join(cols) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[c]) for c in cols) + "\n")
    return buf.getvalue()


def _peak(x, y):
    """Peak position refined by a parabola through the three highest samples."""
    i = int(np.nanargmax(y))
    if 0 < i < len(y) - 1 and np.all(np.isfinite(y[i - 1:i + 2])):
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        return float(x[i] + shift * (x[i + 1] - x[i])), i
    return float(x[i]), i


def sweep_summary(sc, spec, rows, deplete=False) -> dict:
    x = np.array([r[spec.variable] for r in rows], dtype=float)
    summary = {"points": len(rows), "failed_points": sum(1 for r in rows if r["error"])}
    ref = sc.reference()
    if spec.variable == "microwave_frequency" and {"P_plus", "P_minus"} <= set(spec.outputs) and len(rows) > 2:
        pp = np.array([r["P_plus"] for r in rows], dtype=float)
        pm = np.array([r["P_minus"] for r in rows], dtype=float)
        f_plus, i_plus = _peak(x, pp)
        f_minus, _ = _peak(x, pm)
        summary.update(
            peak_plus_hz=f_plus,
            peak_minus_hz=f_minus,
            peak_separation_hz=f_plus - f_minus,
            peak_separation_grid_hz=float(x[int(np.nanargmax(pp))] - x[int(np.nanargmax(pm))]),
            suppression_at_max_plus_db=db(pp[i_plus] / pm[i_plus]) if pm[i_plus] > 0 else None,
        )
        sys = sc_mod.build_system(sc, microwave_frequency_hz=x[i_plus])
        dm = sys.omega_drive - sys.Omega_drive - sys.sb_minus.omega0
        summary["suppression_predicted_db"] = db(suppression(dm, sys.sb_minus.gamma, sys.sb_minus.gamma_prime))
        summary["suppression_measured_db_reference"] = ref.get("suppression_db")
        summary["peak_separation_reference_hz"] = ref.get("peak_separation_hz")
    if spec.variable == "microwave_power" and "P_plus" in spec.outputs:
        pw = np.array([dbm_to_watt(v) if spec.unit.lower() == "dbm" else v for v in x])
        pp = np.array([r["P_plus"] for r in rows], dtype=float)
        first = pw <= pw[0] * 10.0 * (1 + 1e-9)  # first decade of the sweep
        slope = float(np.sum(pw[first] * pp[first]) / np.sum(pw[first] ** 2))
        dev = np.abs(pp / (slope * pw) - 1.0)
        over = np.nonzero(dev > 0.1)[0]
        summary.update(
            linear_slope=slope,
            linear_points=int(first.sum()),
            max_relative_deviation=float(np.nanmax(dev)),
            knee_power_w=float(pw[over[0]]) if len(over) else None,
            slope_reference=ref.get("slope"),
            knee_power_reference_w=ref.get("knee_power_w"),
        )
    return summary


def run_sweep(sc, spec, deplete: bool = False, jobs: int = 1, fmt: str = "csv") -> str:
    rows = sweep_rows(sc, spec, deplete, jobs)
    if fmt == "json":
        return dumps({
            "scenario": _header(sc),
            "sweep": {"name": spec.name, "variable": spec.variable, "unit": spec.unit, "deplete": deplete},
            "rows": rows,
            "summary": sweep_summary(sc, spec, rows, deplete),
        })
    return rows_to_csv(sc, spec, rows, deplete)


# -- scheme comparison ------------------------------------------------------------


def compare_schemes(sc, S_target_db: float) -> dict:
    """Pump-detuning scheme versus asymmetric-FSR scheme at equal suppression."""
    if not S_target_db >= 0:
        raise ScenarioError("target suppression must be >= 0 dB")
    sys = sc_mod.build_system(sc)
    S = 10.0 ** (S_target_db / 10.0)
    k = sys.pump.total_rate
    delta_minus = k * math.sqrt(S - 1.0)
    penalty = detuning_scheme_pump_penalty(S)

    # engine cross-check: equal P+ needs pump power proportional to |Gamma_p|^2
    nu_fsr = sys.sb_plus.omega0 - sys.pump.omega0
    base = replace(
        sys,
        sb_plus=replace(sys.sb_plus, omega0=sys.pump.omega0 + nu_fsr),
        sb_minus=replace(sys.sb_minus, omega0=sys.pump.omega0 - nu_fsr),
    )
    detuned = replace(base, omega_drive=base.pump.omega0 + 0.5 * delta_minus, Omega_drive=nu_fsr - 0.5 * delta_minus)
    detuned = replace(detuned, mw=replace(detuned.mw, Omega0=detuned.Omega_drive))
    asym = replace(
        base,
        sb_minus=replace(base.sb_minus, omega0=base.pump.omega0 - nu_fsr - delta_minus),
        omega_drive=base.pump.omega0,
        Omega_drive=nu_fsr,
        mw=replace(base.mw, Omega0=nu_fsr),
    )
    za = conversion_coefficient(detuned, +1)
    zb = conversion_coefficient(asym, +1)
    ratio_a = za / conversion_coefficient(detuned, -1)
    ratio_b = zb / conversion_coefficient(asym, -1)
    return _clean({
        "scenario": _header(sc),
        "target_suppression_db": S_target_db,
        "target_suppression": S,
        "total_linewidth_hz": rad_to_hz(k),
        "scheme_a_pump_detuning_hz": rad_to_hz(0.5 * delta_minus),
        "scheme_b_fsr_asymmetry_hz": rad_to_hz(delta_minus),
        "pump_power_penalty": penalty,
        "pump_power_penalty_engine": zb / za if za > 0 else None,
        "suppression_check_scheme_a": ratio_a,
        "suppression_check_scheme_b": ratio_b,
    })


# -- fits ---------------------------------------------------------------------------


def run_fit(trace_file, kind=None, assumption="critical", mode_matching=None) -> dict:
    trace = read_trace(trace_file)
    if kind is not None and trace.kind.value != kind:
        raise ScenarioError(f"trace declares kind {trace.kind.value!r}, requested {kind!r}")
    kwargs = {} if trace.kind.value == "CrossingBranches" else {"assumption": assumption, "mode_matching": mode_matching}
    report = fit_trace(trace, **kwargs)
    out = report.to_dict()
    out["source"] = {"trace": str(trace_file), "x_unit": trace.x_unit, "y_unit": trace.y_unit, "points": len(trace.x)}
    return _clean(out)


def operating_temperature(sc, target_hz=None, bracket=None) -> dict:
    ladder = sc_mod.build_ladder(sc)
    if ladder is None:
        raise ScenarioError("scenario has no [ladder] section")
    ref = sc.reference()
    target = target_hz if target_hz is not None else ref.get("fsr_asymmetry_hz")
    if target is None:
        raise ScenarioError("no target asymmetry given")
    T0 = sc_mod.temperature(sc) or 25.0
    bracket = bracket or (T0 - 1.0, T0 + 1.0)
    res = find_operating_temperature(ladder, target, bracket)
    return _clean({"target_asymmetry_hz": target, "temperature_c": res.temperature, "all_roots_c": list(res.roots)})
