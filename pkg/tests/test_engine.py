import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eoconv.core import HBAR, OpticalMode, gamma_mw_total, gamma_sb, hz_to_rad
from eoconv.engine import (
    PerturbativeRegimeWarning,
    conversion_coefficient,
    cooperativity,
    copropagating_g,
    detuning_scheme_pump_penalty,
    infer_g_from_slope,
    intracavity_photon_number,
    measured_efficiency,
    output_powers,
    saturation_knee,
    sideband_powers,
    sideband_powers_undepleted,
    solve_steady_state,
    suppression,
)
from eoconv.errors import DomainError, NoConvergence, ZeroLinewidth
from conftest import TWO_PI, make_system, rel


def _with_g(sys, g):
    # validation forbids g < 0; bypass it to probe the sign convention
    out = replace(sys)
    object.__setattr__(out, "g", g)
    return out


# -- perturbative formula -----------------------------------------------------


def test_reference_working_point_efficiency(reference_system):
    r = sideband_powers_undepleted(reference_system)
    assert rel(r.eta_plus, 1.09e-3) < 0.05
    assert rel(r.P_plus / reference_system.P_mw, 23.68) < 0.05
    assert not r.regime_warning


def test_zero_coupling_gives_zero_conversion():
    r = sideband_powers_undepleted(make_system(g_hz=0.0))
    assert r.P_plus == r.P_minus == r.eta_plus == r.eta_minus == 0.0


def test_doubling_pump_doubles_efficiency_and_power(reference_system):
    r1 = sideband_powers_undepleted(reference_system)
    r2 = sideband_powers_undepleted(replace(reference_system, P_pump=2 * reference_system.P_pump))
    assert r2.eta_plus == pytest.approx(2 * r1.eta_plus, rel=1e-14)
    assert r2.P_plus == pytest.approx(2 * r1.P_plus, rel=1e-14)


def test_mode_matching_scales_coupled_pump(reference_system):
    r1 = sideband_powers_undepleted(reference_system)
    r2 = sideband_powers_undepleted(replace(reference_system, mode_matching=0.6))
    assert r2.P_plus == pytest.approx(0.6 * r1.P_plus, rel=1e-14)


def test_formula_against_hand_evaluation(reference_system):
    # independent evaluation of the product formula with the resonant denominators
    g = TWO_PI * 7.43
    gam = TWO_PI * 346e3
    gw, gwp = TWO_PI * 3.6e6, TWO_PI * 16.2e6
    Omega = TWO_PI * 8.941e9
    dm = TWO_PI * 30e6
    zeta = 8 * g**2 / (HBAR * Omega) * gam * gam * gw / ((2 * gam) ** 2 * (2 * gam) ** 2 * (gw + gwp) ** 2)
    zeta_m = 8 * g**2 / (HBAR * Omega) * gam * gam * gw / ((2 * gam) ** 2 * (dm**2 + (2 * gam) ** 2) * (gw + gwp) ** 2)
    assert conversion_coefficient(reference_system, +1) == pytest.approx(zeta, rel=1e-9)
    assert conversion_coefficient(reference_system, -1) == pytest.approx(zeta_m, rel=1e-6)


def test_regime_warning_flag_when_efficiency_exceeds_one():
    sys = make_system(g_hz=1e4)
    with pytest.warns(PerturbativeRegimeWarning):
        r = sideband_powers_undepleted(sys)
    assert r.regime_warning and r.eta_plus > 1


rates = st.floats(1e4, 1e7)


@pytest.mark.filterwarnings("ignore::eoconv.engine.PerturbativeRegimeWarning")
@settings(max_examples=1000, deadline=None)
@given(
    gam=rates,
    gamp=rates,
    dm=st.floats(-200e6, 200e6),
    g=st.floats(0.1, 100.0),
    pp=st.floats(1e-6, 1e-2),
    gw=st.floats(1e5, 1e8),
    gwp=st.floats(1e5, 1e8),
)
def test_sideband_ratio_equals_suppression_factor(gam, gamp, dm, g, pp, gw, gwp):
    sys = make_system(rate=gam, rate_prime=gamp, delta_minus_hz=dm, g_hz=g, P_pump=pp, mw_rates=(gw, gwp))
    r = sideband_powers_undepleted(sys)
    delta = sys.omega_drive - sys.Omega_drive - sys.sb_minus.omega0
    S = suppression(delta, sys.pump.gamma, sys.pump.gamma_prime)
    assert r.P_plus / r.P_minus == pytest.approx(S, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(r1=rates, r1p=rates, r2=rates, r2p=rates)
def test_reciprocity_under_sideband_relabelling(r1, r1p, r2, r2p):
    base = make_system(delta_minus_hz=0.0)

    def with_rates(plus, minus):
        return replace(
            base,
            sb_plus=OpticalMode(base.sb_plus.omega0, hz_to_rad(plus[0]), hz_to_rad(plus[1]), base.sb_plus.m),
            sb_minus=OpticalMode(base.sb_minus.omega0, hz_to_rad(minus[0]), hz_to_rad(minus[1]), base.sb_minus.m),
        )

    a = with_rates((r1, r1p), (r2, r2p))
    b = with_rates((r2, r2p), (r1, r1p))
    assert conversion_coefficient(a, +1) == pytest.approx(conversion_coefficient(b, -1), rel=1e-9)


@pytest.mark.parametrize("deplete", [False, True])
def test_outputs_even_in_sign_of_g(deplete):
    sys = make_system(P_mw=1e-5)
    p = sideband_powers(sys, deplete)
    m = sideband_powers(_with_g(sys, -sys.g), deplete)
    assert m == pytest.approx(p, rel=1e-10)
    assert sideband_powers_undepleted(_with_g(sys, -sys.g)).eta_plus == sideband_powers_undepleted(sys).eta_plus


# -- closed forms --------------------------------------------------------------


def test_suppression_examples():
    k = TWO_PI * 692e3
    assert suppression(0.0, k / 2, k / 2) == 1.0
    assert suppression(k, k / 2, k / 2) == pytest.approx(2.0, rel=1e-15)
    S = suppression(TWO_PI * 18.1e6, k / 2, k / 2)
    assert S == pytest.approx((18.1 / 0.692) ** 2 + 1, rel=1e-12)
    assert S == pytest.approx(685, rel=2e-3)
    assert 10 * math.log10(S) == pytest.approx(28.4, abs=0.05)
    with pytest.raises(ZeroLinewidth):
        suppression(1.0, 0.0, 0.0)


def test_pump_penalty_examples():
    assert detuning_scheme_pump_penalty(1000) == pytest.approx(250.75, rel=1e-15)
    assert detuning_scheme_pump_penalty(1) == 1
    assert detuning_scheme_pump_penalty(5) == 2
    with pytest.raises(DomainError):
        detuning_scheme_pump_penalty(0.5)


def test_intracavity_photon_number(reference_system):
    pump = reference_system.pump
    n = intracavity_photon_number(pump, 0.42e-3)
    # oracle: 2 gamma (P / hbar omega) / (gamma + gamma')^2 evaluated by hand
    flux = 0.42e-3 / (1.054571817e-34 * TWO_PI * 193.5e12)
    assert n == pytest.approx(2 * TWO_PI * 346e3 * flux / (TWO_PI * 692e3) ** 2, rel=1e-8)
    assert n == pytest.approx(7.5e8, rel=0.01)
    assert intracavity_photon_number(pump, 0.0) == 0.0
    assert intracavity_photon_number(pump, 0.42e-3, pump.total_rate) == pytest.approx(n / 2, rel=1e-14)


def test_cooperativity(reference_system):
    G0 = cooperativity(reference_system)
    assert 2e-3 <= G0 <= 8e-3
    assert cooperativity(make_system(g_hz=0.0)) == 0.0
    high_q = make_system(mw_rates=(3.6e3, 16.2e3))
    assert cooperativity(high_q) == pytest.approx(1e3 * G0, rel=1e-12)


def test_measured_efficiency():
    eta = measured_efficiency(23.68, 1.0, TWO_PI * 8.941e9, TWO_PI * 193.55e12)
    assert eta == pytest.approx(1.09e-3, rel=0.01)
    assert measured_efficiency(0.0, 1.0, 1.0, 2.0) == 0.0
    assert measured_efficiency(3.0, 2.0, 5.0, 5.0) == 1.5
    with pytest.raises(ZeroDivisionError):
        measured_efficiency(1.0, 0.0, 1.0, 1.0)


def test_infer_g_from_slope(reference_system):
    g = infer_g_from_slope(23.68, reference_system)
    assert rel(g, TWO_PI * 7.43) < 0.01
    g_co = copropagating_g(g)
    assert g_co == pytest.approx(TWO_PI * 10.5, rel=0.01)
    assert 28 / (g_co / TWO_PI) == pytest.approx(2.7, abs=0.1)


@given(st.floats(0.01, 1e3))
def test_infer_g_round_trip(g_hz):
    sys = make_system(g_hz=g_hz)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbativeRegimeWarning)
        slope = sideband_powers_undepleted(sys).P_plus / sys.P_mw
    assert infer_g_from_slope(slope, sys) == pytest.approx(sys.g, rel=1e-12)


# -- nonlinear steady state ----------------------------------------------------


def test_zero_coupling_depleted_is_linear():
    sys = make_system(g_hz=0.0, P_mw=1e-6)
    st_ = solve_steady_state(sys, deplete=True)
    assert st_.converged and st_.iterations <= 1
    assert st_.b_plus == 0 and st_.b_minus == 0
    assert st_.n_pump == pytest.approx(intracavity_photon_number(sys.pump, sys.P_pump), rel=1e-12)
    # microwave: same Lorentzian formula with microwave rates
    flux = sys.P_mw / (HBAR * sys.mw.Omega0)
    n_mw = 2 * sys.mw.gamma_mw * flux / sys.mw.total_rate**2
    assert st_.n_mw == pytest.approx(n_mw, rel=1e-12)


@pytest.mark.parametrize("p_mw", [1e-9, 1e-6, 1e-4, 6.3e-6])
def test_converged_residual_within_tolerance(p_mw):
    st_ = solve_steady_state(make_system(P_mw=p_mw), deplete=True)
    assert st_.converged and st_.residual <= 1e-12


def test_solver_reports_non_convergence():
    with pytest.raises(NoConvergence) as info:
        solve_steady_state(make_system(P_mw=1e-4), deplete=True, max_iter=0)
    assert info.value.iterations == 0


def test_small_signal_limit_is_microwave_back_action():
    # Oracle: with the pump fixed the sidebands load the microwave mode,
    # G_mw -> G_mw + g^2 n / G+ - g^2 n / conj(G-); P+ scales with |c|^2.
    sys = make_system(P_mw=1e-12)
    n = intracavity_photon_number(sys.pump, sys.P_pump)
    Gw, Gp, Gm = gamma_mw_total(sys), gamma_sb(sys, +1), gamma_sb(sys, -1)
    loaded = Gw + sys.g**2 * n / Gp - sys.g**2 * n / Gm.conjugate()
    factor = abs(Gw / loaded) ** 2
    depleted, _ = sideband_powers(sys, deplete=True)
    linear, _ = sideband_powers(sys, deplete=False)
    assert depleted / linear == pytest.approx(factor, rel=1e-6)


def test_nonlinear_matches_perturbative_at_low_cooperativity():
    # g reduced 10x: back-action 2*G0 ~ 6e-5, well inside 1e-3
    sys = make_system(g_hz=0.743, P_mw=1e-9)
    r = sideband_powers_undepleted(sys)
    flux_ratio = (sys.P_mw / (HBAR * sys.Omega_drive)) / (sys.P_pump / (HBAR * sys.omega_drive))
    assert r.eta_plus * flux_ratio < 1e-4
    p, _ = sideband_powers(sys, deplete=True)
    assert rel(p, r.P_plus) < 1e-3


@pytest.mark.parametrize("p_mw", [1e-6, 1e-5, 1e-4])
def test_photon_flux_bookkeeping(p_mw):
    sys = make_system(P_mw=p_mw)
    s = solve_steady_state(sys, deplete=True)
    drive_a = math.sqrt(2 * sys.pump.gamma * sys.P_pump / (HBAR * sys.omega_drive))
    drive_c = math.sqrt(2 * sys.mw.gamma_mw * sys.P_mw / (HBAR * sys.Omega_drive))
    pump_used = 2 * (drive_a * s.a.real - sys.pump.total_rate * abs(s.a) ** 2)
    mw_used = 2 * (drive_c * s.c.real - sys.mw.total_rate * abs(s.c) ** 2)
    gen_plus = 2 * sys.sb_plus.total_rate * abs(s.b_plus) ** 2
    gen_minus = 2 * sys.sb_minus.total_rate * abs(s.b_minus) ** 2
    # each pump photon becomes one sideband photon; SFG takes a microwave
    # photon and DFG returns one
    assert pump_used == pytest.approx(gen_plus + gen_minus, rel=1e-8)
    assert mw_used == pytest.approx(gen_plus - gen_minus, rel=1e-8)
    # depletion shows up as a lower pump than the linear value
    assert abs(s.a) < abs(drive_a / (sys.pump.total_rate))


def test_saturation_knee_order_of_magnitude(reference_system):
    powers = 1e-3 * 10 ** (np.arange(-54, -21) / 10)
    knee, devs = saturation_knee(reference_system, powers)
    assert devs.max() > 0.1
    assert knee is not None and 1e-6 / 3 <= knee <= 3e-6


def test_output_powers_use_external_rate(reference_system):
    s = solve_steady_state(reference_system)
    p, m = output_powers(reference_system, s)
    r = sideband_powers_undepleted(reference_system)
    # the closed form counts sideband photons at the pump photon energy;
    # the mode solver emits them at their own frequency
    sys = reference_system
    assert p == pytest.approx(r.P_plus * sys.sb_plus.omega0 / sys.omega_drive, rel=1e-9)
    assert m == pytest.approx(r.P_minus * sys.sb_minus.omega0 / sys.omega_drive, rel=1e-9)
