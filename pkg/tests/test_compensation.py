"""Counterphase tuning, residual dispersion, and alpha extraction."""

import math

import pytest

import atomfringe as af
from atomfringe.compensation import _brent_root
from _support import BEAM, CAP, GEO

T = lambda a, e=1: af.DispersivePhaseTerm(amplitude_at_mean=a, exponent=e)

# frozen from tests/_oracles.py
ROBERTS_PHASE = 0.012081309880924184
ROBERTS_VIS = 0.642918882718436


@pytest.mark.parametrize("pol_amp", [-10.0, -100.0, -200.0])
@pytest.mark.parametrize("s_par", [5.0, 7.67, 12.0])
def test_exact_null_over_grid(pol_amp, s_par):
    beam = af.BeamModel(u=BEAM.u, s_parallel=s_par)
    plan = af.tune_counterphase(T(pol_amp), beam, GEO)
    # same u/v shape on both terms: cancellation is pointwise, so the
    # null is exact in floating point, not merely within tolerance
    assert plan.counter_amplitude_at_mean == -pol_amp
    assert plan.residual_phase == 0.0
    assert plan.visibility_ratio_at_null == pytest.approx(1.0, abs=1e-9)


def test_plan_realizes_counter_amplitude():
    plan = af.tune_counterphase(T(-100.0), BEAM, GEO)
    term = af.mirror_sagnac_term(GEO, plan.motion, BEAM)
    assert term.amplitude_at_mean == pytest.approx(100.0, rel=1e-12)
    assert plan.motion.v1 == -plan.motion.v3
    assert plan.motion.v1 == pytest.approx(4.70e-3, rel=0.01)


def test_plan_hardware_numbers():
    plan = af.tune_counterphase(T(-100.0), BEAM, GEO)
    assert af.sustain_time(plan.motion) == pytest.approx(4.3e-3, abs=0.5e-3)
    assert plan.prism_dz_rate == pytest.approx(-1.90e-2, abs=2e-5)
    ratio = af.prism_displacement_ratio(af.PrismGeometry(refractive_index_n=1.46))
    assert plan.prism_dz_rate == pytest.approx(plan.motion.v1 / ratio, rel=1e-14)


def test_plan_report_keys():
    plan = af.tune_counterphase(T(-100.0), BEAM, GEO)
    report = plan.to_report()
    assert report == {
        "counter_amplitude_rad": plan.counter_amplitude_at_mean,
        "v1_m_per_s": plan.motion.v1,
        "v3_m_per_s": plan.motion.v3,
        "max_travel_m": plan.motion.max_travel,
        "sustain_time_s": af.sustain_time(plan.motion),
        "prism_dz_rate_m_per_s": plan.prism_dz_rate,
        "residual_phase_rad": plan.residual_phase,
        "visibility_ratio_at_null": plan.visibility_ratio_at_null,
    }


def test_travel_budget_scales_sustain_time():
    short = af.tune_counterphase(T(-100.0), BEAM, GEO)
    long = af.tune_counterphase(T(-100.0), BEAM, GEO, max_travel=40e-6)
    assert af.sustain_time(long.motion) == pytest.approx(
        2.0 * af.sustain_time(short.motion), rel=1e-12
    )


def test_tune_rejects_wrong_dispersion_order():
    with pytest.raises(ValueError):
        af.tune_counterphase(T(-100.0, 2), BEAM, GEO)


def test_roberts_mixture_residual():
    counter = af.roberts_term(af.RobertsCounterphase(v1_amplitude=90.0, v2_amplitude=10.0))
    phase, vis = af.residual_dispersion(counter, T(-100.0), BEAM)
    assert phase == pytest.approx(ROBERTS_PHASE, abs=1e-12)
    assert vis == pytest.approx(ROBERTS_VIS, abs=1e-12)


def test_pure_v1_counter_leaves_nothing():
    counter = af.roberts_term(af.RobertsCounterphase(v1_amplitude=100.0, v2_amplitude=0.0))
    phase, vis = af.residual_dispersion(counter, T(-100.0), BEAM)
    assert phase == 0.0
    assert vis == pytest.approx(1.0, abs=1e-12)


def test_roberts_residual_grows_with_v2_share():
    # same on-mean cancellation, increasing share carried by the
    # (u/v)^2 term: the mismatch profile v2 * (u/v) * (u/v - 1) grows,
    # so the fringe contrast must fall monotonically (the averaged
    # phase itself is not monotone in v2, it turns over and wraps)
    last = 1.0
    for v2 in (5.0, 10.0, 20.0):
        counter = af.roberts_term(
            af.RobertsCounterphase(v1_amplitude=100.0 - v2, v2_amplitude=v2)
        )
        phase, vis = af.residual_dispersion(counter, T(-100.0), BEAM)
        assert phase != 0.0
        assert vis < last
        last = vis


def test_alpha_round_trip_at_null():
    alpha_seed = 1.3e-30
    voltage = 400.0
    pol = af.polarizability_term(CAP, alpha_seed, voltage, BEAM)
    plan = af.tune_counterphase(pol, BEAM, GEO)
    got = af.extract_alpha_compensated(
        plan.residual_phase,
        plan.motion,
        GEO,
        BEAM.u,
        CAP.geometry_factor_G,
        voltage_U=voltage,
    )
    assert got == pytest.approx(alpha_seed, rel=1e-9)


def test_alpha_insensitive_to_beam_velocity_error():
    # the point of compensation: u multiplies only the tiny residual
    plan = af.tune_counterphase(T(-100.0), BEAM, GEO)
    residual = 1e-3
    base = af.extract_alpha_compensated(
        residual, plan.motion, GEO, BEAM.u, CAP.geometry_factor_G
    )
    off = af.extract_alpha_compensated(
        residual, plan.motion, GEO, 1.01 * BEAM.u, CAP.geometry_factor_G
    )
    assert abs(off - base) / base <= 1e-5


def test_alpha_extraction_validation():
    plan = af.tune_counterphase(T(-100.0), BEAM, GEO)
    with pytest.raises(ValueError):
        af.extract_alpha_compensated(0.0, plan.motion, GEO, BEAM.u, 0.0)
    with pytest.raises(ValueError):
        af.extract_alpha_compensated(
            0.0, plan.motion, GEO, BEAM.u, CAP.geometry_factor_G, voltage_U=0.0
        )


def test_bracketing_root_solver():
    # the tuner's fallback solver, exercised directly since exponent-1
    # inputs short-circuit to the exact analytic null
    f = lambda x: x**3 - 2.0
    root, fval = _brent_root(f, 1.0, 2.0, f(1.0), f(2.0), ytol=1e-14)
    assert root == pytest.approx(2.0 ** (1.0 / 3.0), rel=1e-12)
    assert abs(fval) <= 1e-14
    g = lambda x: math.tanh(x - 0.25)
    root, fval = _brent_root(g, -4.0, 4.0, g(-4.0), g(4.0), ytol=1e-15)
    assert root == pytest.approx(0.25, abs=1e-10)
