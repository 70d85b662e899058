"""Velocity-averaged visibility and phase.

The frozen reference numbers were produced by tests/_oracles.py (a
trapezoid integrator on a uniform 2e6-point grid with its own unwrap
continuation); a few cases also re-run the oracle live at lower
resolution as a cross-implementation check.
"""

import math

import numpy as np
import pytest

import atomfringe as af
import _oracles as orc
from _support import BEAM, SAG_AMP

T = lambda a, e=1: af.DispersivePhaseTerm(amplitude_at_mean=a, exponent=e)

# reference values, frozen from tests/_oracles.py
EMPTY_VIS = 0.99999999999999878
POL5_UNWRAPPED = -5.0331549829202125
POL5_VIS = 0.89357078012620472
SHIFT_POL5_SAG = -5.036649131023343
GAP_POL10_SAG = -0.013496044099318816
DEEP_UNWRAPPED = -84.480981512873981
DEEP_VIS = 2.0893961294471688e-08
ROBERTS_PHASE = 0.012081309880924184
ROBERTS_VIS = 0.642918882718436


def test_empty_terms():
    ob = af.averaged_fringe([], BEAM)
    assert ob.phase == 0.0
    assert ob.phase_unwrapped == 0.0
    # visibility equals v0 up to the 8-sigma truncation mass
    assert ob.visibility == pytest.approx(EMPTY_VIS, abs=1e-12)
    assert ob.visibility == pytest.approx(1.0, abs=1e-12)


def test_single_term_against_oracle():
    ob = af.averaged_fringe([T(-5.0)], BEAM)
    assert ob.phase_unwrapped == pytest.approx(POL5_UNWRAPPED, abs=1e-12)
    assert ob.visibility == pytest.approx(POL5_VIS, abs=1e-12)
    # live cross-check at reduced oracle resolution
    assert ob.phase_unwrapped == pytest.approx(
        orc.unwrapped_phase([(-5.0, 1)], BEAM.u, BEAM.s_parallel), abs=1e-10
    )


def test_principal_value_and_snap():
    for amp in (-100.0, -30.0, 17.0, -5.0):
        ob = af.averaged_fringe([T(amp)], BEAM)
        assert -math.pi < ob.phase <= math.pi
        k = round((ob.phase_unwrapped - ob.phase) / (2.0 * math.pi))
        # snapped to exactly principal + 2 pi k, no residual offset
        assert ob.phase_unwrapped == ob.phase + 2.0 * math.pi * k


def test_deep_dispersion_against_oracle():
    # visibility five decades down; arg still carries ~8 significant
    # digits (error ~ quadrature_noise / |Z|)
    ob = af.averaged_fringe([T(-100.0)], BEAM)
    assert ob.phase_unwrapped == pytest.approx(DEEP_UNWRAPPED, abs=5e-7)
    assert ob.visibility == pytest.approx(DEEP_VIS, rel=1e-6)


def test_conjugation_symmetry_is_exact():
    plus = af.averaged_fringe([T(7.3)], BEAM)
    minus = af.averaged_fringe([T(-7.3)], BEAM)
    assert plus.phase == -minus.phase
    assert plus.phase_unwrapped == -minus.phase_unwrapped
    assert plus.visibility == minus.visibility


def test_exact_cancellation_pair():
    pair = [T(140.0), T(-140.0)]
    ob = af.averaged_fringe(pair, BEAM)
    empty = af.averaged_fringe([], BEAM)
    assert ob.phase == 0.0
    assert ob.phase_unwrapped == 0.0
    assert ob.visibility == empty.visibility
    assert af.visibility_ratio(pair, BEAM) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("amp", [1.0, 2.0, 3.0])
def test_small_phase_contrast_law(amp):
    got = af.visibility_ratio([T(amp)], BEAM)
    want = orc.small_phase_vis_ratio(amp, BEAM.s_parallel)
    assert got == pytest.approx(want, rel=0.01)


def test_visibility_decay_is_delayed_by_opposing_term():
    # opposite-sign exponent-1 terms partially cancel pointwise, so the
    # contrast at small applied phase stays above the lone-term value
    lone = af.visibility_ratio([T(-1.0)], BEAM)
    with_sag = af.visibility_ratio([T(-1.0), T(SAG_AMP)], BEAM)
    assert with_sag > lone


def test_phase_bounded_by_mean_inverse_velocity():
    sup = af.default_support(BEAM)
    v = np.linspace(sup.v_min, sup.v_max, 200_001)
    mean_uv = np.trapezoid(af.velocity_pdf(BEAM, v) * (BEAM.u / v), v)
    for amp in (-5.0, -25.0, -60.0, 40.0):
        ob = af.averaged_fringe([T(amp)], BEAM)
        assert abs(ob.phase_unwrapped) <= abs(amp) * mean_uv * (1.0 + 1e-12)


def test_measured_shift_protocol():
    got = af.measured_phase_shift([T(-5.0), T(SAG_AMP)], [T(SAG_AMP)], BEAM)
    assert got == pytest.approx(SHIFT_POL5_SAG, abs=1e-12)
    # differs from both the bare amplitude and the lone-term average
    assert abs(got + 5.0) > 1e-2
    assert abs(got - POL5_UNWRAPPED) > 1e-3
    assert af.measured_phase_shift([T(-5.0)], [T(-5.0)], BEAM) == 0.0


def test_measured_shift_narrow_beam_limit():
    narrow = af.BeamModel(u=BEAM.u, s_parallel=5000.0)
    got = af.measured_phase_shift([T(-5.0), T(0.646)], [T(0.646)], narrow)
    assert got == pytest.approx(-5.0, abs=1e-6)


def test_non_additivity_gap():
    gap = af.non_additivity_gap(T(-10.0), T(SAG_AMP), BEAM)
    assert gap == pytest.approx(GAP_POL10_SAG, abs=1e-12)
    assert af.non_additivity_gap(T(0.0), T(SAG_AMP), BEAM) == 0.0
    narrow = af.BeamModel(u=BEAM.u, s_parallel=1000.0)
    assert abs(af.non_additivity_gap(T(-10.0), T(0.646), narrow)) < 1e-6


def test_roberts_mixture_against_oracle():
    mix = [T(-100.0), T(90.0, 1), T(10.0, 2)]
    ob = af.averaged_fringe(mix, BEAM)
    assert ob.phase_unwrapped == pytest.approx(ROBERTS_PHASE, abs=1e-12)
    assert ob.visibility == pytest.approx(ROBERTS_VIS, abs=1e-12)


def test_v0_scales_visibility_only():
    full = af.averaged_fringe([T(-5.0)], BEAM)
    half = af.averaged_fringe([T(-5.0)], BEAM, v0=0.5)
    assert half.visibility == pytest.approx(0.5 * full.visibility, rel=1e-15)
    assert half.phase == full.phase
    assert half.v0_reference == 0.5
    for bad in (0.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            af.averaged_fringe([T(-5.0)], BEAM, v0=bad)


def test_psi_is_reported_not_added():
    plain = af.averaged_fringe([T(-5.0)], BEAM)
    offset = af.averaged_fringe([T(-5.0)], BEAM, psi=0.3)
    assert offset.psi == 0.3
    assert offset.phase == plain.phase
    assert offset.visibility == plain.visibility


def test_doubling_diagnostic_fires_on_coarse_grid():
    # broad beam + large amplitude: 257 nodes cannot resolve the
    # oscillation, the doubling check must say so, and the documented
    # remedy (more nodes) must actually work
    broad = af.BeamModel(u=1065.7, s_parallel=5.0)
    with pytest.raises(af.QuadratureConvergenceError, match="raise node_count"):
        af.averaged_fringe([T(-25.0)], broad)
    sup = af.default_support(broad, node_count=1025)
    ob = af.averaged_fringe([T(-25.0)], broad, support=sup)
    assert ob.visibility < 0.3  # deep but healthy


def test_unwrap_guard_at_the_visibility_floor():
    # |Z| at the quadrature floor: the phase is undefined and must be
    # refused rather than silently invented
    with pytest.raises(af.QuadratureConvergenceError, match="unresolved"):
        af.averaged_fringe([T(-200.0)], BEAM)
    ob = af.averaged_fringe([T(-200.0)], BEAM, unwrap=False)
    assert math.isnan(ob.phase_unwrapped)
    assert ob.visibility < 1e-8
    assert af.visibility_ratio([T(-200.0)], BEAM) < 1e-8


def test_node_doubling_agreement_through_deep_amplitudes():
    worst = 0.0
    for amp in np.arange(-200.0, 201.0, 25.0):
        terms = [T(float(amp))] if amp else []
        zs = []
        for n in (257, 513):
            ob = af.averaged_fringe(
                terms, BEAM, support=af.default_support(BEAM, node_count=n),
                unwrap=False,
            )
            zs.append(ob.visibility * np.exp(1j * ob.phase))
        worst = max(worst, abs(zs[0] - zs[1]))
    assert worst <= 1e-9


def test_quadrature_is_deterministic():
    a = af.averaged_fringe([T(-33.3)], BEAM)
    b = af.averaged_fringe([T(-33.3)], BEAM)
    assert (a.visibility, a.phase, a.phase_unwrapped) == (
        b.visibility, b.phase, b.phase_unwrapped
    )
