import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squidmag.circuit import CircuitParams, SquidElement, josephson_inductance
from squidmag.constants import PHI0
from squidmag.errors import FieldAboveCritical, NoRationalWithinBound
from squidmag.fluxmap import (
    FieldCalibration,
    FluxState,
    combined_critical_current,
    effective_inductances,
    field_from_bias,
    flux_from_bias,
    gap_suppression_factor,
    modulation_period,
)

CAL = FieldCalibration(b=52e-3, i0=418e-9, ibc=19.20e-3)


class TestFieldFromBias:
    def test_offset_cancellation(self):
        assert field_from_bias(CAL, 418e-9) == 0.0

    def test_linearity(self):
        cal = FieldCalibration(b=52e-3, i0=0.0, ibc=19.20e-3)
        assert field_from_bias(cal, 1e-3) == pytest.approx(52e-6, rel=1e-12)

    def test_zero_bias_gives_negative_offset_field(self):
        assert field_from_bias(CAL, 0.0) == pytest.approx(-21.736e-9, rel=1e-4)


class TestFluxFromBias:
    def test_zero_at_offset(self):
        fs = flux_from_bias(CAL, 50e-12, 140e-12, 418e-9)
        assert fs.phi1 == 0.0 and fs.phi2 == 0.0

    def test_one_modulation_period_advances_by_about_one(self):
        # one period current advances phi1 by ~1; the 1.7% residual is the
        # SEM loop-area uncertainty folded into the nominal b
        cal = FieldCalibration(b=52e-3, i0=0.0, ibc=19.20e-3)
        fs = flux_from_bias(cal, 50e-12, 140e-12, 0.782e-3)
        assert fs.phi1 == pytest.approx(0.98325, abs=1e-4)
        assert fs.phi1 == pytest.approx(1.0, rel=2e-2)

    @given(st.floats(-5e-3, 5e-3))
    @settings(max_examples=100)
    def test_ratio_homogeneity(self, ib):
        fs = flux_from_bias(CAL, 50e-12, 140e-12, ib)
        if fs.phi1 != 0.0:
            assert fs.phi2 / fs.phi1 == pytest.approx(2.8, rel=1e-9)

    @given(st.floats(-2e-3, 2e-3))
    @settings(max_examples=100)
    def test_affine_doubling(self, ib):
        fs1 = flux_from_bias(CAL, 50e-12, 140e-12, ib)
        ib2 = CAL.i0 + 2.0 * (ib - CAL.i0)
        fs2 = flux_from_bias(CAL, 50e-12, 140e-12, ib2)
        assert fs2.phi1 == pytest.approx(2.0 * fs1.phi1, rel=1e-12, abs=1e-300)
        assert fs2.phi2 == pytest.approx(2.0 * fs1.phi2, rel=1e-12, abs=1e-300)


def _sym_squid(area):
    return SquidElement(lj0=322e-12, d=0.0, c=722e-15, area=area)


class TestCombinedCriticalCurrent:
    def test_joint_maximum(self):
        s = _sym_squid(50e-12)
        ic = combined_critical_current(s, s, FluxState(0.0, 0.0))
        assert ic == pytest.approx(PHI0 / (2 * math.pi * 322e-12), rel=1e-12)

    def test_min_rule(self):
        s = _sym_squid(50e-12)
        assert combined_critical_current(s, s, FluxState(0.5, 0.0)) == 0.0

    def test_period_three_for_ratio_eight_thirds(self):
        s1 = _sym_squid(30e-12)
        s2 = _sym_squid(80e-12)
        r = 80.0 / 30.0  # = 8/3
        phi = np.arange(0.0, 3.0, 1e-4)

        def response(p1):
            return np.array(
                [combined_critical_current(s1, s2, FluxState(x, r * x)) for x in p1]
            )

        base = response(phi)
        assert np.max(np.abs(response(phi + 3.0) - base)) < 1e-9 * base.max()
        for shift in (1.0, 2.0):
            assert np.max(np.abs(response(phi + shift) - base)) > 0.05 * base.max()


class TestModulationPeriod:
    def test_trivial_unity_ratio(self):
        p = modulation_period(1.0, tol=0.0)
        assert (p.a, p.b, p.period_phi0) == (1, 1, 1)

    def test_eight_thirds_exact(self):
        p = modulation_period("8/3", tol=0.0)
        assert (p.a, p.b, p.period_phi0) == (8, 3, 3)

    def test_reference_ratio(self):
        p = modulation_period(2.8048, tol=1e-9)
        assert (p.a, p.b) == (1753, 625)
        # the default tolerance resolves the same fraction
        assert modulation_period(2.8048).b == 625
        # Fraction("2.8048") reduces by gcd 16 from 28048/10000
        assert Fraction("2.8048") == Fraction(28048, 10000) == Fraction(1753, 625)

    def test_integer_ratio(self):
        assert modulation_period(3.0, tol=0.0).period_phi0 == 1

    def test_period_field(self):
        p = modulation_period(2.8048, area1=50e-12)
        assert p.period_field == pytest.approx(625 * PHI0 / 50e-12, rel=1e-12)
        assert p.period_field == pytest.approx(25.8e-3, rel=1e-2)

    def test_semiconvergent_beats_convergents(self):
        # within +-0.08 of 0.4 the smallest denominator is 1/3, which is a
        # semiconvergent of 2/5 but not a convergent
        p = modulation_period(0.4, tol=0.08)
        assert (p.a, p.b) == (1, 3)

    def test_no_rational_within_bound(self):
        with pytest.raises(NoRationalWithinBound):
            modulation_period(math.pi, tol=0.0, max_denominator=10**4)

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(42)
        tol = 1e-6
        max_den = 10**4
        for _ in range(200):
            q = int(rng.integers(1, max_den + 1))
            p_num = int(rng.integers(1, 8 * q))
            r = p_num / q
            got = modulation_period(r, tol=tol, max_denominator=max_den)
            # exhaustive scan over denominators, smallest first
            dens = np.arange(1, max_den + 1)
            nums = np.rint(r * dens)
            err = np.abs(nums / dens - r)
            b_expected = int(dens[np.argmax(err <= tol)])
            a_expected = int(round(r * b_expected))
            g = math.gcd(a_expected, b_expected)
            assert (got.a, got.b) == (a_expected // g, b_expected // g)

    def test_validation(self):
        with pytest.raises(ValueError):
            modulation_period(-1.0)
        with pytest.raises(ValueError):
            modulation_period(2.8, tol=-1.0)


class TestGapSuppression:
    def test_endpoints(self):
        assert gap_suppression_factor(0.0, 1e-3) == 1.0
        assert gap_suppression_factor(1e-3, 1e-3) == 0.0

    def test_closed_form_point(self):
        bc = 1e-3
        got = gap_suppression_factor(bc / math.sqrt(3.0), bc)
        assert got == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_field_above_critical(self):
        with pytest.raises(FieldAboveCritical):
            gap_suppression_factor(1.1e-3, 1e-3)

    @given(st.floats(0.0, 0.999))
    @settings(max_examples=100)
    def test_monotone_decreasing(self, x):
        bc = 1e-3
        assert gap_suppression_factor(x * bc, bc) >= gap_suppression_factor(
            min((x + 1e-3), 1.0) * bc, bc
        )


class TestEffectiveInductances:
    DEVICE = CircuitParams(
        squid1=SquidElement(lj0=322e-12, d=0.149, c=722e-15, area=50e-12),
        squid2=SquidElement(lj0=324e-12, d=0.184, c=718e-15, area=140e-12),
        cshunt=71e-15,
    )

    def test_zero_effective_field(self):
        l1, l2 = effective_inductances(self.DEVICE, CAL, CAL.i0)
        assert l1 == pytest.approx(322e-12, rel=1e-12)
        assert l2 == pytest.approx(324e-12, rel=1e-12)

    def test_gap_rescaling_against_flux_only(self):
        # bias chosen so the effective field is Bc / sqrt(3)
        ib = CAL.i0 + CAL.critical_field / math.sqrt(3.0) / CAL.b
        fs = flux_from_bias(CAL, 50e-12, 140e-12, ib)
        l1, l2 = effective_inductances(self.DEVICE, CAL, ib)
        scale = 1.0 / math.sqrt(0.5)
        assert l1 == pytest.approx(
            scale * josephson_inductance(self.DEVICE.squid1, fs.phi1), rel=1e-12
        )
        assert l2 == pytest.approx(
            scale * josephson_inductance(self.DEVICE.squid2, fs.phi2), rel=1e-12
        )

    def test_monotone_in_field_at_fixed_flux(self):
        # compare two calibrations that put different fields at the same flux
        ib = CAL.i0 + 1e-3
        weak = FieldCalibration(b=52e-3, i0=CAL.i0, ibc=100e-3)
        strong = FieldCalibration(b=52e-3, i0=CAL.i0, ibc=10e-3)
        l1_weak, l2_weak = effective_inductances(self.DEVICE, weak, ib)
        l1_strong, l2_strong = effective_inductances(self.DEVICE, strong, ib)
        assert l1_strong > l1_weak and l2_strong > l2_weak

    def test_propagates_field_above_critical(self):
        with pytest.raises(FieldAboveCritical):
            effective_inductances(self.DEVICE, CAL, CAL.i0 + 2 * CAL.ibc)


class TestValidation:
    def test_calibration_invariants(self):
        with pytest.raises(ValueError):
            FieldCalibration(b=0.0, i0=0.0, ibc=1e-3)
        with pytest.raises(ValueError):
            FieldCalibration(b=52e-3, i0=0.0, ibc=-1e-3)
