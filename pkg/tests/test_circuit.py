import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import impedance_roots, random_circuit
from squidmag.circuit import (
    CircuitParams,
    ModePair,
    SquidElement,
    bare_frequency,
    branch_admittance,
    coupling_beta,
    critical_current,
    derived_energies,
    eigenfrequencies,
    input_impedance,
    josephson_inductance,
)
from squidmag.constants import E_CHARGE, H, PHI0
from squidmag.errors import DivergentInductance, PoleProximity

SQUID1 = SquidElement(lj0=322e-12, d=0.149, c=722e-15, area=50e-12)
SQUID2 = SquidElement(lj0=324e-12, d=0.184, c=718e-15, area=140e-12)
DEVICE = CircuitParams(squid1=SQUID1, squid2=SQUID2, cshunt=71e-15)


def raw_inductance(lj0, d, phi):
    """Direct textbook form, undefined at half-integer flux."""
    return lj0 / (
        abs(math.cos(math.pi * phi))
        * math.sqrt(1.0 + d * d * math.tan(math.pi * phi) ** 2)
    )


class TestJosephsonInductance:
    def test_zero_flux(self):
        assert josephson_inductance(SQUID1, 0.0) == pytest.approx(322e-12, rel=1e-15)

    def test_symmetric_quarter_flux(self):
        squid = SquidElement(lj0=1.0, d=0.0, c=1e-15, area=1e-12)
        assert josephson_inductance(squid, 0.25) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_half_flux_analytic_limit(self):
        # the limit of the raw expression approaching phi = 1/2 from both sides
        for eps in (1e-8, -1e-8):
            assert raw_inductance(322e-12, 0.149, 0.5 + eps) == pytest.approx(
                322e-12 / 0.149, rel=1e-6
            )
        assert josephson_inductance(SQUID1, 0.5) == pytest.approx(
            322e-12 / 0.149, rel=1e-12
        )

    def test_divergence_for_symmetric_squid(self):
        squid = SquidElement(lj0=322e-12, d=0.0, c=722e-15, area=50e-12)
        with pytest.raises(DivergentInductance):
            josephson_inductance(squid, 0.5)
        with pytest.raises(DivergentInductance):
            josephson_inductance(squid, -3.5)
        # a flux 1e-8 away from the half-integer is still finite
        assert np.isfinite(josephson_inductance(squid, 0.5 + 1e-8))

    def test_rejects_non_finite_flux(self):
        with pytest.raises(ValueError):
            josephson_inductance(SQUID1, float("nan"))

    @given(st.floats(-25.0, 25.0))
    @settings(max_examples=200)
    def test_periodic_and_even(self, phi):
        base = josephson_inductance(SQUID1, phi)
        assert josephson_inductance(SQUID1, phi + 1.0) == pytest.approx(base, rel=1e-9)
        assert josephson_inductance(SQUID1, -phi) == pytest.approx(base, rel=1e-9)


class TestCriticalCurrent:
    def test_symmetric_maximum(self):
        squid = SquidElement(lj0=322e-12, d=0.0, c=722e-15, area=50e-12)
        ic_sum = PHI0 / (2 * math.pi * 322e-12)
        assert critical_current(squid, 0.0) == pytest.approx(ic_sum, rel=1e-12)
        # 1.0222 uA for the 322 pH reference value
        assert ic_sum == pytest.approx(1.0222e-6, rel=1e-3)

    def test_full_destructive_interference(self):
        squid = SquidElement(lj0=322e-12, d=0.0, c=722e-15, area=50e-12)
        assert critical_current(squid, 0.5) == 0.0

    @given(st.floats(-10.0, 10.0))
    @settings(max_examples=200)
    def test_duality_with_inductance(self, phi):
        product = critical_current(SQUID1, phi) * josephson_inductance(SQUID1, phi)
        assert product == pytest.approx(PHI0 / (2 * math.pi), rel=1e-12)


class TestBareFrequencyAndBeta:
    def test_unit_circuit(self):
        squid = SquidElement(lj0=1.0, d=0.0, c=1.0, area=1e-12)
        assert bare_frequency(squid, 0.0) == pytest.approx(1.0, rel=1e-15)

    def test_reference_loaded_frequency(self):
        # 322 pH loaded by 722 + 71 fF sits near 9.96 GHz
        omega = bare_frequency(SQUID1, 71e-15)
        assert omega / (2 * math.pi) == pytest.approx(9.95e9, rel=5e-3)

    def test_reference_plasma_frequency(self):
        omega = bare_frequency(SQUID1, 0.0)
        assert omega / (2 * math.pi) == pytest.approx(10.438e9, rel=1e-4)

    def test_beta_no_shunt(self):
        params = CircuitParams(squid1=SQUID1, squid2=SQUID2, cshunt=0.0)
        assert coupling_beta(params) == 1.0

    @given(st.floats(100e-15, 2000e-15), st.floats(1e-15, 300e-15))
    @settings(max_examples=100)
    def test_beta_equal_capacitance_identity(self, c, cs):
        s1 = SquidElement(lj0=322e-12, d=0.1, c=c, area=50e-12)
        params = CircuitParams(squid1=s1, squid2=s1, cshunt=cs)
        assert coupling_beta(params) == pytest.approx(
            1.0 - cs**2 / (c + cs) ** 2, rel=1e-12
        )

    def test_beta_reference_value(self):
        # direct evaluation: 1 - 71^2 / (793 * 789)
        assert coupling_beta(DEVICE) == pytest.approx(0.991943127, abs=1e-5)


class TestEigenfrequencies:
    def test_symmetric_reduction(self):
        l, c, cs = 300e-12, 700e-15, 80e-15
        squid = SquidElement(lj0=l, d=0.1, c=c, area=50e-12)
        params = CircuitParams(squid1=squid, squid2=squid, cshunt=cs)
        pair = eigenfrequencies(params, l, l)
        f_plus_expected = 1.0 / (2 * math.pi * math.sqrt(l * c))
        f_minus_expected = 1.0 / (2 * math.pi * math.sqrt(l * (c + 2 * cs)))
        assert pair.f_plus == pytest.approx(f_plus_expected, rel=1e-12)
        assert pair.f_minus == pytest.approx(f_minus_expected, rel=1e-12)
        assert not pair.plus_visible  # degenerate: upper mode is dark

    def test_decoupling_limit(self):
        rng = np.random.default_rng(7)
        params0 = random_circuit(rng)
        l1, l2 = params0.squid1.lj0, params0.squid2.lj0
        prev_err = None
        for cs in [100e-15, 10e-15, 1e-15, 0.1e-15, 0.01e-15]:
            params = CircuitParams(params0.squid1, params0.squid2, cs)
            pair = eigenfrequencies(params, l1, l2)
            bare = sorted(
                [
                    bare_frequency(params.squid1, cs, l1) / (2 * math.pi),
                    bare_frequency(params.squid2, cs, l2) / (2 * math.pi),
                ]
            )
            err = abs(pair.f_minus - bare[0]) / bare[0] + abs(pair.f_plus - bare[1]) / bare[1]
            if prev_err is not None:
                assert err < prev_err
            prev_err = err
        assert prev_err < 1e-6

    def test_reference_zero_flux_range(self):
        pair = eigenfrequencies(DEVICE, 322e-12, 324e-12)
        assert 9.5e9 <= pair.f_minus <= pair.f_plus <= 10.5e9

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_ordering_and_positivity(self, seed):
        rng = np.random.default_rng(seed)
        params = random_circuit(rng)
        pair = eigenfrequencies(params, params.squid1.lj0, params.squid2.lj0)
        assert 0 < pair.f_minus <= pair.f_plus

    def test_dark_mode_flag_threshold(self):
        l, c, cs = 300e-12, 700e-15, 80e-15
        squid = SquidElement(lj0=l, d=0.1, c=c, area=50e-12)
        params = CircuitParams(squid1=squid, squid2=squid, cshunt=cs)
        assert not eigenfrequencies(params, l, l).plus_visible
        assert eigenfrequencies(params, l, 1.3 * l).plus_visible
        # threshold is configurable
        assert eigenfrequencies(params, l, l, dark_mode_threshold=0.0).plus_visible


class TestInputImpedance:
    def test_capacitive_divergence_at_low_frequency(self):
        z_lo = input_impedance(DEVICE, 322e-12, 324e-12, 1e3, cc=30e-15)
        z_mid = input_impedance(DEVICE, 322e-12, 324e-12, 2 * math.pi * 5e9, cc=30e-15)
        assert abs(z_lo) > 1e6 * abs(z_mid)

    def test_branch_susceptance_zero_at_modes(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            params = random_circuit(rng)
            l1, l2 = params.squid1.lj0, params.squid2.lj0
            roots = impedance_roots(params, l1, l2)
            assert len(roots) == 2
            pair = eigenfrequencies(params, l1, l2)
            assert roots[0] == pytest.approx(pair.f_minus, rel=1e-9)
            assert roots[1] == pytest.approx(pair.f_plus, rel=1e-9)

    def test_full_impedance_zero_independent_of_split(self):
        params = CircuitParams(
            squid1=SQUID1,
            squid2=SquidElement(lj0=450e-12, d=0.184, c=718e-15, area=140e-12),
            cshunt=71e-15,
        )
        pair = eigenfrequencies(params, params.squid1.lj0, params.squid2.lj0)
        for f in (pair.f_minus, pair.f_plus):
            w = 2 * math.pi * f
            z_ref = abs(input_impedance(params, params.squid1.lj0, params.squid2.lj0, 0.9 * w, cc=20e-15))
            for cc in (10e-15, 30e-15, 60e-15):
                z = input_impedance(params, params.squid1.lj0, params.squid2.lj0, w, cc=cc)
                assert abs(z) < 1e-6 * z_ref

    def test_symmetric_chain_contribution_vanishes_at_plasma(self):
        l, c, cs = 300e-12, 700e-15, 80e-15
        squid = SquidElement(lj0=l, d=0.1, c=c, area=50e-12)
        params = CircuitParams(squid1=squid, squid2=squid, cshunt=cs)
        w = 1.0 / math.sqrt(l * c) * (1 + 1e-9)
        y = branch_admittance(params, l, l, w)
        # the SQUID-chain admittance term is negligible against the shunt
        assert abs(y - 1j * w * cs) < 1e-6 * abs(y)

    def test_pole_proximity(self):
        l, c = 322e-12, 722e-15
        with pytest.raises(PoleProximity):
            input_impedance(DEVICE, l, 324e-12, 1.0 / math.sqrt(l * c))

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            input_impedance(DEVICE, 322e-12, 324e-12, 0.0)


class TestDerivedEnergies:
    def test_reference_values(self):
        de = derived_energies(DEVICE)
        # charging energies from the capacitance matrix
        assert de.ec1 == pytest.approx(24.6e6, abs=0.1e6)
        assert de.ec2 == pytest.approx(24.7e6, abs=0.1e6)
        assert de.ec1 == pytest.approx(24.6249e6, rel=1e-4)
        assert de.ec2 == pytest.approx(24.7498e6, rel=1e-4)
        # Josephson energies
        assert de.ej1 == pytest.approx(507e9, abs=1e9)
        assert de.ej2 == pytest.approx(504e9, abs=1e9)
        # plasma frequencies
        assert de.fpl1 == pytest.approx(10.438e9, abs=1e6)
        assert de.fpl2 == pytest.approx(10.435e9, abs=1e6)
        # anharmonicity approximately -E_c/h
        assert de.anharmonicity1 == -de.ec1

    def test_deep_transmon_regime(self):
        de = derived_energies(DEVICE)
        assert de.min_ej_ec_ratio > 1e4
        assert de.in_transmon_regime()

    def test_charging_energy_oracle(self):
        # independent path: invert the full 2x2 capacitance matrix
        c1, c2, cs = 722e-15, 718e-15, 71e-15
        cap = np.array([[c1 + cs, -cs], [-cs, c2 + cs]])
        inv = np.linalg.inv(cap)
        ec1 = E_CHARGE**2 / 2.0 * inv[0, 0] / H
        ec2 = E_CHARGE**2 / 2.0 * inv[1, 1] / H
        de = derived_energies(DEVICE)
        assert de.ec1 == pytest.approx(ec1, rel=1e-12)
        assert de.ec2 == pytest.approx(ec2, rel=1e-12)


class TestValidation:
    def test_squid_invariants(self):
        with pytest.raises(ValueError):
            SquidElement(lj0=-1.0, d=0.1, c=1e-15, area=1e-12)
        with pytest.raises(ValueError):
            SquidElement(lj0=1e-12, d=1.0, c=1e-15, area=1e-12)

    def test_mode_pair_ordering(self):
        with pytest.raises(ValueError):
            ModePair(f_minus=2.0, f_plus=1.0)
