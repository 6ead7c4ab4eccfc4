"""Bias current to flux conversion and modulation-period engineering.

The coil bias current maps linearly onto a perpendicular field, which
threads both SQUID loops.  Because the loops share a homogeneous field,
their fluxes are locked to the loop-area ratio r; when r reduces to a
fraction a/b the combined response repeats only after b flux quanta in the
smaller loop.  A two-fluid gap-suppression factor rescales the Josephson
inductances at finite field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circuit import CircuitParams, SquidElement, critical_current, josephson_inductance
from .constants import PHI0
from .errors import FieldAboveCritical, NoRationalWithinBound


@dataclass(frozen=True)
class FieldCalibration:
    """Coil conversion factor and the offset / critical bias currents."""

    b: float  # tesla per ampere
    i0: float  # offset current, A
    ibc: float  # critical bias current, A

    def __post_init__(self):
        if self.b == 0:
            raise ValueError("conversion factor b must be nonzero")
        if not self.ibc > 0:
            raise ValueError("critical bias current must be positive")

    @property
    def critical_field(self) -> float:
        """Critical perpendicular field magnitude |b| * ibc, tesla."""
        return abs(self.b) * self.ibc


@dataclass(frozen=True)
class FluxState:
    """Per-loop flux in units of the flux quantum."""

    phi1: float
    phi2: float


@dataclass(frozen=True)
class ModulationPeriod:
    """Reduced loop-area ratio a/b and the resulting period b * PHI0."""

    a: int
    b: int
    period_phi0: int
    period_field: float | None = None

    def __post_init__(self):
        if math.gcd(self.a, self.b) != 1:
            raise ValueError("a/b must be in lowest terms")
        if self.period_phi0 != self.b:
            raise ValueError("period must equal the reduced denominator")


def field_from_bias(cal: FieldCalibration, ib) -> float:
    """Effective perpendicular field b * (ib - i0), tesla."""
    out = cal.b * (np.asarray(ib, dtype=float) - cal.i0)
    return float(out) if np.ndim(ib) == 0 else out


def flux_from_bias(cal: FieldCalibration, a1: float, a2: float, ib: float) -> FluxState:
    """Per-loop flux (in flux quanta) for loop areas a1, a2 in m^2."""
    if not (a1 > 0 and a2 > 0):
        raise ValueError("loop areas must be positive")
    field = field_from_bias(cal, ib)
    return FluxState(phi1=field * a1 / PHI0, phi2=field * a2 / PHI0)


def combined_critical_current(s1: SquidElement, s2: SquidElement, fs: FluxState):
    """Critical current measured across the series pair: the smaller of the
    two per-SQUID critical currents at the given fluxes."""
    return min(critical_current(s1, fs.phi1), critical_current(s2, fs.phi2))


def _simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """Fraction with the smallest denominator in the closed interval [lo, hi].

    Walks the continued-fraction (Stern-Brocot) expansion of the interval
    endpoints; terminates once an integer falls inside the current interval.
    """
    if lo > hi:
        raise ValueError("empty interval")
    floor_lo = lo.numerator // lo.denominator
    if lo == floor_lo:
        return Fraction(floor_lo)
    if floor_lo + 1 <= hi:
        return Fraction(floor_lo + 1)
    inner = _simplest_between(1 / (hi - floor_lo), 1 / (lo - floor_lo))
    return floor_lo + 1 / inner


def modulation_period(
    r,
    tol: float = 1e-6,
    max_denominator: int = 10**4,
    area1: float | None = None,
) -> ModulationPeriod:
    """Best low-denominator rational approximation of the loop-area ratio.

    Returns the fraction a/b with the smallest denominator satisfying both
    |a/b - r| <= tol and b <= max_denominator; the modulation period is
    b flux quanta in the smaller loop (and b * PHI0 / area1 in tesla when
    the loop area is supplied).

    ``r`` may be a float, an exact ``Fraction``, or a string such as
    ``"8/3"`` or ``"2.8048"``; strings and Fractions are treated exactly,
    which matters when tol is 0 (a float literal like 8/3 is not exactly
    the rational 8/3).

    Raises
    ------
    NoRationalWithinBound
        If the smallest-denominator fraction within tol needs b beyond
        max_denominator.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if max_denominator < 1:
        raise ValueError("max_denominator must be at least 1")
    r_exact = Fraction(r)
    if r_exact <= 0:
        raise ValueError("area ratio must be positive")
    tol_exact = Fraction(tol)
    lo = max(r_exact - tol_exact, Fraction(0))
    hi = r_exact + tol_exact
    best = _simplest_between(lo, hi)
    if best.denominator > max_denominator:
        raise NoRationalWithinBound(
            f"no fraction within {tol} of {r} has denominator <= {max_denominator}"
        )
    period_field = None
    if area1 is not None:
        period_field = best.denominator * PHI0 / area1
    return ModulationPeriod(
        a=best.numerator,
        b=best.denominator,
        period_phi0=best.denominator,
        period_field=period_field,
    )


def gap_suppression_factor(b_perp, bc: float):
    """Two-fluid suppression of the superconducting gap, Delta(B)/Delta(0).

    Returns sqrt((1 - (B/Bc)^2) / (1 + (B/Bc)^2)); 1 at zero field, 0 at
    the critical field.

    Raises
    ------
    FieldAboveCritical
        If |b_perp| exceeds bc anywhere.
    """
    if not bc > 0:
        raise ValueError("critical field must be positive")
    x2 = (np.asarray(b_perp, dtype=float) / bc) ** 2
    if np.any(x2 > 1.0):
        raise FieldAboveCritical("perpendicular field exceeds the critical field")
    out = np.sqrt((1.0 - x2) / (1.0 + x2))
    return float(out) if np.ndim(b_perp) == 0 else out


def effective_inductances(
    params: CircuitParams, cal: FieldCalibration, ib: float
) -> tuple[float, float]:
    """Field- and flux-dependent SQUID inductances at the given bias current.

    The flux modulation of each inductance is combined with a global
    rescaling by the inverse gap-suppression factor: the critical current
    of every junction scales with the gap, so L_J grows as 1/Delta(B).
    """
    fs = flux_from_bias(cal, params.squid1.area, params.squid2.area, ib)
    gap = gap_suppression_factor(field_from_bias(cal, ib), cal.critical_field)
    l1 = josephson_inductance(params.squid1, fs.phi1) / gap
    l2 = josephson_inductance(params.squid2, fs.phi2) / gap
    return l1, l2
