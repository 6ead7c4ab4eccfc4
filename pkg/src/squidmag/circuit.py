"""Linearized circuit model of two dc SQUIDs sharing a capacitive shunt.

Each SQUID is a flux-tunable inductance in parallel with the summed
capacitance of its junctions.  The two SQUIDs are connected in series and
shunted by the antenna capacitance; hybridization of the two LC modes
produces the dressed eigenfrequencies f_minus <= f_plus picked up by the
reflection readout.  All routines here are pure functions of their inputs.

Frequencies are handled in hertz at the API boundary.  Intermediate math
uses angular frequencies; conversion happens in exactly one place per
function to avoid stray factors of 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import E_CHARGE, H, PHI0
from .errors import DivergentInductance, PoleProximity

# Fractional distance (in units of the flux quantum) below which a flux
# value is snapped to the analytic half-integer limit.
HALF_INTEGER_TOL = 1e-12

# Default relative detuning |O1 - O2| / (O1 + O2) below which the upper
# (symmetric) mode carries no dipole moment and is invisible at the port.
DARK_MODE_THRESHOLD = 5e-3

# Relative size below which an impedance denominator counts as underflowed.
POLE_REL_TOL = 1e-12


@dataclass(frozen=True)
class SquidElement:
    """One asymmetric dc SQUID.

    Attributes
    ----------
    lj0 : float
        Zero-field Josephson inductance in henry.
    d : float
        Junction critical-current asymmetry, 0 <= d < 1.
    c : float
        Total SQUID capacitance (sum of both junction capacitances), farad.
    area : float
        Loop area in m^2.
    """

    lj0: float
    d: float
    c: float
    area: float

    def __post_init__(self):
        if not self.lj0 > 0:
            raise ValueError("lj0 must be positive")
        if not 0 <= self.d < 1:
            raise ValueError("asymmetry d must lie in [0, 1)")
        if not self.c > 0:
            raise ValueError("capacitance must be positive")
        if not self.area > 0:
            raise ValueError("loop area must be positive")


@dataclass(frozen=True)
class CircuitParams:
    """Two SQUIDs plus the effective shunt capacitance (antenna + coupler)."""

    squid1: SquidElement
    squid2: SquidElement
    cshunt: float

    def __post_init__(self):
        if self.cshunt < 0:
            raise ValueError("cshunt must be non-negative")


@dataclass(frozen=True)
class ModePair:
    """Dressed eigenfrequencies of the coupled circuit, in hertz."""

    f_minus: float
    f_plus: float
    plus_visible: bool = True
    minus_visible: bool = True

    def __post_init__(self):
        if not (self.f_minus > 0 and self.f_plus > 0):
            raise ValueError("mode frequencies must be positive")
        if self.f_minus > self.f_plus:
            raise ValueError("mode ordering violated: f_minus > f_plus")


@dataclass(frozen=True)
class DerivedEnergies:
    """Josephson/charging energies and plasma frequencies, all in hertz
    (energy divided by the Planck constant)."""

    ej1: float
    ej2: float
    ec1: float
    ec2: float
    anharmonicity1: float
    anharmonicity2: float
    fpl1: float
    fpl2: float

    @property
    def min_ej_ec_ratio(self) -> float:
        return min(self.ej1 / self.ec1, self.ej2 / self.ec2)

    def in_transmon_regime(self, min_ratio: float = 50.0) -> bool:
        """Josephson energy dominates charging energy on both SQUIDs."""
        return self.min_ej_ec_ratio > min_ratio


def _flux_factor(phi, d):
    """Critical-current modulation factor sqrt(cos^2 + d^2 sin^2) of pi*phi.

    Equals |cos(pi phi)| sqrt(1 + d^2 tan^2(pi phi)) wherever the latter is
    defined, but stays finite and exact through half-integer flux where it
    takes the analytic limit d.
    """
    x = np.asarray(phi, dtype=float)
    c = np.cos(np.pi * x)
    s = np.sin(np.pi * x)
    m = np.sqrt(c * c + d * d * s * s)
    near_half = np.abs(np.abs(x - np.round(x)) - 0.5) < HALF_INTEGER_TOL
    return np.where(near_half, d, m)


def josephson_inductance(squid: SquidElement, phi):
    """Flux-dependent Josephson inductance of an asymmetric dc SQUID.

    Parameters
    ----------
    squid : SquidElement
    phi : float or ndarray
        Flux through the loop in units of the flux quantum.

    Returns
    -------
    float or ndarray
        Inductance in henry.  At half-integer flux the analytic limit
        lj0 / d is returned.

    Raises
    ------
    DivergentInductance
        If d == 0 and phi sits at a half-integer within machine tolerance.
    """
    x = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("phi must be finite")
    m = _flux_factor(x, squid.d)
    if squid.d == 0.0 and np.any(m == 0.0):
        raise DivergentInductance(
            "symmetric SQUID inductance diverges at half-integer flux"
        )
    out = squid.lj0 / m
    return float(out) if np.ndim(phi) == 0 else out


def critical_current(squid: SquidElement, phi):
    """Flux-modulated critical current, dual to :func:`josephson_inductance`.

    The zero-field value is I_sum = PHI0 / (2 pi lj0), i.e. the sum of both
    junction critical currents, so that I_c(phi) * L_J(phi) = PHI0 / (2 pi)
    for every flux where both are finite.
    """
    ic_sum = PHI0 / (2.0 * np.pi * squid.lj0)
    out = ic_sum * _flux_factor(phi, squid.d)
    return float(out) if np.ndim(phi) == 0 else out


def bare_frequency(squid: SquidElement, cshunt: float, l: float | None = None) -> float:
    """Bare angular eigenfrequency of one SQUID loaded by the shunt.

    Omega = 1 / sqrt(L (C + cshunt)) in rad/s.  ``l`` overrides the
    zero-field inductance (pass a flux-dependent value when needed).
    """
    lval = squid.lj0 if l is None else l
    return 1.0 / math.sqrt(lval * (squid.c + cshunt))


def _beta_complement(params: CircuitParams) -> float:
    """1 - beta, computed without cancellation."""
    cs = params.cshunt
    return cs * cs / ((params.squid1.c + cs) * (params.squid2.c + cs))


def coupling_beta(params: CircuitParams) -> float:
    """Dimensionless capacitive hybridization factor, 0 < beta <= 1.

    beta -> 1 as the shunt capacitance vanishes (decoupled SQUIDs).
    """
    return 1.0 - _beta_complement(params)


def _dressed_omega_sq(w1_sq, w2_sq, beta_complement):
    """Squared dressed angular frequencies from squared bare ones.

    Uses the cancellation-free forms
        w-^2 = 2 w1^2 w2^2 / (S + D),      w+^2 = (S + D) / (2 beta),
    with S = w1^2 + w2^2 and D = sqrt((w1^2 - w2^2)^2 + 4 w1^2 w2^2 (1-beta)).
    """
    s = w1_sq + w2_sq
    disc = (w1_sq - w2_sq) ** 2 + 4.0 * w1_sq * w2_sq * beta_complement
    droot = np.sqrt(disc)
    w_minus_sq = 2.0 * w1_sq * w2_sq / (s + droot)
    w_plus_sq = (s + droot) / (2.0 * (1.0 - beta_complement))
    return w_minus_sq, w_plus_sq


def eigenfrequencies(
    params: CircuitParams,
    l1: float,
    l2: float,
    dark_mode_threshold: float = DARK_MODE_THRESHOLD,
) -> ModePair:
    """Dressed eigenfrequencies of the two-SQUID tank circuit, in hertz.

    Parameters
    ----------
    params : CircuitParams
    l1, l2 : float
        Current (flux- and field-dependent) SQUID inductances in henry.
    dark_mode_threshold : float
        Relative bare-mode detuning below which the upper mode is flagged
        invisible (zero net dipole moment at SQUID-SQUID degeneracy).
    """
    cs = params.cshunt
    w1 = bare_frequency(params.squid1, cs, l1)
    w2 = bare_frequency(params.squid2, cs, l2)
    wm_sq, wp_sq = _dressed_omega_sq(w1 * w1, w2 * w2, _beta_complement(params))
    detuning = abs(w1 - w2) / (w1 + w2)
    return ModePair(
        f_minus=math.sqrt(wm_sq) / (2.0 * math.pi),
        f_plus=math.sqrt(wp_sq) / (2.0 * math.pi),
        plus_visible=bool(detuning >= dark_mode_threshold),
        minus_visible=True,
    )


def _squid_chain_impedance(params: CircuitParams, l1, l2, omega):
    """Series impedance of the two parallel-LC SQUID blocks (complex ohm)."""
    w = np.asarray(omega, dtype=float)
    d1 = 1.0 - w * w * l1 * params.squid1.c
    d2 = 1.0 - w * w * l2 * params.squid2.c
    with np.errstate(divide="ignore", invalid="ignore"):
        z = 1j * w * l1 / d1 + 1j * w * l2 / d2
    return z


def branch_admittance(params: CircuitParams, l1, l2, omega):
    """Admittance of the shunted SQUID branch, j w cshunt + 1/Z_chain.

    Its zeros are the circuit eigenfrequencies.  The value diverges at the
    chain antiresonances; callers probing near those points should test for
    finiteness.  Accepts scalar or array ``omega`` (rad/s).
    """
    w = np.asarray(omega, dtype=float)
    zsq = _squid_chain_impedance(params, l1, l2, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = 1j * w * params.cshunt + 1.0 / zsq
    return complex(y) if np.ndim(omega) == 0 else y


def input_impedance(
    params: CircuitParams,
    l1: float,
    l2: float,
    omega: float,
    cc: float | None = None,
) -> complex:
    """Input impedance of the circuit as seen from the readout port.

    With ``cc`` given (series coupling capacitance, 0 < cc <= cshunt), the
    full composition 1/(j w cc) + 1/(j w (cshunt - cc) + 1/Z_chain) is
    returned, and the eigenfrequencies are its zeros; the zero locations do
    not depend on how the effective shunt splits into cc and the antenna
    capacitance. With ``cc=None`` (the folded convention used throughout the
    fit, where only the sum is identifiable) the impedance across the fully
    shunted branch is returned, and the eigenfrequencies appear as its poles
    instead, i.e. as zeros of :func:`branch_admittance`.

    Raises
    ------
    PoleProximity
        If a denominator underflows (evaluation at a network pole).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    w2 = omega * omega
    for lval, squid in ((l1, params.squid1), (l2, params.squid2)):
        if abs(1.0 - w2 * lval * squid.c) < POLE_REL_TOL:
            raise PoleProximity("evaluation at a SQUID plasma pole")
    zsq = _squid_chain_impedance(params, l1, l2, omega)
    if cc is None:
        den = 1j * omega * params.cshunt + 1.0 / zsq
        if abs(den) < POLE_REL_TOL * omega * params.cshunt or not np.isfinite(abs(den)):
            raise PoleProximity("branch admittance underflow at eigenmode")
        return complex(1.0 / den)
    if not 0 < cc <= params.cshunt:
        raise ValueError("cc must satisfy 0 < cc <= cshunt")
    cs = params.cshunt - cc
    den = 1j * omega * cs + 1.0 / zsq
    if abs(den) == 0.0 or not np.isfinite(abs(den)):
        raise PoleProximity("shunted-branch admittance underflow")
    return complex(1.0 / (1j * omega * cc) + 1.0 / den)


def derived_energies(params: CircuitParams) -> DerivedEnergies:
    """Zero-field Josephson/charging energies and plasma frequencies.

    Charging energies use the effective capacitances obtained from the
    capacitance matrix of the three-node network:
        C1' = C*^2 / (C2 + cshunt),  C2' = C*^2 / (C1 + cshunt),
        C*^2 = C1 C2 + (C1 + C2) cshunt.
    The anharmonicity of each weakly nonlinear mode is -E_c / h.
    """
    c1 = params.squid1.c
    c2 = params.squid2.c
    cs = params.cshunt
    cstar_sq = c1 * c2 + (c1 + c2) * cs
    c1_eff = cstar_sq / (c2 + cs)
    c2_eff = cstar_sq / (c1 + cs)
    ec1 = E_CHARGE**2 / (2.0 * c1_eff) / H
    ec2 = E_CHARGE**2 / (2.0 * c2_eff) / H
    ej1 = PHI0**2 / (4.0 * math.pi**2 * params.squid1.lj0) / H
    ej2 = PHI0**2 / (4.0 * math.pi**2 * params.squid2.lj0) / H
    fpl1 = 1.0 / (2.0 * math.pi * math.sqrt(params.squid1.lj0 * c1))
    fpl2 = 1.0 / (2.0 * math.pi * math.sqrt(params.squid2.lj0 * c2))
    return DerivedEnergies(
        ej1=ej1,
        ej2=ej2,
        ec1=ec1,
        ec2=ec2,
        anharmonicity1=-ec1,
        anharmonicity2=-ec2,
        fpl1=fpl1,
        fpl2=fpl2,
    )
