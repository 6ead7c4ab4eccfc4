"""Two-level reflection model of a single readout mode.

Close to either transition the single-port reflection coefficient behaves
like that of a saturable two-level system: a circle in the complex plane at
weak drive that flattens into an ellipse as the Rabi frequency grows.  All
rates are stored as angular frequencies (rad/s); quote them as f-values by
dividing by 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import H
from .errors import InsufficientSpan, SlopeMismatch

# Default proportionality between the Rabi frequency and the square root of
# the photon flux arriving at the device.  The power calibration is defined
# relative to this constant; change it consistently on both sides.
RABI_PREFACTOR = 2.0

# Decades of Rabi frequency per dB of drive power under the sqrt(P) law.
_DB_PER_DECADE_SLOPE = 1.0 / 20.0


@dataclass(frozen=True)
class ResonanceParams:
    """Rates and center frequency of one readout transition.

    kappa and gamma are the external and internal energy decay rates,
    gamma_phi the pure dephasing rate, all in rad/s; f0 is in hertz.
    """

    f0: float
    kappa: float
    gamma: float
    gamma_phi: float

    def __post_init__(self):
        if min(self.kappa, self.gamma, self.gamma_phi) < 0:
            raise ValueError("rates must be non-negative")
        if not self.gamma2 > 0:
            raise ValueError("total dephasing rate must be positive")

    @property
    def gamma1(self) -> float:
        """Total energy relaxation rate kappa + gamma, rad/s."""
        return self.kappa + self.gamma

    @property
    def gamma2(self) -> float:
        """Total dephasing rate gamma1/2 + gamma_phi, rad/s."""
        return self.gamma1 / 2.0 + self.gamma_phi


@dataclass(frozen=True)
class DriveSettings:
    """Room-temperature drive power and the line attenuation down to the
    sample; ``rabi`` may carry an externally determined Rabi frequency."""

    f_drive: float
    p_in_dbm: float
    attenuation_db: float
    rabi: float | None = None

    def __post_init__(self):
        if self.rabi is not None and self.rabi < 0:
            raise ValueError("rabi must be non-negative")


def reflection(res: ResonanceParams, delta, rabi):
    """Complex reflection coefficient of the driven two-level transition.

    S11 = 1 - kappa * Gamma1 (Gamma2 + i Delta)
              / (Gamma1 (Gamma2^2 + Delta^2) + Gamma2 Omega_R^2)

    Parameters
    ----------
    res : ResonanceParams
    delta : float or ndarray
        Drive-transition detuning omega_d - omega_0, rad/s.
    rabi : float or ndarray
        Rabi frequency, rad/s.

    Returns
    -------
    complex or ndarray
    """
    d = np.asarray(delta, dtype=float)
    om = np.asarray(rabi, dtype=float)
    g1 = res.gamma1
    g2 = res.gamma2
    num = res.kappa * g1 * (g2 + 1j * d)
    den = g1 * (g2 * g2 + d * d) + g2 * om * om
    out = 1.0 - num / den
    if np.ndim(delta) == 0 and np.ndim(rabi) == 0:
        return complex(out)
    return out


def power_at_device(p_in_dbm: float, attenuation_db: float) -> float:
    """Drive power reaching the sample, in watt."""
    return 10.0 ** ((p_in_dbm - attenuation_db - 30.0) / 10.0)


def rabi_from_power(
    drive: DriveSettings, res: ResonanceParams, prefactor: float = RABI_PREFACTOR
) -> float:
    """Rabi frequency from the room-temperature power and line attenuation.

    Omega_R = prefactor * sqrt(kappa * P_device / (h f0)), proportional to
    the incident drive amplitude.  The prefactor is a documented calibration
    convention; the absolute attenuation recovered by
    :func:`calibrate_attenuation` is meaningful relative to it.
    """
    if not math.isfinite(drive.p_in_dbm):
        raise ValueError("p_in_dbm must be finite")
    p_dev = power_at_device(drive.p_in_dbm, drive.attenuation_db)
    return prefactor * math.sqrt(res.kappa * p_dev / (H * res.f0))


@dataclass(frozen=True)
class AttenuationFit:
    """Result of the input-line power calibration."""

    attenuation_db: float
    fitted_slope: float  # free-slope fit of log10(rabi) vs p_in_dbm
    expected_slope: float
    residual_rms: float  # scatter of per-point attenuation values, dB
    n_points: int


def calibrate_attenuation(
    pairs, res: ResonanceParams, prefactor: float = RABI_PREFACTOR
) -> AttenuationFit:
    """Input-line attenuation from (power, Rabi frequency) measurements.

    Fits log10(Omega_R) against drive power with the slope fixed to
    1/20 dB^-1 (one decade of Rabi frequency per 20 dB, the square-root
    power law); the offset is expressed as an attenuation through the same
    prefactor convention as :func:`rabi_from_power`.

    Parameters
    ----------
    pairs : sequence of (p_in_dbm, rabi_rad_per_s)

    Raises
    ------
    InsufficientSpan
        Fewer than two points, or less than 6 dB of power span.
    SlopeMismatch
        The free-slope fit deviates from 1/20 dB^-1 by more than 10 percent.
    """
    pts = [(float(p), float(w)) for p, w in pairs]
    if len(pts) < 2:
        raise InsufficientSpan("need at least two (power, rabi) pairs")
    p_dbm = np.array([p for p, _ in pts])
    rabi = np.array([w for _, w in pts])
    if np.any(rabi <= 0):
        raise ValueError("rabi values must be positive")
    span = p_dbm.max() - p_dbm.min()
    if span < 6.0:
        raise InsufficientSpan(f"power span {span:.2f} dB < 6 dB")

    slope, _ = np.polyfit(p_dbm, np.log10(rabi), 1)
    if abs(slope - _DB_PER_DECADE_SLOPE) > 0.10 * _DB_PER_DECADE_SLOPE:
        raise SlopeMismatch(
            f"fitted slope {slope:.4f} /dB deviates from sqrt(P) law "
            f"({_DB_PER_DECADE_SLOPE:.4f} /dB) by more than 10%"
        )

    # With the slope pinned, each point yields an attenuation estimate.
    offset = 20.0 * math.log10(prefactor * math.sqrt(res.kappa / (H * res.f0)))
    a_each = p_dbm - 30.0 + offset - 20.0 * np.log10(rabi)
    attenuation = float(np.mean(a_each))
    return AttenuationFit(
        attenuation_db=attenuation,
        fitted_slope=float(slope),
        expected_slope=_DB_PER_DECADE_SLOPE,
        residual_rms=float(np.std(a_each)),
        n_points=len(pts),
    )
