"""Physical constants used throughout the package (2019 SI exact values)."""

from dataclasses import dataclass

H = 6.62607015e-34  # Planck constant, J s
E_CHARGE = 1.602176634e-19  # elementary charge, C
HBAR = H / 6.283185307179586476925287  # J s
PHI0 = H / (2.0 * E_CHARGE)  # magnetic flux quantum h/(2e), Wb


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of the constants entering the circuit and noise models."""

    flux_quantum: float = PHI0
    planck: float = H
    electron_charge: float = E_CHARGE
    hbar: float = HBAR


CODATA = PhysicalConstants()
