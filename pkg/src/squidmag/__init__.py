"""Modeling, fitting, and noise analysis for a two-SQUID microwave
magnetometer: forward physics from bias current to mode frequencies and
reflection coefficient, and inverse routines for parameter fitting,
absolute-flux determination, and noise-equivalent-field analysis."""

from .circuit import (
    CircuitParams,
    DerivedEnergies,
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
from .constants import CODATA, PHI0, PhysicalConstants
from .errors import (
    DivergentInductance,
    FieldAboveCritical,
    InsufficientSpan,
    NoCandidate,
    NonConvergence,
    NoRationalWithinBound,
    PoleProximity,
    SlopeMismatch,
    SquidmagError,
    ZeroResponsivity,
)
from .estimate import (
    Branch,
    FitResult,
    FluxCandidate,
    ModelParams,
    SpectroscopyPoint,
    fit_spectrum,
    fit_spectrum_staged,
    forward_spectrum,
    invert_flux,
    model_frequencies,
    offset_field,
)
from .fluxmap import (
    FieldCalibration,
    FluxState,
    ModulationPeriod,
    combined_critical_current,
    effective_inductances,
    field_from_bias,
    flux_from_bias,
    gap_suppression_factor,
    modulation_period,
)
from .noise import (
    ComplexTrace,
    FrequencyTrace,
    NoiseModel,
    SpectralDensity,
    average_asd,
    extract_frequency_trace,
    field_asd,
    fit_noise_model,
    flux_asd,
    responsivity,
    synthesize_trace,
)
from .response import (
    DriveSettings,
    ResonanceParams,
    calibrate_attenuation,
    rabi_from_power,
    reflection,
)

__version__ = "0.1.0"
