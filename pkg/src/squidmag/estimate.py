"""Forward spectrum synthesis, the 11-parameter model fit, and absolute-flux
inversion within one modulation period.

The forward model composes the bias-to-flux chain with the dressed
eigenfrequencies.  Only bias-space quantities enter the model: phi1 scales
as (ib - i0)/ip, phi2 = r * phi1, and the gap-suppression argument is
(ib - i0)/ibc, so the predicted spectrum is independent of the absolute
loop areas.  Absolute field quantities come in only through the SEM loop
area when converting fitted currents to tesla.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .circuit import (
    DARK_MODE_THRESHOLD,
    CircuitParams,
    DerivedEnergies,
    ModePair,
    SquidElement,
    _beta_complement,
    _dressed_omega_sq,
    _flux_factor,
    derived_energies,
)
from .constants import PHI0
from .errors import FieldAboveCritical, NoCandidate, NonConvergence
from .fluxmap import FieldCalibration, modulation_period
from .optimize import covariance_from_jacobian, levenberg_marquardt

PARAM_NAMES = ("l1", "l2", "c1", "c2", "cshunt", "r", "d1", "d2", "ip", "i0", "ibc")

# SEM loop area of the smaller SQUID; the only externally supplied absolute
# scale in the field calibration.
DEFAULT_LOOP_AREA1 = 50e-12  # m^2


class Branch(str, Enum):
    MINUS = "minus"
    PLUS = "plus"


@dataclass(frozen=True)
class SpectroscopyPoint:
    """One extracted eigenfrequency at one bias current."""

    ib: float
    freq: float
    branch: Branch
    weight: float = 1.0

    def __post_init__(self):
        if not self.freq > 0:
            raise ValueError("frequency must be positive")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")


@dataclass(frozen=True)
class ModelParams:
    """The 11 fitted device parameters.

    Inductances and capacitances in henry/farad, currents in ampere;
    r is the loop-area ratio and d1, d2 the junction asymmetries.
    """

    l1: float
    l2: float
    c1: float
    c2: float
    cshunt: float
    r: float
    d1: float
    d2: float
    ip: float
    i0: float
    ibc: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    @classmethod
    def from_array(cls, x) -> "ModelParams":
        return cls(**dict(zip(PARAM_NAMES, (float(v) for v in x))))

    def circuit_params(self, area1: float = DEFAULT_LOOP_AREA1) -> CircuitParams:
        return CircuitParams(
            squid1=SquidElement(lj0=self.l1, d=self.d1, c=self.c1, area=area1),
            squid2=SquidElement(lj0=self.l2, d=self.d2, c=self.c2, area=self.r * area1),
            cshunt=self.cshunt,
        )

    def field_calibration(self, area1: float = DEFAULT_LOOP_AREA1) -> FieldCalibration:
        return FieldCalibration(
            b=PHI0 / (self.ip * area1), i0=self.i0, ibc=self.ibc
        )


# Fitted parameters of the reference device this package was developed
# against; convenient as a realistic default and as ground truth for
# synthetic round-trip tests.
REFERENCE_PARAMS = ModelParams(
    l1=322e-12,
    l2=324e-12,
    c1=722e-15,
    c2=718e-15,
    cshunt=71e-15,
    r=2.8048,
    d1=0.149,
    d2=0.184,
    ip=0.782e-3,
    i0=418e-9,
    ibc=19.20e-3,
)

# Pre-fit estimates (SEM imaging, FEM simulation of the antenna, and a
# first glance at the measured modulation) used to seed the fit.
INITIAL_GUESS = ModelParams(
    l1=360e-12,
    l2=360e-12,
    c1=700e-15,
    c2=700e-15,
    cshunt=62e-15,
    r=2.8,
    d1=0.14,
    d2=0.14,
    ip=0.83e-3,
    i0=100e-9,
    ibc=20e-3,
)

PARAM_DESCRIPTIONS = {
    "l1": "inductance SQUID 1",
    "l2": "inductance SQUID 2",
    "c1": "capacitance SQUID 1",
    "c2": "capacitance SQUID 2",
    "cshunt": "effective shunt capacitance",
    "r": "SQUID loop area ratio",
    "d1": "SQUID asymmetry 1",
    "d2": "SQUID asymmetry 2",
    "ip": "modulation period current",
    "i0": "offset current",
    "ibc": "critical bias current",
}


def default_bounds() -> tuple[np.ndarray, np.ndarray]:
    """Generous physical box constraints for the 11 parameters."""
    lo = ModelParams(
        l1=20e-12, l2=20e-12, c1=20e-15, c2=20e-15, cshunt=0.1e-15,
        r=0.05, d1=0.0, d2=0.0, ip=0.01e-3, i0=-0.1e-3, ibc=0.5e-3,
    ).to_array()
    hi = ModelParams(
        l1=5000e-12, l2=5000e-12, c1=10000e-15, c2=10000e-15, cshunt=2000e-15,
        r=20.0, d1=0.95, d2=0.95, ip=20e-3, i0=0.1e-3, ibc=200e-3,
    ).to_array()
    return lo, hi


def model_frequencies(
    params: ModelParams,
    phi1,
    *,
    include_gap_suppression: bool = True,
    dark_mode_threshold: float = DARK_MODE_THRESHOLD,
):
    """Vectorized dressed mode frequencies as a function of phi1.

    Returns (f_minus, f_plus, plus_visible) arrays in hertz.  Points whose
    implied field exceeds the critical field come out as NaN rather than
    raising, so optimizer trial steps can be rejected gracefully.
    """
    phi = np.asarray(phi1, dtype=float)
    l1 = params.l1 / _flux_factor(phi, params.d1)
    l2 = params.l2 / _flux_factor(params.r * phi, params.d2)
    if include_gap_suppression:
        x2 = (phi * params.ip / params.ibc) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            gap = np.where(x2 < 1.0, np.sqrt((1.0 - x2) / (1.0 + x2)), np.nan)
        l1 = l1 / gap
        l2 = l2 / gap
    w1_sq = 1.0 / (l1 * (params.c1 + params.cshunt))
    w2_sq = 1.0 / (l2 * (params.c2 + params.cshunt))
    bc = _beta_complement(params.circuit_params())
    wm_sq, wp_sq = _dressed_omega_sq(w1_sq, w2_sq, bc)
    f_minus = np.sqrt(wm_sq) / (2.0 * np.pi)
    f_plus = np.sqrt(wp_sq) / (2.0 * np.pi)
    w1 = np.sqrt(w1_sq)
    w2 = np.sqrt(w2_sq)
    with np.errstate(invalid="ignore"):
        visible = np.abs(w1 - w2) / (w1 + w2) >= dark_mode_threshold
    return f_minus, f_plus, visible


def bias_to_phi1(params: ModelParams, ib) -> np.ndarray:
    """Flux in the smaller loop implied by a bias current."""
    return (np.asarray(ib, dtype=float) - params.i0) / params.ip


def forward_spectrum(
    params: ModelParams,
    ib_list,
    *,
    include_gap_suppression: bool = True,
    dark_mode_threshold: float = DARK_MODE_THRESHOLD,
) -> list[ModePair]:
    """Mode pairs predicted at each bias current.

    Raises
    ------
    FieldAboveCritical
        If any bias implies a field beyond the critical field.
    """
    ib = np.atleast_1d(np.asarray(ib_list, dtype=float))
    phi = bias_to_phi1(params, ib)
    if include_gap_suppression and np.any(
        np.abs(ib - params.i0) >= params.ibc
    ):
        raise FieldAboveCritical("bias current beyond the critical bias current")
    fm, fp, vis = model_frequencies(
        params,
        phi,
        include_gap_suppression=include_gap_suppression,
        dark_mode_threshold=dark_mode_threshold,
    )
    return [
        ModePair(f_minus=float(a), f_plus=float(b), plus_visible=bool(v))
        for a, b, v in zip(fm, fp, vis)
    ]


@dataclass(frozen=True)
class DerivedQuantities:
    """Circuit energies plus the absolute field calibration."""

    energies: DerivedEnergies
    conversion_b: float  # tesla per ampere
    offset_field: float  # tesla
    critical_field: float  # tesla
    offset_field_sigma: float | None = None


@dataclass
class FitResult:
    params: ModelParams
    residual_rms: float  # hertz, weighted
    covariance: np.ndarray  # 11 x 11, ordered as PARAM_NAMES
    derived: DerivedQuantities
    n_iterations: int
    converged: bool
    flags: list[str]

    def sigma(self, name: str) -> float:
        i = PARAM_NAMES.index(name)
        return math.sqrt(max(self.covariance[i, i], 0.0))


def _point_arrays(data):
    ibs = np.array([p.ib for p in data])
    freqs = np.array([p.freq for p in data])
    is_plus = np.array([p.branch == Branch.PLUS for p in data])
    weights = np.array([p.weight for p in data])
    return ibs, freqs, is_plus, weights


def fit_spectrum(
    data,
    init: ModelParams = INITIAL_GUESS,
    bounds=None,
    *,
    fixed=(),
    include_gap_suppression: bool = True,
    dark_mode_threshold: float = DARK_MODE_THRESHOLD,
    area1: float = DEFAULT_LOOP_AREA1,
    max_iter: int = 500,
    cost_rtol: float = 1e-12,
) -> FitResult:
    """Simultaneous least-squares fit of both mode branches.

    Minimizes sum of weight * (f_model - f_data)^2 over the 11 parameters
    with a damped Gauss-Newton scheme; residual Jacobians by central finite
    differences.  Upper-branch data points falling where the current model
    predicts a dark (invisible) mode are excluded from the residual.

    Parameters
    ----------
    data : sequence of SpectroscopyPoint
        At least 50 points with both branches represented.
    init : ModelParams
        Starting parameter values.
    bounds : (lo, hi) arrays, optional
        Defaults to :func:`default_bounds`.
    fixed : iterable of str
        Parameter names held at their initial values.

    Raises
    ------
    NonConvergence
        Iteration cap reached while steps were still improving.
    """
    data = list(data)
    if len(data) < 50:
        raise ValueError("need at least 50 spectroscopy points")
    ibs, freqs, is_plus, weights = _point_arrays(data)
    if not (np.any(is_plus & (weights > 0)) and np.any(~is_plus & (weights > 0))):
        raise ValueError("both branches must be represented with nonzero weight")
    if bounds is None:
        bounds = default_bounds()
    free = np.array([name not in fixed for name in PARAM_NAMES])
    sqrt_w = np.sqrt(weights)

    def dark_mask(x):
        """Upper-branch points the model at x flags as invisible."""
        p = ModelParams.from_array(x)
        _, _, vis = model_frequencies(
            p,
            bias_to_phi1(p, ibs),
            include_gap_suppression=include_gap_suppression,
            dark_mode_threshold=dark_mode_threshold,
        )
        return is_plus & ~vis

    # The dark-mode mask is frozen while a step is evaluated and refreshed
    # only after the step is accepted; otherwise the optimizer could lower
    # the cost simply by moving the dark window over expensive data points.
    mask_cell = {"dark": dark_mask(init.to_array())}

    def residual(x):
        p = ModelParams.from_array(x)
        phi = bias_to_phi1(p, ibs)
        fm, fp, _ = model_frequencies(
            p,
            phi,
            include_gap_suppression=include_gap_suppression,
            dark_mode_threshold=dark_mode_threshold,
        )
        fmod = np.where(is_plus, fp, fm)
        w = np.where(mask_cell["dark"], 0.0, sqrt_w)
        return w * (fmod - freqs)

    res = levenberg_marquardt(
        residual,
        init.to_array(),
        bounds=bounds,
        x_scale=np.maximum(np.abs(init.to_array()), 1e-12),
        free=free,
        max_iter=max_iter,
        cost_rtol=cost_rtol,
        iteration_callback=lambda x: mask_cell.__setitem__("dark", dark_mask(x)),
    )
    if not res.converged:
        raise NonConvergence(
            f"spectrum fit did not converge within {max_iter} iterations "
            f"(cost {res.cost:.3e})"
        )

    params = ModelParams.from_array(res.x)
    flags = []
    if not include_gap_suppression:
        flags.append("field-suppression:disabled")
    else:
        flags.append("field-suppression:two-fluid-gap")
    for name, lo_hit, hi_hit in zip(PARAM_NAMES, res.at_lower, res.at_upper):
        if lo_hit or hi_hit:
            flags.append(f"boundary:{name}")
    for name in fixed:
        flags.append(f"fixed:{name}")

    # Covariance over the free parameters, embedded into the full 11x11.
    # Work in parameter-scaled coordinates; the raw Jacobian mixes columns
    # forty orders of magnitude apart (henry vs dimensionless).
    _, _, vis_opt = model_frequencies(
        params,
        bias_to_phi1(params, ibs),
        include_gap_suppression=include_gap_suppression,
        dark_mode_threshold=dark_mode_threshold,
    )
    active = (weights > 0) & (~is_plus | vis_opt)
    scale_free = np.maximum(np.abs(res.x), 1e-12)[free]
    jac_scaled = res.jacobian[:, free][active] * scale_free
    n_active = int(np.count_nonzero(active))
    cov_scaled = covariance_from_jacobian(
        jac_scaled, res.residual[active], n_free=int(free.sum())
    )
    cov_free = cov_scaled * np.outer(scale_free, scale_free)
    cov = np.zeros((len(PARAM_NAMES), len(PARAM_NAMES)))
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = cov_free
    sv = np.linalg.svd(jac_scaled, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 0 or sv[0] / max(sv[-1], 1e-300) > 1e8:
        flags.append("degenerate:ill-conditioned jacobian "
                     f"(cond={sv[0] / max(sv[-1], 1e-300):.1e})")

    dof = max(n_active - int(free.sum()), 1)
    rms = math.sqrt(res.cost / dof)
    derived = derived_field_quantities(params, area1, cov)
    return FitResult(
        params=params,
        residual_rms=rms,
        covariance=cov,
        derived=derived,
        n_iterations=res.n_iter,
        converged=res.converged,
        flags=flags,
    )


def fit_spectrum_staged(
    data,
    init: ModelParams = INITIAL_GUESS,
    bounds=None,
    *,
    fixed=(),
    window_schedule=(1.5e-3, 4e-3, None),
    defer=("ibc",),
    **kwargs,
) -> FitResult:
    """Window-expansion fit for starting values far from the optimum.

    A small error in the period current ip dephases the model by whole
    modulation periods at the far ends of a wide sweep, trapping a direct
    fit in an aliased local minimum.  Fitting first inside a narrow bias
    window around the current offset-current estimate and widening step by
    step keeps every stage inside its basin of attraction.  Parameters in
    ``defer`` (the critical bias current by default, invisible at small
    windows) stay fixed until the final full-range stage.

    ``window_schedule`` lists half-widths in ampere around the running i0
    estimate; ``None`` means the full data set.
    """
    data = list(data)
    current = init
    result = None
    last = len(window_schedule) - 1
    for k, width in enumerate(window_schedule):
        if width is None:
            subset = data
        else:
            subset = [p for p in data if abs(p.ib - current.i0) < width]
        stage_fixed = tuple(fixed) if k == last else tuple(fixed) + tuple(defer)
        branches = {p.branch for p in subset if p.weight > 0}
        if len(subset) < 50 or len(branches) < 2:
            continue
        result = fit_spectrum(
            subset, init=current, bounds=bounds, fixed=stage_fixed, **kwargs
        )
        current = result.params
    if result is None:
        raise ValueError("no stage had enough data (>= 50 points, both branches)")
    return result


def derived_field_quantities(
    params: ModelParams, area1: float = DEFAULT_LOOP_AREA1, covariance=None
) -> DerivedQuantities:
    """Table of quantities implied by a parameter set and the SEM loop area."""
    b = PHI0 / (params.ip * area1)
    b0 = b * params.i0
    bc = b * params.ibc
    sigma = None
    if covariance is not None:
        i_ip = PARAM_NAMES.index("ip")
        i_i0 = PARAM_NAMES.index("i0")
        grad = np.zeros(len(PARAM_NAMES))
        grad[i_i0] = b
        grad[i_ip] = -b0 / params.ip
        var = float(grad @ np.asarray(covariance) @ grad)
        sigma = math.sqrt(max(var, 0.0))
    return DerivedQuantities(
        energies=derived_energies(params.circuit_params(area1)),
        conversion_b=b,
        offset_field=b0,
        critical_field=bc,
        offset_field_sigma=sigma,
    )


def offset_field(fit: FitResult, area1: float = DEFAULT_LOOP_AREA1) -> DerivedQuantities:
    """Absolute offset field (and calibration) implied by a converged fit."""
    return derived_field_quantities(fit.params, area1, fit.covariance)


@dataclass(frozen=True)
class FluxCandidate:
    phi1: float
    residual: float  # RMS frequency mismatch, hertz
    unique: bool


def _golden_minimize(f, lo, hi, tol=1e-8, max_iter=200):
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def default_inversion_window(
    params: ModelParams,
    *,
    include_gap_suppression: bool = True,
    ratio_tol: float = 1e-6,
    max_denominator: int = 10**4,
) -> tuple[float, float]:
    """Search window for flux inversion: the non-negative half of one
    modulation period, clipped to the field range where the model is
    defined.

    The response is even in the effective flux, so the sign of phi1 is not
    identifiable from a single frequency observation; candidates are
    reported as field magnitudes.
    """
    try:
        period = modulation_period(params.r, tol=ratio_tol, max_denominator=max_denominator)
        half_period = period.b / 2.0
    except Exception:
        half_period = max_denominator / 2.0
    hi = half_period
    if include_gap_suppression:
        phi_critical = params.ibc / params.ip
        hi = min(hi, 0.999 * phi_critical)
    return 0.0, hi


def invert_flux(
    params: ModelParams,
    observed,
    tol: float,
    *,
    window: tuple[float, float] | None = None,
    grid_step: float = 1e-3,
    merge_tol: float = 1e-4,
    include_gap_suppression: bool = True,
) -> list[FluxCandidate]:
    """Flux values reproducing an observed frequency pair.

    Scans phi1 over the window on a fine grid, scoring the mean squared
    mismatch of the observed branches, then refines every local minimum by
    golden section and keeps those whose RMS mismatch is below ``tol``.
    Candidates closer than ``merge_tol`` are merged.  ``unique`` is True on
    every candidate iff exactly one survives.

    Parameters
    ----------
    observed : (f_minus, f_plus_or_None)
        Frequencies in hertz; supplying both branches shrinks the
        candidate set.
    tol : float
        Maximum RMS frequency mismatch, hertz.
    window : (lo, hi), optional
        Search range for phi1; defaults to
        :func:`default_inversion_window`.

    Raises
    ------
    NoCandidate
        If no flux in the window matches within tol.
    """
    f_obs_minus, f_obs_plus = observed
    if f_obs_minus is None:
        raise ValueError("the lower-branch frequency is required")
    if window is None:
        window = default_inversion_window(
            params, include_gap_suppression=include_gap_suppression
        )
    lo, hi = window
    if not hi > lo:
        raise ValueError("empty search window")

    def score_of(phi):
        fm, fp, vis = model_frequencies(
            params, phi, include_gap_suppression=include_gap_suppression
        )
        s = (fm - f_obs_minus) ** 2
        n = 1
        if f_obs_plus is not None:
            # a flux where the upper mode is dark cannot have produced an
            # upper-branch observation
            s = s + np.where(vis, (fp - f_obs_plus) ** 2, np.inf)
            n = 2
        return s / n

    grid = np.arange(lo, hi + grid_step, grid_step)
    grid = grid[grid <= hi]
    score = score_of(grid)
    finite = np.isfinite(score)
    score = np.where(finite, score, np.inf)

    # Local minima on the grid, window edges included.  The threshold for
    # refinement is generous: steep arcs can move the model by ~100 MHz
    # between grid points, so a true match may score poorly on the grid.
    interior = np.zeros_like(score, dtype=bool)
    interior[1:-1] = (score[1:-1] <= score[:-2]) & (score[1:-1] <= score[2:])
    interior[0] = score[0] <= score[1]
    interior[-1] = score[-1] <= score[-2]
    refine_cut = max((200e6) ** 2, 100.0 * tol * tol)
    candidates = []
    for i in np.flatnonzero(interior & (score < refine_cut)):
        a = grid[max(i - 1, 0)]
        b = grid[min(i + 1, grid.size - 1)]
        phi_star, s_star = _golden_minimize(
            lambda p: float(score_of(np.asarray(p))), a, b
        )
        if np.isfinite(s_star) and s_star < tol * tol:
            candidates.append((phi_star, math.sqrt(s_star)))

    if not candidates:
        raise NoCandidate(
            "no flux in the search window reproduces the observation within tol"
        )
    candidates.sort()
    merged = [candidates[0]]
    for phi, s in candidates[1:]:
        if phi - merged[-1][0] < merge_tol:
            if s < merged[-1][1]:
                merged[-1] = (phi, s)
        else:
            merged.append((phi, s))
    unique = len(merged) == 1
    return [FluxCandidate(phi1=phi, residual=s, unique=unique) for phi, s in merged]


def attribute_mode_area(
    params: ModelParams,
    phi1: float,
    area1: float = DEFAULT_LOOP_AREA1,
    mode: str = "minus",
    *,
    include_gap_suppression: bool = True,
) -> float:
    """Loop area of the SQUID dominating the given mode at this bias.

    The dressed mode is assigned to the SQUID whose bare (shunt-loaded)
    frequency lies closer to it; returns that SQUID's loop area.
    """
    phi = np.asarray([float(phi1)])
    l1 = params.l1 / _flux_factor(phi, params.d1)
    l2 = params.l2 / _flux_factor(params.r * phi, params.d2)
    if include_gap_suppression:
        x2 = (phi * params.ip / params.ibc) ** 2
        if np.any(x2 >= 1.0):
            raise FieldAboveCritical("bias point beyond the critical field")
        gap = np.sqrt((1.0 - x2) / (1.0 + x2))
        l1, l2 = l1 / gap, l2 / gap
    f1 = 1.0 / (2 * np.pi * np.sqrt(l1 * (params.c1 + params.cshunt)))[0]
    f2 = 1.0 / (2 * np.pi * np.sqrt(l2 * (params.c2 + params.cshunt)))[0]
    fm, fp, _ = model_frequencies(
        params, phi, include_gap_suppression=include_gap_suppression
    )
    f_mode = float(fm[0]) if mode == "minus" else float(fp[0])
    return area1 if abs(f1 - f_mode) <= abs(f2 - f_mode) else params.r * area1
