"""Time-trace processing and synthesis for the noise-equivalent-field chain.

A reflection time trace taken at fixed drive frequency is projected onto
the pre-characterized two-level response to recover the instantaneous mode
frequency; its discrete Fourier transform, normalized by the measurement
bandwidth and the flux responsivity, gives the noise-equivalent flux (and,
through the loop area, field).  A power-law + telegraph + white model is
fitted to the spectrum, and the inverse chain (synthesis) provides oracle
traces for end-to-end validation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import PHI0
from .errors import ZeroResponsivity
from .estimate import ModelParams, model_frequencies
from .optimize import levenberg_marquardt
from .response import ResonanceParams, reflection

FLUX_UNIT = "Phi0/sqrt(Hz)"
FIELD_UNIT = "T/sqrt(Hz)"
FREQ_UNIT = "Hz/sqrt(Hz)"

# Distance in S11 units beyond which a projected sample is flagged as
# off-curve (kept, but marked) rather than trusted silently.
OFF_CURVE_THRESHOLD = 0.5


@dataclass
class ComplexTrace:
    """Reflection coefficient sampled at fixed drive frequency."""

    samples: np.ndarray  # complex S11
    dt: float  # s
    f_drive: float  # Hz
    p_in_dbm: float | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.samples.size < 2:
            raise ValueError("need at least two samples")


@dataclass
class FrequencyTrace:
    """Instantaneous lower-mode frequency versus time."""

    samples: np.ndarray  # Hz
    dt: float  # s
    off_curve: np.ndarray | None = None  # quality flags, same length

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.samples.size < 2:
            raise ValueError("need at least two samples")

    @property
    def duration(self) -> float:
        return self.samples.size * self.dt


@dataclass
class SpectralDensity:
    """One-sided amplitude spectral density samples.

    ``bandwidth`` is 1/(2T) for a trace of duration T; the frequency grid
    is the DFT bin grid k/T, so it starts at twice the bandwidth.
    """

    freqs: np.ndarray  # Hz
    amplitude: np.ndarray  # unit per sqrt(Hz)
    bandwidth: float  # Hz
    unit: str = FLUX_UNIT

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=float)
        if self.freqs.size != self.amplitude.size:
            raise ValueError("freqs and amplitude must have the same length")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")


@dataclass
class NoiseModel:
    """Decomposition S(f) = a/f^alpha + b G^2/((2 pi f)^2 + G^2) + s0.

    ``a`` carries the unit of S times Hz^alpha, ``b_rtn`` and ``s0`` the
    unit of S; ``gamma_rtn`` is the telegraph switching rate in rad/s
    (quote it in hertz as gamma_rtn / 2 pi).
    """

    a: float
    alpha: float
    b_rtn: float
    gamma_rtn: float
    s0: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if min(self.a, self.b_rtn, self.s0) < 0:
            raise ValueError("amplitudes must be non-negative")
        if self.gamma_rtn < 0:
            raise ValueError("switching rate must be non-negative")

    @property
    def gamma_rtn_hz(self) -> float:
        return self.gamma_rtn / (2.0 * math.pi)

    def psd(self, f):
        """Evaluate the model power spectral density at frequency f (Hz)."""
        f = np.asarray(f, dtype=float)
        out = np.full_like(f, self.s0)
        if self.a > 0:
            out = out + self.a / f**self.alpha
        if self.b_rtn > 0 and self.gamma_rtn > 0:
            w = 2.0 * np.pi * f
            out = out + self.b_rtn * self.gamma_rtn**2 / (w**2 + self.gamma_rtn**2)
        return out

    def crossover_frequencies(self) -> dict[str, float | None]:
        """Frequencies where each colored term equals the white floor."""
        out: dict[str, float | None] = {"one_over_f": None, "rtn_corner": None}
        if self.a > 0 and self.s0 > 0:
            out["one_over_f"] = (self.a / self.s0) ** (1.0 / self.alpha)
        if self.gamma_rtn > 0:
            out["rtn_corner"] = self.gamma_rtn_hz
        return out


def extract_frequency_trace(
    trace: ComplexTrace,
    res: ResonanceParams,
    rabi: float,
    *,
    grid_half_span: float = 10.0,
    grid_points: int = 4096,
    off_curve_threshold: float = OFF_CURVE_THRESHOLD,
) -> FrequencyTrace:
    """Project measured S11 samples onto the model curve to get f_minus(t).

    For each sample the detuning minimizing the complex-plane distance to
    the model reflection curve is located on a dense grid spanning
    +-grid_half_span * Gamma2, then refined parabolically; the instantaneous
    mode frequency is f_drive - Delta / 2 pi.  Samples farther than
    ``off_curve_threshold`` from the curve keep their nearest-point value
    but are flagged in ``off_curve``.
    """
    span = grid_half_span * res.gamma2
    grid = np.linspace(-span, span, grid_points)
    curve = reflection(res, grid, rabi)
    curve_re = curve.real.astype(np.float64)
    curve_im = curve.imag.astype(np.float64)
    # Brute-force nearest point in float32 (distance ranking only), exact
    # 3-point refinement in float64 afterwards.
    c32 = np.vstack([curve_re, curve_im]).astype(np.float32)
    c_norm32 = (c32[0] ** 2 + c32[1] ** 2).astype(np.float32)

    s = trace.samples
    n = s.size
    best = np.empty(n, dtype=np.int64)
    chunk = 8192
    for start in range(0, n, chunk):
        sl = s[start : start + chunk]
        s32 = np.vstack([sl.real, sl.imag]).astype(np.float32)
        cross = s32.T @ c32  # (m, grid_points)
        cross *= -2.0
        cross += c_norm32[None, :]
        # |s|^2 is constant per row; irrelevant to the argmin
        best[start : start + chunk] = np.argmin(cross, axis=1)

    j = np.clip(best, 1, grid_points - 2)
    h = grid[1] - grid[0]

    def dist_sq(idx):
        dre = s.real - curve_re[idx]
        dim = s.imag - curve_im[idx]
        return dre * dre + dim * dim

    d0 = dist_sq(j)
    dm = dist_sq(j - 1)
    dp = dist_sq(j + 1)
    denom = dm - 2.0 * d0 + dp
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(denom > 0, 0.5 * (dm - dp) / denom, 0.0)
    offset = np.clip(offset, -1.0, 1.0)
    delta_hat = grid[j] + offset * h
    flags = np.sqrt(np.minimum(np.minimum(d0, dm), dp)) > off_curve_threshold
    freqs = trace.f_drive - delta_hat / (2.0 * np.pi)
    return FrequencyTrace(samples=freqs, dt=trace.dt, off_curve=flags)


def _one_sided_asd(x: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectral density of a real series (unit/sqrt(Hz)).

    Forward DFT normalized by 1/N; the one-sided power doubles every bin
    except DC and (for even N) Nyquist.  The DC bin is dropped.
    """
    n = x.size
    t_total = n * dt
    coeff = np.fft.rfft(x) / n
    power = np.abs(coeff) ** 2 * t_total
    if n % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.arange(1, power.size) / t_total
    return freqs, np.sqrt(power[1:])


def flux_asd(trace: FrequencyTrace, responsivity_hz_per_phi0: float) -> SpectralDensity:
    """Noise-equivalent flux spectral density of a frequency trace.

    The DFT amplitude divided by sqrt(BW), BW = 1/(2T), and by the
    magnitude of the flux responsivity; white frequency noise of RMS
    sigma_f comes out at sigma_f * sqrt(2 dt) / |R|.
    """
    if responsivity_hz_per_phi0 == 0:
        raise ZeroResponsivity("flux conversion requires nonzero responsivity")
    freqs, asd = _one_sided_asd(trace.samples, trace.dt)
    return SpectralDensity(
        freqs=freqs,
        amplitude=asd / abs(responsivity_hz_per_phi0),
        bandwidth=1.0 / (2.0 * trace.duration),
        unit=FLUX_UNIT,
    )


def field_asd(sphi: SpectralDensity, area: float) -> SpectralDensity:
    """Noise-equivalent field from noise-equivalent flux and a loop area.

    S_B^(1/2) = S_Phi^(1/2) * PHI0 / area: one flux quantum through the
    loop corresponds to a field PHI0 / area.
    """
    if not area > 0:
        raise ValueError("loop area must be positive")
    if sphi.unit != FLUX_UNIT:
        raise ValueError(f"expected a flux density ({FLUX_UNIT}), got {sphi.unit}")
    return SpectralDensity(
        freqs=sphi.freqs.copy(),
        amplitude=sphi.amplitude * PHI0 / area,
        bandwidth=sphi.bandwidth,
        unit=FIELD_UNIT,
    )


def average_asd(spectra) -> SpectralDensity:
    """Average several single-trace densities (mean in power, then sqrt).

    Power averaging keeps the level estimate unbiased; averaging amplitudes
    of Rayleigh-distributed bins would sit about 11 percent low.
    """
    spectra = list(spectra)
    if not spectra:
        raise ValueError("no spectra to average")
    first = spectra[0]
    for s in spectra[1:]:
        if s.freqs.size != first.freqs.size or not np.allclose(
            s.freqs, first.freqs, rtol=1e-12
        ):
            raise ValueError("spectra must share one frequency grid")
        if s.unit != first.unit:
            raise ValueError("spectra must share one unit")
    power = np.mean([s.amplitude**2 for s in spectra], axis=0)
    return SpectralDensity(
        freqs=first.freqs.copy(),
        amplitude=np.sqrt(power),
        bandwidth=first.bandwidth,
        unit=first.unit,
    )


def responsivity(
    params: ModelParams,
    phi1: float,
    *,
    step: float = 1e-4,
    min_abs: float | None = None,
    include_gap_suppression: bool = True,
) -> float:
    """Local flux-to-frequency slope of the lower mode, Hz per flux quantum.

    Central finite difference with the given step (in flux quanta),
    cross-checked against a half-step evaluation; a relative disagreement
    beyond 1e-4 (away from stationary points) triggers a warning and the
    half-step value is returned.

    Raises
    ------
    ZeroResponsivity
        If ``min_abs`` is given and the magnitude falls below it (bias at
        or too close to a stationary point of the modulation pattern).
    """

    def f_minus(p):
        fm, _, _ = model_frequencies(
            params,
            np.asarray([p]),
            include_gap_suppression=include_gap_suppression,
        )
        return float(fm[0])

    def central(h):
        return (f_minus(phi1 + h) - f_minus(phi1 - h)) / (2.0 * h)

    r_full = central(step)
    r_half = central(step / 2.0)
    scale = max(abs(r_full), abs(r_half))
    if scale > 1.0 and abs(r_full - r_half) > 1e-4 * scale:
        warnings.warn(
            "responsivity finite difference not converged at this step; "
            "returning the half-step value",
            RuntimeWarning,
            stacklevel=2,
        )
    value = r_half
    if min_abs is not None and abs(value) < min_abs:
        raise ZeroResponsivity(
            f"|responsivity| = {abs(value):.3g} Hz/Phi0 below threshold {min_abs:.3g}"
        )
    return value


@dataclass
class NoiseModelFit:
    model: NoiseModel
    flags: list[str] = field(default_factory=list)
    residual_rms_log: float = float("nan")

    @property
    def degenerate_terms(self) -> list[str]:
        return [f.split(":", 1)[1] for f in self.flags if f.startswith("degenerate:")]


def _fit_noise_once(logf, logp, theta0, max_iter=400):
    """LM pass over log-parameters (ln a, alpha, ln b, ln gamma, ln s0)."""
    f = np.exp(logf)
    w = 2.0 * np.pi * f

    def residual(theta):
        ln_a, alpha, ln_b, ln_g, ln_s0 = theta
        g = math.exp(ln_g)
        model = (
            math.exp(ln_a) / f**alpha
            + math.exp(ln_b) * g * g / (w * w + g * g)
            + math.exp(ln_s0)
        )
        return np.log(model) - logp

    return levenberg_marquardt(
        residual,
        np.asarray(theta0, dtype=float),
        bounds=(np.array([-200.0, 0.05, -200.0, -200.0, -200.0]),
                np.array([200.0, 5.0, 200.0, 200.0, 200.0])),
        x_scale=np.array([1.0, 0.2, 1.0, 1.0, 1.0]),
        max_iter=max_iter,
        cost_rtol=1e-14,
    )


def fit_noise_model(sd: SpectralDensity, *, max_iter: int = 400) -> NoiseModelFit:
    """Least-squares decomposition of a spectral density into
    1/f^alpha + telegraph + white components.

    The fit runs on the log of the power (amplitude squared) so that every
    decade carries comparable weight per bin, with the positive amplitudes
    parameterized logarithmically.  The telegraph rate is multi-started on
    a logarithmic grid of corner frequencies and the best run kept.
    Components whose fitted contribution is negligible everywhere are
    flagged as degenerate rather than failing.
    """
    f = sd.freqs
    p = sd.amplitude**2
    if f.size < 100 and f[-1] / f[0] < 1000.0:
        raise ValueError("need >= 3 decades of frequency or >= 100 bins")
    if np.any(p <= 0):
        raise ValueError("spectral density must be positive to fit")
    logf = np.log(f)
    logp = np.log(p)

    # Heuristic seeds: white floor from the top quarter band, power-law
    # slope from the lowest decade.
    s0_init = float(np.median(p[f > 0.25 * f[-1]]))
    low = f <= f[0] * 10.0
    if np.count_nonzero(low) >= 3:
        slope, intercept = np.polyfit(logf[low], logp[low], 1)
        alpha_init = float(np.clip(-slope, 0.1, 4.0))
        a_init = float(np.exp(intercept))
    else:
        alpha_init = 1.0
        a_init = float(p[0] * f[0])
    a_init = max(a_init, s0_init * 1e-6)

    corners = np.geomspace(max(4.0 * sd.bandwidth, f[0]), f[-1] / 4.0, 7)
    best = None
    for fc in corners:
        gamma0 = 2.0 * math.pi * fc
        near = p[(f > 0.3 * fc) & (f < 3.0 * fc)]
        b_init = max(float(np.median(near)) - s0_init, s0_init * 1e-3) if near.size else s0_init
        theta0 = [math.log(a_init), alpha_init, math.log(b_init), math.log(gamma0), math.log(s0_init)]
        res = _fit_noise_once(logf, logp, theta0, max_iter=max_iter)
        if best is None or res.cost < best.cost:
            best = res
    assert best is not None

    ln_a, alpha, ln_b, ln_g, ln_s0 = best.x
    model = NoiseModel(
        a=math.exp(ln_a),
        alpha=float(alpha),
        b_rtn=math.exp(ln_b),
        gamma_rtn=math.exp(ln_g),
        s0=math.exp(ln_s0),
    )
    flags = []
    total = model.psd(f)
    if np.all(model.a / f**model.alpha < 0.01 * total):
        flags.append("degenerate:one_over_f")
    w = 2.0 * np.pi * f
    lorentz = model.b_rtn * model.gamma_rtn**2 / (w**2 + model.gamma_rtn**2)
    if np.all(lorentz < 0.01 * total):
        flags.append("degenerate:rtn")
    if np.all(model.s0 < 0.01 * total):
        flags.append("degenerate:white")
    if not best.converged:
        flags.append("non-convergence")
    rms = math.sqrt(best.cost / max(f.size - 5, 1))
    return NoiseModelFit(model=model, flags=flags, residual_rms_log=rms)


def synthesize_trace(
    model: NoiseModel,
    f_center: float,
    duration: float,
    dt: float,
    seed: int,
    *,
    rtn_amplitude: float | None = None,
) -> FrequencyTrace:
    """Generate a frequency trace whose spectrum follows the noise model.

    White noise is drawn directly; the power-law component is synthesized
    by spectral shaping of white noise; the telegraph component switches
    between +-A with exponential dwell times at per-state rate
    gamma_rtn / 2, which yields the model's Lorentzian with plateau
    b = 4 A^2 / gamma_rtn (A can be overridden via ``rtn_amplitude``).
    Deterministic for a given seed.
    """
    n = int(round(duration / dt))
    if n < 100:
        raise ValueError("duration must cover at least 100 samples")
    rng = np.random.default_rng(seed)
    t_total = n * dt
    x = np.full(n, float(f_center))

    if model.s0 > 0:
        sigma = math.sqrt(model.s0 / (2.0 * dt))
        x += rng.normal(0.0, sigma, n)

    if model.a > 0:
        n_bins = n // 2 + 1
        freqs = np.arange(n_bins) / t_total
        var = np.zeros(n_bins)
        var[1:] = model.a / freqs[1:] ** model.alpha / (2.0 * t_total)
        re = rng.normal(size=n_bins)
        im = rng.normal(size=n_bins)
        coeff = (re + 1j * im) * np.sqrt(var / 2.0)
        coeff[0] = 0.0
        if n % 2 == 0:
            coeff[-1] = re[-1] * math.sqrt(var[-1])
        x += np.fft.irfft(coeff * n, n)

    if model.b_rtn > 0 and model.gamma_rtn > 0:
        lam = model.gamma_rtn / 2.0  # per-state switching rate, 1/s
        amp = (
            math.sqrt(model.b_rtn * model.gamma_rtn) / 2.0
            if rtn_amplitude is None
            else rtn_amplitude
        )
        expected = t_total * lam
        n_dwell = int(expected + 10.0 * math.sqrt(expected) + 20.0)
        dwells = rng.exponential(1.0 / lam, n_dwell)
        while dwells.sum() < t_total:
            dwells = np.concatenate([dwells, rng.exponential(1.0 / lam, n_dwell)])
        edges = np.cumsum(dwells)
        times = (np.arange(n) + 0.5) * dt
        state0 = 1.0 if rng.random() < 0.5 else -1.0
        parity = np.searchsorted(edges, times) % 2
        x += amp * state0 * np.where(parity == 0, 1.0, -1.0)

    return FrequencyTrace(samples=x, dt=dt)
