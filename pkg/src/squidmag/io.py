"""File formats: device parameter files, spectroscopy sweeps, time traces.

All numeric columns carry their unit in the column or key name (ib_mA,
freq_GHz, l1_pH, ...) and text serialization uses 12 significant digits,
enough for lossless round trips below every physical tolerance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimate import Branch, ModelParams, SpectroscopyPoint
from .noise import ComplexTrace, FrequencyTrace
from .response import ResonanceParams

FMT = "%.12g"

# key -> (target, attribute, scale to SI)
_PARAM_KEYS: dict[str, tuple[str, str, float]] = {
    "l1_pH": ("model", "l1", 1e-12),
    "l2_pH": ("model", "l2", 1e-12),
    "c1_fF": ("model", "c1", 1e-15),
    "c2_fF": ("model", "c2", 1e-15),
    "cshunt_fF": ("model", "cshunt", 1e-15),
    "r": ("model", "r", 1.0),
    "d1": ("model", "d1", 1.0),
    "d2": ("model", "d2", 1.0),
    "ip_mA": ("model", "ip", 1e-3),
    "i0_nA": ("model", "i0", 1e-9),
    "ibc_mA": ("model", "ibc", 1e-3),
    "a1_um2": ("meta", "area1", 1e-12),
    "f0_GHz": ("resonance", "f0", 1e9),
    "kappa_MHz": ("resonance", "kappa", 2.0 * math.pi * 1e6),
    "gamma_MHz": ("resonance", "gamma", 2.0 * math.pi * 1e6),
    "gamma_phi_MHz": ("resonance", "gamma_phi", 2.0 * math.pi * 1e6),
}


class FileFormatError(ValueError):
    """Malformed or incomplete input file."""


@dataclass
class ParamFile:
    """Contents of a device parameter file.

    The second loop area is not stored: it is derived as r * a1, keeping a
    single source of truth for the ratio.  Rate keys (kappa_MHz, ...) are
    f-values; the stored rad/s rates are 2 pi times them.
    """

    model: ModelParams
    area1: float  # m^2
    resonance: ResonanceParams

    @property
    def area2(self) -> float:
        return self.model.r * self.area1


def read_params(path) -> ParamFile:
    """Parse a parameter file, rejecting unknown and missing keys."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise FileFormatError("parameter file must contain a JSON object")
    unknown = sorted(set(raw) - set(_PARAM_KEYS))
    if unknown:
        raise FileFormatError(f"unknown keys in parameter file: {', '.join(unknown)}")
    missing = sorted(set(_PARAM_KEYS) - set(raw))
    if missing:
        raise FileFormatError(f"missing keys in parameter file: {', '.join(missing)}")
    groups: dict[str, dict[str, float]] = {"model": {}, "meta": {}, "resonance": {}}
    for key, value in raw.items():
        group, attr, scale = _PARAM_KEYS[key]
        try:
            groups[group][attr] = float(value) * scale
        except (TypeError, ValueError) as exc:
            raise FileFormatError(f"key {key} is not numeric") from exc
    try:
        return ParamFile(
            model=ModelParams(**groups["model"]),
            area1=groups["meta"]["area1"],
            resonance=ResonanceParams(**groups["resonance"]),
        )
    except ValueError as exc:
        raise FileFormatError(f"invalid parameter values: {exc}") from exc


def write_params(path, pf: ParamFile) -> None:
    out = {}
    for key, (group, attr, scale) in _PARAM_KEYS.items():
        if group == "model":
            value = getattr(pf.model, attr)
        elif group == "meta":
            value = pf.area1
        else:
            value = getattr(pf.resonance, attr)
        out[key] = float(FMT % (value / scale))
    Path(path).write_text(json.dumps(out, indent=2) + "\n")


def read_sweep(path) -> list[SpectroscopyPoint]:
    """Parse a spectroscopy sweep (CSV: ib_mA, freq_GHz, branch[, weight])."""
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.startswith("#")
    ]
    if not lines:
        raise FileFormatError("empty sweep file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[:3] != ["ib_mA", "freq_GHz", "branch"]:
        raise FileFormatError(
            "sweep header must start with ib_mA,freq_GHz,branch"
        )
    has_weight = len(header) > 3 and header[3] == "weight"
    points = []
    for ln in lines[1:]:
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) < 3:
            raise FileFormatError(f"malformed sweep row: {ln!r}")
        try:
            ib = float(cells[0]) * 1e-3
            freq = float(cells[1]) * 1e9
            branch = Branch(cells[2])
            weight = float(cells[3]) if has_weight and len(cells) > 3 else 1.0
        except ValueError as exc:
            raise FileFormatError(f"malformed sweep row: {ln!r}") from exc
        points.append(SpectroscopyPoint(ib=ib, freq=freq, branch=branch, weight=weight))
    if not points:
        raise FileFormatError("sweep file contains no data rows")
    return points


def write_sweep(path, points) -> None:
    lines = ["ib_mA,freq_GHz,branch,weight"]
    for p in points:
        lines.append(
            ",".join(
                [FMT % (p.ib / 1e-3), FMT % (p.freq / 1e9), p.branch.value, FMT % p.weight]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


_DT_UNIFORMITY_RTOL = 1e-9


def _parse_trace_header(lines):
    meta = {}
    rows_start = 0
    for i, ln in enumerate(lines):
        if ln.startswith("#"):
            body = ln[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
        else:
            rows_start = i
            break
    else:
        raise FileFormatError("trace file has no data rows")
    return meta, rows_start


def read_trace(path) -> ComplexTrace | FrequencyTrace:
    """Parse a time trace.

    Complex traces have columns t_s, re_s11, im_s11 and metadata lines
    ``# dt_s=...``, ``# f_drive_GHz=...`` (optionally ``# p_in_dbm=...``).
    Pre-extracted frequency traces have columns t_s, f_GHz and ``# dt_s``.
    Sampling must be uniform to within 1e-9 relative.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FileFormatError("empty trace file")
    meta, rows_start = _parse_trace_header(lines)
    if "dt_s" not in meta:
        raise FileFormatError("trace file is missing '# dt_s=...' metadata")
    dt = float(meta["dt_s"])
    header = [h.strip() for h in lines[rows_start].split(",")]
    data = np.array(
        [[float(c) for c in ln.split(",")] for ln in lines[rows_start + 1 :]]
    )
    if data.size == 0:
        raise FileFormatError("trace file contains no samples")
    t = data[:, 0]
    steps = np.diff(t)
    if steps.size and np.any(np.abs(steps - dt) > _DT_UNIFORMITY_RTOL * dt):
        raise FileFormatError("trace is not uniformly sampled at the declared dt")
    if header == ["t_s", "re_s11", "im_s11"]:
        if "f_drive_GHz" not in meta:
            raise FileFormatError("complex trace requires '# f_drive_GHz=...'")
        return ComplexTrace(
            samples=data[:, 1] + 1j * data[:, 2],
            dt=dt,
            f_drive=float(meta["f_drive_GHz"]) * 1e9,
            p_in_dbm=float(meta["p_in_dbm"]) if "p_in_dbm" in meta else None,
        )
    if header == ["t_s", "f_GHz"]:
        return FrequencyTrace(samples=data[:, 1] * 1e9, dt=dt)
    raise FileFormatError(f"unrecognized trace columns: {header}")


def write_trace(path, trace) -> None:
    lines = [f"# dt_s={FMT % trace.dt}"]
    if isinstance(trace, ComplexTrace):
        lines.append(f"# f_drive_GHz={FMT % (trace.f_drive / 1e9)}")
        if trace.p_in_dbm is not None:
            lines.append(f"# p_in_dbm={FMT % trace.p_in_dbm}")
        lines.append("t_s,re_s11,im_s11")
        for i, sample in enumerate(trace.samples):
            lines.append(
                ",".join(
                    [FMT % (i * trace.dt), FMT % sample.real, FMT % sample.imag]
                )
            )
    elif isinstance(trace, FrequencyTrace):
        lines.append("t_s,f_GHz")
        for i, sample in enumerate(trace.samples):
            lines.append(",".join([FMT % (i * trace.dt), FMT % (sample / 1e9)]))
    else:
        raise TypeError("trace must be a ComplexTrace or FrequencyTrace")
    Path(path).write_text("\n".join(lines) + "\n")


def read_power_pairs(path) -> list[tuple[float, float]]:
    """Parse power-calibration data (CSV: p_in_dbm, omega_r_MHz)."""
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.startswith("#")
    ]
    if not lines:
        raise FileFormatError("empty power calibration file")
    header = [h.strip() for h in lines[0].split(",")]
    if header != ["p_in_dbm", "omega_r_MHz"]:
        raise FileFormatError("power file header must be p_in_dbm,omega_r_MHz")
    pairs = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 2:
            raise FileFormatError(f"malformed power row: {ln!r}")
        p = float(cells[0])
        rabi = float(cells[1]) * 2.0 * math.pi * 1e6
        pairs.append((p, rabi))
    if not pairs:
        raise FileFormatError("power calibration file contains no data rows")
    return pairs
