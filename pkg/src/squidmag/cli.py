"""Command-line surface for the magnetometer toolkit.

Exit codes: 0 success, 2 input or parse error, 3 physics-domain violation,
4 non-convergence, 5 no solution.  All commands are deterministic given
identical inputs; outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import estimate, fluxmap, io, noise, response
from .constants import PHI0
from .errors import (
    FieldAboveCritical,
    NoCandidate,
    NonConvergence,
    NoRationalWithinBound,
    SquidmagError,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_NONCONVERGENCE = 4
EXIT_NO_SOLUTION = 5

FMT = io.FMT

# Environment variable holding a default parameter-file path.
PARAMS_ENV = "SQUIDMAG_PARAMS"


def _fail(code: int, message: str) -> "NoReturn":  # noqa: F821
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def _load_params(path: str | None) -> io.ParamFile:
    if path is None:
        path = os.environ.get(PARAMS_ENV)
    if path is None:
        _fail(EXIT_INPUT, f"no parameter file given (--params or ${PARAMS_ENV})")
    try:
        return io.read_params(path)
    except (OSError, io.FileFormatError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot read parameter file {path}: {exc}")


def cmd_simulate_spectrum(args) -> int:
    if args.step <= 0:
        _fail(EXIT_INPUT, "--step must be positive (mA)")
    if args.ib_stop < args.ib_start:
        _fail(EXIT_INPUT, "--ib-stop must be >= --ib-start")
    pf = _load_params(args.params)
    n = int(round((args.ib_stop - args.ib_start) / args.step)) + 1
    ib = (args.ib_start + args.step * np.arange(n)) * 1e-3
    try:
        modes = estimate.forward_spectrum(pf.model, ib)
    except FieldAboveCritical as exc:
        _fail(EXIT_DOMAIN, str(exc))
    points = []
    for current, pair in zip(ib, modes):
        points.append(
            estimate.SpectroscopyPoint(
                ib=current, freq=pair.f_minus, branch=estimate.Branch.MINUS, weight=1.0
            )
        )
        points.append(
            estimate.SpectroscopyPoint(
                ib=current,
                freq=pair.f_plus,
                branch=estimate.Branch.PLUS,
                weight=1.0 if pair.plus_visible else 0.0,
            )
        )
    io.write_sweep(args.out, points)
    print(f"wrote {len(points)} rows to {args.out}")
    return EXIT_OK


def _fit_report(result: estimate.FitResult, init: estimate.ModelParams) -> str:
    unit = {
        "l1": ("pH", 1e-12), "l2": ("pH", 1e-12),
        "c1": ("fF", 1e-15), "c2": ("fF", 1e-15), "cshunt": ("fF", 1e-15),
        "r": ("", 1.0), "d1": ("", 1.0), "d2": ("", 1.0),
        "ip": ("mA", 1e-3), "i0": ("nA", 1e-9), "ibc": ("mA", 1e-3),
    }
    lines = ["parameter        initial      fitted       sigma        description"]
    for name in estimate.PARAM_NAMES:
        u, scale = unit[name]
        label = f"{name}" + (f" ({u})" if u else "")
        lines.append(
            f"{label:<16} {getattr(init, name) / scale:<12.6g} "
            f"{getattr(result.params, name) / scale:<12.6g} "
            f"{result.sigma(name) / scale:<12.3g} "
            f"{estimate.PARAM_DESCRIPTIONS[name]}"
        )
    d = result.derived
    e = d.energies
    lines.append("")
    lines.append(f"residual rms: {result.residual_rms / 1e6:.4g} MHz "
                 f"({result.n_iterations} iterations)")
    # The ratio is quoted at the five significant digits the fit resolves;
    # the modulation period follows from its exact decimal reduction.
    r_quoted = f"{result.params.r:.4f}"
    try:
        period = fluxmap.modulation_period(Fraction(r_quoted), tol=0)
        lines.append(
            f"loop area ratio r = {r_quoted} = {period.a}/{period.b}: "
            f"modulation period M = {period.period_phi0} Phi0"
        )
    except NoRationalWithinBound:
        lines.append(f"loop area ratio r = {r_quoted} (period beyond denominator cap)")
    lines.append(f"plasma frequency 1: {e.fpl1 / 1e9:.6g} GHz")
    lines.append(f"plasma frequency 2: {e.fpl2 / 1e9:.6g} GHz")
    lines.append(f"E_c/h: {e.ec1 / 1e6:.4g} / {e.ec2 / 1e6:.4g} MHz")
    lines.append(f"E_J/h: {e.ej1 / 1e9:.4g} / {e.ej2 / 1e9:.4g} GHz")
    lines.append(f"conversion factor b = {d.conversion_b * 1e3:.4g} mT/A")
    sigma_txt = (
        f" +- {d.offset_field_sigma * 1e9:.2g} nT" if d.offset_field_sigma else ""
    )
    lines.append(f"offset field B0 = {d.offset_field * 1e9:.4g} nT{sigma_txt}")
    lines.append(f"critical field Bc = {d.critical_field * 1e3:.4g} mT")
    if result.flags:
        lines.append("flags: " + "; ".join(result.flags))
    return "\n".join(lines)


def cmd_fit_spectrum(args) -> int:
    pf = _load_params(args.init)
    try:
        data = io.read_sweep(args.sweep)
    except (OSError, io.FileFormatError) as exc:
        _fail(EXIT_INPUT, f"cannot read sweep {args.sweep}: {exc}")
    fixed = tuple(args.fix.split(",")) if args.fix else ()
    try:
        result = estimate.fit_spectrum_staged(
            data,
            init=pf.model,
            fixed=fixed,
            include_gap_suppression=not args.no_gap_suppression,
            area1=pf.area1,
        )
    except NonConvergence as exc:
        _fail(EXIT_NONCONVERGENCE, str(exc))
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    io.write_params(args.out, io.ParamFile(
        model=result.params, area1=pf.area1, resonance=pf.resonance
    ))
    report = _fit_report(result, pf.model)
    print(report)
    if args.report:
        Path(args.report).write_text(report + "\n")
    return EXIT_OK


def cmd_invert_flux(args) -> int:
    pf = _load_params(args.params)
    if args.tol <= 0:
        _fail(EXIT_INPUT, "--tol must be positive (MHz)")
    window = None
    if args.window:
        try:
            lo, hi = (float(w) for w in args.window.split(","))
        except ValueError:
            _fail(EXIT_INPUT, "--window must be 'lo,hi' in flux quanta")
        window = (lo, hi)
    observed = (
        args.fminus * 1e9,
        args.fplus * 1e9 if args.fplus is not None else None,
    )
    try:
        candidates = estimate.invert_flux(
            pf.model, observed, tol=args.tol * 1e6, window=window
        )
    except NoCandidate as exc:
        _fail(EXIT_NO_SOLUTION, str(exc))
    cal_b = PHI0 / (pf.model.ip * pf.area1)
    lines = ["phi1,phi2,b_perp_T,residual_Hz,unique"]
    for c in candidates:
        b_perp = c.phi1 * PHI0 / pf.area1
        lines.append(",".join([
            FMT % c.phi1,
            FMT % (pf.model.r * c.phi1),
            FMT % b_perp,
            FMT % c.residual,
            "true" if c.unique else "false",
        ]))
    text = "\n".join(lines)
    print(text)
    print(f"# field magnitude only: the response is symmetric in the effective flux")
    print(f"# conversion factor b = {FMT % (cal_b * 1e3)} mT/A")
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def _nef_single(path, pf: io.ParamFile, resp_value: float):
    trace = io.read_trace(path)
    if isinstance(trace, noise.ComplexTrace):
        rabi = pf.resonance.kappa / 2.0  # moderate readout drive
        trace = noise.extract_frequency_trace(trace, pf.resonance, rabi)
    return noise.flux_asd(trace, resp_value)


def cmd_nef(args) -> int:
    pf = _load_params(args.params)
    try:
        resp_value = noise.responsivity(pf.model, args.phi1, min_abs=1.0)
    except SquidmagError as exc:
        _fail(EXIT_DOMAIN, str(exc))
    try:
        spectra = [_nef_single(args.trace, pf, resp_value)]
        if args.average_dir:
            extra = sorted(Path(args.average_dir).glob("*.csv"))
            if not extra:
                _fail(EXIT_INPUT, f"no .csv traces in {args.average_dir}")
            spectra = [_nef_single(p, pf, resp_value) for p in extra]
    except (OSError, io.FileFormatError) as exc:
        _fail(EXIT_INPUT, f"cannot read trace: {exc}")
    sphi = noise.average_asd(spectra)
    area = estimate.attribute_mode_area(pf.model, args.phi1, pf.area1)
    sb = noise.field_asd(sphi, area)
    try:
        fit = noise.fit_noise_model(sb)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    except NonConvergence as exc:
        _fail(EXIT_NONCONVERGENCE, str(exc))
    lines = ["f_Hz,sphi,sb"]
    for f, a_phi, a_b in zip(sphi.freqs, sphi.amplitude, sb.amplitude):
        lines.append(",".join([FMT % f, FMT % a_phi, FMT % a_b]))
    Path(args.out).write_text("\n".join(lines) + "\n")
    m = fit.model
    phi0_per_t = area / PHI0
    print(f"wrote {sphi.freqs.size} one-sided bins to {args.out} "
          f"(bandwidth {sphi.bandwidth:.6g} Hz)")
    print(f"traces averaged: {len(spectra)}")
    print(f"responsivity at phi1={args.phi1:g}: {resp_value:.6g} Hz/Phi0")
    print(f"mode loop area: {area * 1e12:.4g} um2")
    print(f"one_over_f amplitude a = {m.a:.6g} (field units), alpha = {m.alpha:.4g}")
    print(f"Gamma_RTN = {m.gamma_rtn_hz:.4g} Hz")
    print(f"white floor sqrt(S0) = {math.sqrt(m.s0) * 1e12:.4g} pT/sqrt(Hz) "
          f"= {math.sqrt(m.s0) * phi0_per_t * 1e6:.4g} uPhi0/sqrt(Hz)")
    if fit.flags:
        print("flags: " + "; ".join(fit.flags))
    return EXIT_OK


def cmd_period(args) -> int:
    try:
        period = fluxmap.modulation_period(
            args.ratio, tol=args.tol, max_denominator=args.max_den
        )
    except NoRationalWithinBound as exc:
        _fail(EXIT_NO_SOLUTION, str(exc))
    except (ValueError, ZeroDivisionError) as exc:
        _fail(EXIT_INPUT, f"invalid ratio: {exc}")
    print(f"{period.a}/{period.b} -> M = {period.period_phi0} Phi0")
    return EXIT_OK


def cmd_calibrate_power(args) -> int:
    pf = _load_params(args.params)
    try:
        pairs = io.read_power_pairs(args.data)
    except (OSError, io.FileFormatError, ValueError) as exc:
        _fail(EXIT_INPUT, f"cannot read power data: {exc}")
    try:
        fit = response.calibrate_attenuation(pairs, pf.resonance)
    except response.InsufficientSpan as exc:
        _fail(EXIT_INPUT, str(exc))
    except response.SlopeMismatch as exc:
        print(f"warning: {exc}", file=sys.stderr)
        print("attenuation not determined (power law rejected)")
        return EXIT_OK
    print(f"attenuation A = {fit.attenuation_db:.2f} dB "
          f"({fit.n_points} points, scatter {fit.residual_rms:.3g} dB)")
    print(f"fitted slope {fit.fitted_slope:.5f} /dB "
          f"(sqrt(P) law expects {fit.expected_slope:.5f} /dB)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squidmag",
        description="Two-SQUID microwave magnetometer modeling and estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-spectrum", help="forward model over a bias range")
    p.add_argument("--params", help="parameter file (JSON)")
    p.add_argument("--ib-start", type=float, required=True, help="start bias, mA")
    p.add_argument("--ib-stop", type=float, required=True, help="stop bias, mA")
    p.add_argument("--step", type=float, required=True, help="bias step, mA")
    p.add_argument("--out", required=True, help="output sweep CSV")
    p.set_defaults(func=cmd_simulate_spectrum)

    p = sub.add_parser("fit-spectrum", help="fit the 11-parameter model to a sweep")
    p.add_argument("--sweep", required=True, help="sweep CSV")
    p.add_argument("--init", help="initial parameter file (JSON)")
    p.add_argument("--out", required=True, help="fitted parameter file (JSON)")
    p.add_argument("--report", help="also write the text report here")
    p.add_argument("--no-gap-suppression", action="store_true",
                   help="disable the field suppression of the gap")
    p.add_argument("--fix", help="comma-separated parameters to hold at their "
                   "initial values (e.g. c1,c2 to anchor the impedance scale)")
    p.set_defaults(func=cmd_fit_spectrum)

    p = sub.add_parser("invert-flux", help="absolute flux from observed frequencies")
    p.add_argument("--params", help="parameter file (JSON)")
    p.add_argument("--fminus", type=float, required=True, help="lower mode, GHz")
    p.add_argument("--fplus", type=float, help="upper mode, GHz")
    p.add_argument("--tol", type=float, default=1.0, help="match tolerance, MHz")
    p.add_argument("--window", help="search window 'lo,hi' in flux quanta")
    p.add_argument("--out", help="also write the candidate CSV here")
    p.set_defaults(func=cmd_invert_flux)

    p = sub.add_parser("nef", help="noise-equivalent flux/field from a time trace")
    p.add_argument("--trace", required=True, help="trace file")
    p.add_argument("--params", help="parameter file (JSON)")
    p.add_argument("--phi1", type=float, required=True, help="static flux bias, Phi0")
    p.add_argument("--average-dir", help="average all .csv traces in this directory")
    p.add_argument("--out", required=True, help="output spectrum CSV")
    p.set_defaults(func=cmd_nef)

    p = sub.add_parser("period", help="modulation period of a loop-area ratio")
    p.add_argument("--ratio", required=True,
                   help="loop-area ratio (number or fraction such as 8/3)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-den", type=int, default=10**4)
    p.set_defaults(func=cmd_period)

    p = sub.add_parser("calibrate-power", help="input-line attenuation from Rabi data")
    p.add_argument("--data", required=True, help="CSV: p_in_dbm,omega_r_MHz")
    p.add_argument("--params", help="parameter file (JSON)")
    p.set_defaults(func=cmd_calibrate_power)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except FieldAboveCritical as exc:
        _fail(EXIT_DOMAIN, str(exc))
    except NonConvergence as exc:
        _fail(EXIT_NONCONVERGENCE, str(exc))
    except (NoCandidate, NoRationalWithinBound) as exc:
        _fail(EXIT_NO_SOLUTION, str(exc))
    except SquidmagError as exc:
        _fail(EXIT_INPUT, str(exc))


if __name__ == "__main__":
    sys.exit(main())
