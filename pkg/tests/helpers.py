"""Shared oracles and generators for the test suite."""

import numpy as np
from scipy.optimize import brentq

from squidmag.circuit import CircuitParams, SquidElement, branch_admittance


def random_circuit(rng) -> CircuitParams:
    """Random two-SQUID circuit with well-separated bare and plasma modes.

    Near-degenerate draws are rejected: there the upper mode is dark (zero
    dipole moment) and the susceptance root merges into the chain
    antiresonance, which no bracketing root finder can resolve.
    """
    while True:
        l1 = rng.uniform(100e-12, 600e-12)
        l2 = rng.uniform(100e-12, 600e-12)
        c1 = rng.uniform(200e-15, 1200e-15)
        c2 = rng.uniform(200e-15, 1200e-15)
        cs = rng.uniform(5e-15, 200e-15)
        w1 = 1.0 / np.sqrt(l1 * (c1 + cs))
        w2 = 1.0 / np.sqrt(l2 * (c2 + cs))
        p1 = 1.0 / np.sqrt(l1 * c1)
        p2 = 1.0 / np.sqrt(l2 * c2)
        if (
            abs(w1 - w2) / (w1 + w2) > 1e-3
            and abs(p1 - p2) / (p1 + p2) > 1e-3
        ):
            return CircuitParams(
                squid1=SquidElement(lj0=l1, d=0.1, c=c1, area=50e-12),
                squid2=SquidElement(lj0=l2, d=0.1, c=c2, area=140e-12),
                cshunt=cs,
            )


def impedance_roots(params: CircuitParams, l1: float, l2: float):
    """Eigenfrequencies by brute-force root bracketing on the branch
    susceptance Im(j w cshunt + 1/Z_chain).

    The network fixes the root topology: the susceptance runs from -inf at
    dc to a positive value just below the lower plasma frequency (first
    root), and from -inf just above the chain-reactance zero located
    between the plasma frequencies back to a positive value below the upper
    plasma frequency (second root).  Each root is bisected inside its
    bracket.  Independent of the closed-form mode expressions.
    """
    c1, c2, cs = params.squid1.c, params.squid2.c, params.cshunt

    def susceptance(w):
        return branch_admittance(params, l1, l2, w).imag

    def chain_reactance(w):
        return w * l1 / (1.0 - w * w * l1 * c1) + w * l2 / (1.0 - w * w * l2 * c2)

    w_p_lo, w_p_hi = sorted([1.0 / np.sqrt(l1 * c1), 1.0 / np.sqrt(l2 * c2)])
    eps = 1e-9

    w_start = 1e-4 * w_p_lo
    assert susceptance(w_start) < 0
    assert susceptance(w_p_lo * (1 - eps)) > 0
    w_minus = brentq(susceptance, w_start, w_p_lo * (1 - eps), xtol=1e-30, rtol=1e-15)

    # antiresonance of the series chain, a pole of the susceptance
    w_zero = brentq(
        chain_reactance, w_p_lo * (1 + eps), w_p_hi * (1 - eps), xtol=1e-30, rtol=1e-15
    )
    assert susceptance(w_zero * (1 + eps)) < 0
    assert susceptance(w_p_hi * (1 - eps)) > 0
    w_plus = brentq(
        susceptance, w_zero * (1 + eps), w_p_hi * (1 - eps), xtol=1e-30, rtol=1e-15
    )
    return [w_minus / (2.0 * np.pi), w_plus / (2.0 * np.pi)]


def kasa_circle_fit(z: np.ndarray):
    """Algebraic least-squares circle through complex points; returns
    (center, radius)."""
    x, y = z.real, z.imag
    a_mat = np.column_stack([x, y, np.ones_like(x)])
    rhs = x * x + y * y
    coef, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
    cx, cy = coef[0] / 2.0, coef[1] / 2.0
    radius = np.sqrt(coef[2] + cx * cx + cy * cy)
    return complex(cx, cy), radius
