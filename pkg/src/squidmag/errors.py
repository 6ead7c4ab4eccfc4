"""Exception types raised by the physics and estimation routines."""


class SquidmagError(Exception):
    """Base class for all package-specific errors."""


class DivergentInductance(SquidmagError):
    """A symmetric SQUID (d = 0) was evaluated at half-integer flux where
    its Josephson inductance diverges."""


class PoleProximity(SquidmagError):
    """Impedance evaluation requested at (or numerically indistinguishable
    from) a pole of the network."""


class FieldAboveCritical(SquidmagError):
    """The applied perpendicular field exceeds the critical field of the
    thin film; the gap-suppression model is undefined there."""


class NoRationalWithinBound(SquidmagError):
    """No fraction a/b with b below the denominator cap approximates the
    requested loop-area ratio within the tolerance."""


class InsufficientSpan(SquidmagError):
    """Power-calibration data do not span enough dynamic range."""


class SlopeMismatch(SquidmagError):
    """Measured Rabi-frequency-vs-power slope is incompatible with the
    square-root power law."""


class NonConvergence(SquidmagError):
    """Iterative fit terminated without meeting its convergence criterion."""


class NoCandidate(SquidmagError):
    """No flux value inside the search window reproduces the observed
    frequencies within tolerance."""


class ZeroResponsivity(SquidmagError):
    """Flux-to-frequency responsivity is below the usable threshold
    (bias point is at or too close to a stationary point)."""
