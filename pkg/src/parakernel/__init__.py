"""Green functions and coercive-estimate checks for parabolic operators with
coefficients that are measurable in time only."""

__version__ = "0.1.0"
