"""Exception types shared by all modules."""

from __future__ import annotations


class TorusCIError(Exception):
    """Base class for every error raised by the package."""


class NonZeroMean(TorusCIError):
    """An operator that needs a mean-zero input received one with a nonzero mean."""


class BadExponent(TorusCIError):
    """An integrability or smoothness exponent lies outside its admissible range."""


class SupportViolation(TorusCIError):
    """A field is not supported in the ball it claims to live in."""


class SingularGram(TorusCIError):
    """The moment system cannot be solved reliably at this grid resolution."""


class NotDivergenceFree(TorusCIError):
    """A vector field that must be solenoidal has a significant divergence."""


class SmoothnessTooLow(TorusCIError):
    """The profile polynomial is not smooth enough for the requested moment order."""


class UnderResolved(TorusCIError):
    """The grid cannot resolve the requested oscillation and concentration."""


class OutOfRange(TorusCIError):
    """A matrix lies outside the admissible neighbourhood of the identity."""


class BadWindow(TorusCIError):
    """Cutoff times do not satisfy 0 < tau < t0 < 1/2."""


class ResolutionExhausted(TorusCIError):
    """The iteration needs more resolution than the configured grid ceiling."""
