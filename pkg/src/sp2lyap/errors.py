"""Exceptions raised by sp2lyap."""


class Sp2LyapError(Exception):
    """Base class for all library errors."""


class NormTooLarge(Sp2LyapError):
    """The logarithm series was asked for a matrix too far from the identity."""


class EnergyBelowSpectrum(Sp2LyapError, ValueError):
    """The energy does not exceed the largest eigenvalue of the potential."""


class SearchExhausted(Sp2LyapError):
    """No power brought the transfer matrix close enough to the identity."""


class BranchCut(Sp2LyapError):
    """A rotation angle sits too close to pi for the principal logarithm."""


class FloorParity(Sp2LyapError):
    """A residual angle is not within (-pi/2, pi/2)."""


class MixedEnergy(Sp2LyapError, ValueError):
    """Logarithms computed at different energies were combined."""
