"""Exception types shared across the package."""


class GuidedWavesError(Exception):
    """Base class for all package-specific errors."""


class WorldlineRangeError(GuidedWavesError):
    """Query parameter lies outside the sampled worldline range."""


class StencilError(GuidedWavesError):
    """Derivative query too close to the sampled ends for the stencil."""


class SubluminalityError(GuidedWavesError):
    """Worldline samples imply a spacelike or null segment."""


class WorldlineTooShortError(GuidedWavesError):
    """A light-cone intersection falls outside the sampled worldline.

    Carries the sign of the cone condition at both ends so callers can
    tell which end the root escaped through.
    """

    def __init__(self, msg, f_lo=None, f_hi=None):
        super().__init__(msg)
        self.f_lo = f_lo
        self.f_hi = f_hi


class NearSingularityError(GuidedWavesError):
    """Field point too close to the source worldline for direct evaluation.

    The near-trajectory expansion is the intended fallback.
    """

    def __init__(self, msg, rho=None, eps=None):
        super().__init__(msg)
        self.rho = rho
        self.eps = eps


class GeometryError(GuidedWavesError):
    """Geometric precondition violated (e.g. offset not in the rest frame)."""


class NodeError(GuidedWavesError):
    """Wavefunction amplitude vanishes at the queried configuration point."""


class SuperluminalRegimeError(GuidedWavesError):
    """Effective squared mass m^2 + Q is non-positive."""


class DomainError(GuidedWavesError):
    """Requested evaluation needs data outside the recorded domain."""

    def __init__(self, msg, required_box=None):
        super().__init__(msg)
        self.required_box = required_box


class ConfigError(GuidedWavesError):
    """Invalid or inconsistent run configuration."""
