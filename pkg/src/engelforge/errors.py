"""Exception types raised by the toolkit."""


class EngelForgeError(Exception):
    """Base class for all toolkit errors."""


class NotSpherical(EngelForgeError):
    """Curve strays from the unit sphere beyond tolerance."""


class NotImmersed(EngelForgeError):
    """Derivative vanishes somewhere (not an immersion)."""


class IllConditioned(EngelForgeError):
    """Least-squares fit system is too ill-conditioned."""


class NotGraftable(EngelForgeError):
    """Arc fails the latitude-tangency / orientation checks."""


class ConvexityLost(EngelForgeError):
    """Convexity margin became non-positive after smoothing."""


class NotSurrounding(EngelForgeError):
    """Curve does not strictly surround the origin."""


class Degenerate(EngelForgeError):
    """Hessian nearly singular in the tilt solve."""


class RefitResidual(EngelForgeError):
    """Trigonometric refit residual exceeds tolerance."""


class NotZeroIntegral(EngelForgeError):
    """Curve integral is not zero, so the primitive does not close up."""


class PerturbationFailed(EngelForgeError):
    """Could not achieve embeddedness after max perturbation retries."""


class OverlapMismatch(EngelForgeError):
    """Fibrewise derivatives disagree on a chart overlap."""


class DegenerateFrame(EngelForgeError):
    """Frame vectors are (nearly) linearly dependent at a sample."""


class RankDeficient(EngelForgeError):
    """Differential of the embedding drops rank at a point."""


class ModelMismatch(EngelForgeError):
    """Operation preconditions on the embedding model are violated."""


class AlignmentFailure(EngelForgeError):
    """Tangency plane too far from the reference plane field."""


class OutOfTube(EngelForgeError):
    """Fibre coordinate leaves the tubular neighbourhood."""


class NearSingularA(EngelForgeError):
    """Conjugating matrix of a perturbed J is close to singular."""
