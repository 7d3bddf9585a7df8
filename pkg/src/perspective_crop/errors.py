"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: malformed files, out-of-range parameters, unknown flags."""


class GeometryError(ValueError):
    """A geometric precondition was violated."""


class NonPositiveDepthError(GeometryError):
    """Attempted to project a point at or behind the camera plane (z <= 0)."""


class PointAtInfinityError(GeometryError):
    """Dehomogenization failed: last homogeneous component is (near) zero."""


class DegenerateBoundingBoxError(GeometryError):
    """Keypoint bounding box collapsed along an axis; no crop scale exists."""


class RejectionExhaustedError(RuntimeError):
    """Rejection sampling failed to produce an in-frame subject."""


class NonFiniteLossError(RuntimeError):
    """Training loss became NaN or infinite."""
