"""Exception types shared across the package."""


class PorousCityError(Exception):
    """Base class for all errors raised by this package."""


# --- mesh -----------------------------------------------------------------

class MeshError(PorousCityError):
    pass


class UnsupportedFormatVersion(MeshError):
    """MSH file is binary or has a version other than 2.2 / 4.1."""


class MissingNode(MeshError):
    """An element references a node id absent from the file."""


class UntaggedBoundaryEdge(MeshError):
    """A boundary edge belongs to no named physical group."""


class DegenerateTriangle(MeshError):
    """Triangle area below the degeneracy tolerance."""


# --- linear algebra / dynamics -------------------------------------------

class NotConverged(PorousCityError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class NonFiniteInput(PorousCityError):
    """NaN or Inf found in an input field."""


class NonFiniteState(PorousCityError):
    """NaN or Inf appeared in the simulation state."""


# --- configuration / scenario ---------------------------------------------

class ConfigError(PorousCityError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class NonPositiveParameter(ConfigError):
    pass


class InvalidPreset(ConfigError):
    pass


class PorosityOutOfRange(ConfigError):
    pass
