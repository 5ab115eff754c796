"""Exception types shared across the package."""


class FormatError(ValueError):
    """On-disk data does not conform to the documented binary layout."""


class ConfigError(ValueError):
    """Benchmark or operator configuration is invalid for the given input."""


class CapabilityError(RuntimeError):
    """The host CPU lacks an instruction-set feature a kernel requires."""


class PlacementError(RuntimeError):
    """Requested thread/memory placement cannot be satisfied on this host."""
