"""User-centric cell-free massive MIMO with quantized, routed fronthaul."""

__version__ = "0.1.0"


class ConfigurationError(ValueError):
    """Raised for inconsistent layout, topology or experiment parameters."""
