"""Coverage analysis and optimization for triangulating-sensor deployments."""

__version__ = "0.1.0"
