"""Classic ECN AQM detection and fallback for scalable congestion control."""

__version__ = "0.1.0"
