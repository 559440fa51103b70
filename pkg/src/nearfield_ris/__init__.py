"""Near-field RIS lab: spherical-wave channels, numpy transformers and two-timescale control."""

__version__ = "0.1.0"
