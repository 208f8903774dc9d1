"""Dataset popularity prediction and replica placement for grid storage."""

__version__ = "0.1.0"
