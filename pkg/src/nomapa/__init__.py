"""Uplink NOMA capacity regions and power control under PA distortion noise."""

__version__ = "0.1.0"
