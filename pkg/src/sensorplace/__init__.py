"""Sensor placement by minimizing a Varadhan-approximated average distance."""
__version__ = "0.1.0"
