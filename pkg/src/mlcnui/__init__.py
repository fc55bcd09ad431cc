"""Multilevel coding for binary channels with non-uniform inputs, plus a
layered/interleaved/repeated rateless scheme over the BSC."""

__version__ = "0.1.0"
