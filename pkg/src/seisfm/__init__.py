"""seisfm: desk-scale benchmarking of encoder-decoder models for seismic processing."""

__version__ = "0.1.0"
