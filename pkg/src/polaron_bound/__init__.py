"""Variational dispersion bounds for the strong-coupling Fröhlich polaron."""

__version__ = "0.1.0"
