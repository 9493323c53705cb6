"""Ptychography simulation, ePIE reconstruction and oversample-and-splice remixing."""

__version__ = "0.1.0"
