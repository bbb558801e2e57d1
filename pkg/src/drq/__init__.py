"""Core War toolkit: Redcode, MARS simulation, battles, and red-queen evolution."""

__version__ = "0.1.0"
