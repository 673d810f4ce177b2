"""Simulation and numerical checks for networks of weakly reinforced Pólya urns."""
__version__ = "0.1.0"
