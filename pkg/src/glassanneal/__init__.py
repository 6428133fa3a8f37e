"""Landscape complexity of spherical spin glasses and L2-strength annealing."""

__version__ = "0.1.0"
