"""Ergodic operator nets and uniform families at desk scale."""
__version__ = "0.1.0"
