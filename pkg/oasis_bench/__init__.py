"""OASIS Bench - Doubly adaptive optimizers and convergence verification."""

__version__ = "0.1.0"
