"""Linearization and orbit experiments for abelian groups of polynomial automorphisms fixing a point."""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
