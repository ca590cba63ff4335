"""Inhomogeneous Potts spin glasses, their Parisi functional, and the Max
kappa-cut of sparse inhomogeneous random graphs."""

from . import constraints, cut, graph, kernel, parisi, rpc, spinglass
from .errors import *  # noqa: F403

__version__ = "0.1.0"
