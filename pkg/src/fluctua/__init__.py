"""Simulators, continuum references and exact finite-state checks for interface fluctuations.

Submodules: ``lattice`` (shared types), ``zrp``, ``reflected``, ``gradphi``
(dynamics), ``oracle`` (continuum laws), ``verify`` (enumerated generators),
``stats``, ``config``, ``acceptance`` and ``cli``.
"""
from . import lattice, oracle, reflected, stats, verify, zrp, gradphi
from .lattice import (Corner, FluctuationField, InvariantError, OccupationVector, PathPair, TestFunction, bump,
                      sine_bump)
from .rng import SEED_ENV, stream

__version__ = "0.1.0"

__all__ = [
    "Corner", "FluctuationField", "InvariantError", "OccupationVector", "PathPair", "SEED_ENV", "TestFunction",
    "bump", "gradphi", "lattice", "oracle", "reflected", "sine_bump", "stats", "stream", "verify", "zrp",
]
