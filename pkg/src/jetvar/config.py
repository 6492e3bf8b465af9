"""Numerical tolerances shared by the library entry points and the CLI."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    zero_points: int = 8
    zero_tol: float = 1e-9
    criticality: float = 1e-6
    conservation: float = 1e-6
    quad: float = 1e-9
    snap: float = 1e-6
