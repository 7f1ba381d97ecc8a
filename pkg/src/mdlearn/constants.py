"""Centralized numerical tolerances."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    eq: float = 1e-9
    grad_check: float = 1e-5
    projection: float = 1e-10
    roundtrip: float = 1e-8
    bregman_floor: float = 1e-12
    max_bisection: int = 200
    entropic_floor: float = 1e-300


TOL = Tolerances()
