"""Prime-length Zadoff-Chu pilots and their assignment to users.

Users are packed onto as few roots as possible (cyclic shifts of one root
are mutually orthogonal), filling roots round-robin:

    root(j)  = 1 + (j - 1) mod R,    R = ceil(K / L)
    shift(j) = (j - 1) // R          (0-based; shift 0 is the base sequence)
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CapacityError",
    "PilotAssignment",
    "PilotSpec",
    "assign_pilots",
    "cross_correlation",
    "generate_zc",
    "is_prime",
    "pilot_matrix",
]


class CapacityError(ValueError):
    """More users than the L^2 - L available pilots."""


def is_prime(n: int) -> bool:
    if n < 2 or int(n) != n:
        return False
    n = int(n)
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return False
    return True


@dataclass(frozen=True)
class PilotSpec:
    length_L: int
    root_r: int
    shift_s: int = 0

    def __post_init__(self):
        if not is_prime(self.length_L):
            raise ValueError(f"pilot length {self.length_L!r} is not prime")
        if not 1 <= self.root_r <= self.length_L - 1:
            raise ValueError(f"root {self.root_r!r} outside [1, {self.length_L - 1}]")
        if not 0 <= self.shift_s <= self.length_L - 1:
            raise ValueError(f"shift {self.shift_s!r} outside [0, {self.length_L - 1}]")


def generate_zc(spec: PilotSpec) -> np.ndarray:
    """Zadoff-Chu sequence of root ``r``, circularly shifted by ``s``.

    Entry ``l`` of the base sequence is ``exp(-i*pi*r*l*(l + c)/L)`` with
    ``c = L mod 2``; output entry ``l`` is base entry ``(l + s) mod L``.
    The phase index is reduced modulo ``2L`` in integer arithmetic so the
    result is exact to rounding for any ``L``.
    """
    L, r, s = spec.length_L, spec.root_r, spec.shift_s
    l = np.arange(L, dtype=np.int64)
    k = (r * l * (l + (L % 2))) % (2 * L)
    base = np.exp(-1j * np.pi * k / L)
    return np.roll(base, -s)


def cross_correlation(a, b) -> complex:
    """Inner product ``a^H b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"sequence shapes differ: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


@dataclass(frozen=True)
class PilotAssignment:
    user_count_K: int
    length_L: int
    pilots: tuple[PilotSpec, ...]
    root_group_sizes: dict[int, int] = field(compare=False)

    @property
    def roots_used(self) -> int:
        return len(self.root_group_sizes)

    def group_size_of(self, user: int) -> int:
        """Root-group size K_r of 1-based ``user``."""
        return self.root_group_sizes[self.pilots[user - 1].root_r]


def assign_pilots(K: int, L: int) -> PilotAssignment:
    if int(K) != K or K < 1:
        raise ValueError(f"user count must be a positive integer, got {K!r}")
    if not is_prime(L):
        raise ValueError(f"pilot length {L!r} is not prime")
    capacity = L * L - L
    if K > capacity:
        raise CapacityError(f"K={K} exceeds the L^2-L = {capacity} available pilots")
    n_roots = -(-K // L)
    pilots = tuple(
        PilotSpec(L, 1 + (j - 1) % n_roots, (j - 1) // n_roots) for j in range(1, K + 1)
    )
    sizes = Counter(p.root_r for p in pilots)
    return PilotAssignment(K, L, pilots, dict(sorted(sizes.items())))


def pilot_matrix(assignment: PilotAssignment) -> np.ndarray:
    """All assigned pilots as the columns of an L x K matrix."""
    return np.column_stack([generate_zc(p) for p in assignment.pilots])
