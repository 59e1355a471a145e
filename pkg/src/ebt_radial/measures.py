"""Finite discrete measures on the half-line [0, inf).

A :class:`DiscreteMeasure` is a sorted list of support points with one real
mass per point.  Coincident points are merged on construction and zero-mass
points are kept (use :meth:`DiscreteMeasure.prune` to drop them).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

ALLOWED_EXPONENTS = (0.0, 0.5, 1.0, 2.0)


class DivisionAtZeroError(ZeroDivisionError):
    """A weight 1/r^e was applied to nonzero mass sitting at r = 0."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class DiscreteMeasure:
    """Signed measure ``sum_i masses[i] * delta(points[i])`` on [0, inf)."""

    __slots__ = ("points", "masses")

    def __init__(self, points: Iterable[float] = (), masses: Iterable[float] = ()):
        x = np.asarray(points, dtype=np.float64).ravel()
        m = np.asarray(masses, dtype=np.float64).ravel()
        if x.shape != m.shape:
            raise ValueError(f"points and masses differ in length ({x.size} != {m.size})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            raise ValueError("points and masses must be finite")
        if x.size and x.min() < 0.0:
            raise ValueError("support points must be non-negative")
        if x.size > 1 and not np.all(np.diff(x) > 0.0):
            order = np.argsort(x, kind="stable")
            x, m = x[order], m[order]
            x, inverse = np.unique(x, return_inverse=True)
            m = np.bincount(inverse, weights=m, minlength=x.size)
        else:
            x, m = x.copy(), m.copy()
        self.points = _frozen(x)
        self.masses = _frozen(m)

    @classmethod
    def _trusted(cls, x: np.ndarray, m: np.ndarray) -> DiscreteMeasure:
        # caller guarantees sorted, unique, finite
        obj = cls.__new__(cls)
        obj.points = _frozen(np.array(x, dtype=np.float64))
        obj.masses = _frozen(np.array(m, dtype=np.float64))
        return obj

    def __len__(self) -> int:
        return self.points.size

    def __repr__(self) -> str:
        if len(self) <= 6:
            body = ", ".join(f"{x:g}: {m:g}" for x, m in zip(self.points, self.masses))
            return f"DiscreteMeasure({{{body}}})"
        return f"DiscreteMeasure(n={len(self)}, total_mass={self.total_mass():g})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(
            self.masses, other.masses
        )

    __hash__ = None  # type: ignore[assignment]

    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def as_dict(self) -> dict[float, float]:
        return {float(x): float(m) for x, m in zip(self.points, self.masses)}

    def __add__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return add(self, other)

    def __sub__(self, other: DiscreteMeasure) -> DiscreteMeasure:
        return add(self, other.scale(-1.0))

    def __neg__(self) -> DiscreteMeasure:
        return self.scale(-1.0)

    def scale(self, factor: float) -> DiscreteMeasure:
        return DiscreteMeasure._trusted(self.points, self.masses * factor)

    def prune(self, tol: float = 0.0) -> DiscreteMeasure:
        """Drop points whose absolute mass is <= tol."""
        keep = np.abs(self.masses) > tol
        return DiscreteMeasure._trusted(self.points[keep], self.masses[keep])

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.masses >= 0.0))


def dirac(x: float, m: float = 1.0) -> DiscreteMeasure:
    """Single atom of mass ``m`` at ``x``."""
    if not (math.isfinite(x) and math.isfinite(m)):
        raise ValueError("dirac requires finite location and mass")
    if x < 0:
        raise ValueError(f"dirac location must be non-negative, got {x}")
    return DiscreteMeasure._trusted([x], [m])


def add(a: DiscreteMeasure, b: DiscreteMeasure) -> DiscreteMeasure:
    """Sum of two measures; masses at shared points are added."""
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    x = np.concatenate([a.points, b.points])
    m = np.concatenate([a.masses, b.masses])
    return DiscreteMeasure(x, m)


@dataclass(frozen=True)
class WeightSpec:
    """Weight ``r**exponent`` that divides a measure."""

    exponent: float = 1.0

    def __post_init__(self):
        if float(self.exponent) not in ALLOWED_EXPONENTS:
            raise ValueError(f"weight exponent must be one of {ALLOWED_EXPONENTS}")
        object.__setattr__(self, "exponent", float(self.exponent))


def _weights(points: np.ndarray, masses: np.ndarray, exponent: float) -> np.ndarray:
    if exponent == 0.0:
        return np.ones_like(points)
    at_zero = points == 0.0
    if np.any(at_zero & (masses != 0.0)):
        raise DivisionAtZeroError("nonzero mass at r = 0 cannot be divided by r^e")
    w = np.empty_like(points)
    with np.errstate(divide="ignore"):
        if exponent == 0.5:
            w[:] = 1.0 / np.sqrt(points)
        elif exponent == 1.0:
            w[:] = 1.0 / points
        else:
            w[:] = 1.0 / points**exponent
    w[at_zero] = 0.0
    return w


def weight_divide(mu: DiscreteMeasure, w: WeightSpec | float) -> DiscreteMeasure:
    """The measure mu / r**e.  Zero-mass atoms at the origin stay zero."""
    e = w.exponent if isinstance(w, WeightSpec) else WeightSpec(w).exponent
    if e == 0.0:
        return mu
    return DiscreteMeasure._trusted(mu.points, mu.masses * _weights(mu.points, mu.masses, e))


def restrict(mu: DiscreteMeasure, a: float, b: float) -> DiscreteMeasure:
    """Restriction of mu to the closed interval [a, b]."""
    if a > b:
        raise ValueError(f"restrict needs a <= b, got [{a}, {b}]")
    lo = np.searchsorted(mu.points, a, side="left")
    hi = np.searchsorted(mu.points, b, side="right")
    return DiscreteMeasure._trusted(mu.points[lo:hi], mu.masses[lo:hi])


@dataclass(frozen=True)
class MomentWeight:
    """Growth function M(r) used in tail moments.

    ``kind`` is ``"exp"`` (e^r), ``"poly"`` ((1+r)^k) or ``"truncated"``
    (an inner weight frozen at its value for r > cutoff).
    """

    kind: str
    k: float = 0.0
    cutoff: float = math.inf
    inner: MomentWeight | None = None

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "exp":
            return np.exp(r)
        if self.kind == "poly":
            return (1.0 + r) ** self.k
        if self.kind == "truncated":
            assert self.inner is not None
            return self.inner(np.minimum(r, self.cutoff))
        raise ValueError(f"unknown moment weight {self.kind!r}")


def exp_weight() -> MomentWeight:
    return MomentWeight("exp")


def poly_weight(k: int) -> MomentWeight:
    return MomentWeight("poly", k=k)


def truncated_weight(inner: MomentWeight, cutoff: float) -> MomentWeight:
    return MomentWeight("truncated", cutoff=cutoff, inner=inner)


def moment(mu: DiscreteMeasure, weight_fn: MomentWeight | Callable[[np.ndarray], np.ndarray]) -> float:
    """Weighted tail moment  sum_i M(x_i) / x_i * m_i."""
    if len(mu) == 0:
        return 0.0
    inv = _weights(mu.points, mu.masses, 1.0)
    with np.errstate(over="raise", invalid="raise"):
        try:
            vals = weight_fn(mu.points) * inv * mu.masses
            total = float(np.sum(vals))
        except FloatingPointError as exc:
            raise OverflowError("moment weight overflowed on this support") from exc
    if not math.isfinite(total):
        raise OverflowError("moment weight overflowed on this support")
    return total


# -- snapshot CSV -----------------------------------------------------------

def write_csv(mu: DiscreteMeasure, path: str | Path) -> None:
    """Write ``index,x,mass`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "x", "mass"])
        for i, (x, m) in enumerate(zip(mu.points, mu.masses)):
            writer.writerow([i, f"{x:.17g}", f"{m:.17g}"])


def read_csv(path: str | Path) -> DiscreteMeasure:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["index", "x", "mass"]:
            raise ValueError(f"unexpected snapshot header {header}")
        xs, ms = [], []
        for row in reader:
            if row:
                xs.append(float(row[1]))
                ms.append(float(row[2]))
    return DiscreteMeasure(xs, ms)
