"""Distances between discrete measures on the half-line.

Norms: total variation, flat (bounded-Lipschitz) norm, weighted flat norm.
Distances between non-negative measures: 1-Wasserstein under the Euclidean
or the square-root ground metric, and the mass-split metric ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sortedcontainers import SortedDict

from .measures import DiscreteMeasure, WeightSpec, weight_divide
from .transport import holder_half_w1


class MassMismatchError(ValueError):
    """W1 was asked to compare measures of different total mass."""


class EmptyMeasureError(ValueError):
    pass


class ZeroTotalMassError(ValueError):
    pass


class MetricKind(str, Enum):
    TV = "tv"
    FLAT = "flat"
    FLAT_WEIGHTED = "flat_weighted"
    W1_EUCLID = "w1_euclid"
    W1_HOLDER = "w1_holder"
    RHO = "rho"
    RHO_WEIGHTED = "rho_weighted"


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind
    weight: WeightSpec = field(default_factory=lambda: WeightSpec(1.0))
    ground: str = "euclid"

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.ground not in ("euclid", "holder_half"):
            raise ValueError(f"unknown ground metric {self.ground!r}")


def tv_norm(mu: DiscreteMeasure) -> float:
    return float(np.sum(np.abs(mu.masses)))


_WEIGHT_TOL = 1e-15   # slope weights below this are dropped (slopes live in [-1, 1])


def _move_left(lo: SortedDict, hi: SortedDict, need: float, minval: float, top: float,
               a: float) -> float:
    """Rebalance after adding need * (F - a)_+ with a left of the minimiser.

    Weight ``need`` moves from the top of ``lo`` into ``hi``; returns the new
    minimum value.
    """
    val = minval + need * (top - a)
    cur = top
    while need > _WEIGHT_TOL and lo:
        p, w = lo.peekitem(-1)
        val -= need * (cur - p)
        cur = p
        take = min(w, need)
        hi[p] = hi.get(p, 0.0) + take
        if w - take > _WEIGHT_TOL:
            lo[p] = w - take
        else:
            del lo[p]
        need -= take
    return val


def _move_right(lo: SortedDict, hi: SortedDict, need: float, minval: float, top: float,
                a: float) -> float:
    """Mirror image of ``_move_left`` for need * (a - F)_+ right of the minimiser."""
    val = minval + need * (a - top)
    cur = top
    while need > _WEIGHT_TOL and hi:
        p, w = hi.peekitem(0)
        val -= need * (p - cur)
        cur = p
        take = min(w, need)
        lo[p] = lo.get(p, 0.0) + take
        if w - take > _WEIGHT_TOL:
            hi[p] = w - take
        else:
            del hi[p]
        need -= take
    return val


def _trim(side: SortedDict, total: float, far: int) -> float:
    # cap the outer slope at 1 by removing weight from the far end
    while total > 1.0 + _WEIGHT_TOL:
        p, w = side.peekitem(far)
        excess = total - 1.0
        if w <= excess:
            del side[p]
            total -= w
        else:
            side[p] = w - excess
            total = 1.0
    return total


def flat_norm(mu: DiscreteMeasure) -> float:
    """Bounded-Lipschitz norm sup { sum psi(x_i) m_i : |psi| <= 1, Lip(psi) <= 1 }.

    Computed through the primal problem: delete mass at unit cost and move
    the rest along the line at unit cost per distance.  G(F) is the cheapest
    cost of the atoms seen so far given net flow F towards the next atom.
    Each atom shifts G by its mass, deleting caps the slopes of G at +-1,
    and moving to the next atom adds gap * |F|.  G is convex piecewise linear
    and is stored as its minimum value plus two sorted maps of slope
    breakpoints (left and right of the minimiser) in coordinates relative to
    a global shift, so coincident breakpoints merge and each atom costs
    O(log n) amortised.  The answer is G(0) after the last atom.
    """
    n = len(mu)
    if n == 0:
        return 0.0
    x = mu.points.tolist()
    m = mu.masses.tolist()
    lo = SortedDict({0.0: 1.0})
    hi = SortedDict({0.0: 1.0})
    w_lo = w_hi = 1.0
    shift = 0.0
    minval = 0.0
    for i in range(n - 1):
        shift += m[i]
        d = x[i + 1] - x[i]
        a = -shift      # F = 0 in stored coordinates
        top = lo.peekitem(-1)[0]
        if a >= top:
            hi[a] = hi.get(a, 0.0) + d
        else:
            lo[a] = lo.get(a, 0.0) + d
            minval = _move_left(lo, hi, d, minval, top, a)
        w_hi += d
        top = hi.peekitem(0)[0]
        if a <= top:
            lo[a] = lo.get(a, 0.0) + d
        else:
            hi[a] = hi.get(a, 0.0) + d
            minval = _move_right(lo, hi, d, minval, top, a)
        w_lo += d
        w_lo = _trim(lo, w_lo, 0)
        w_hi = _trim(hi, w_hi, -1)
    shift += m[-1]
    return max(_evaluate(lo, hi, minval, -shift), 0.0)


def _evaluate(lo: SortedDict, hi: SortedDict, minval: float, a: float) -> float:
    """Value of the stored convex function at ``a``."""
    val = minval
    top_lo, top_hi = lo.peekitem(-1)[0], hi.peekitem(0)[0]
    if a < top_lo:
        cur, slope = top_lo, 0.0
        for p in reversed(lo.keys()):
            if p <= a:
                break
            val += slope * (cur - p)
            cur = p
            slope += lo[p]
        val += slope * (cur - a)
    elif a > top_hi:
        cur, slope = top_hi, 0.0
        for p in hi.keys():
            if p >= a:
                break
            val += slope * (p - cur)
            cur = p
            slope += hi[p]
        val += slope * (a - cur)
    return val


def flat_norm_weighted(mu: DiscreteMeasure, w: WeightSpec | float = 1.0) -> float:
    """Flat norm of mu / r**e (e = 1 is the weighted norm used for 3D errors)."""
    return flat_norm(weight_divide(mu, w))


def _check_pair(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if len(mu) == 0 or len(nu) == 0:
        raise EmptyMeasureError("W1 needs non-empty measures")
    if not (mu.is_nonnegative() and nu.is_nonnegative()):
        raise ValueError("W1 is defined here for non-negative measures only")
    a, b = mu.total_mass(), nu.total_mass()
    if a <= 0.0 or b <= 0.0:
        raise EmptyMeasureError("W1 needs positive total mass")
    if abs(a - b) > 1e-9 * max(a, b):
        raise MassMismatchError(f"total masses differ: {a!r} vs {b!r}")


def _merged_difference(mu: DiscreteMeasure, nu: DiscreteMeasure):
    x = np.union1d(mu.points, nu.points)
    diff = np.zeros_like(x)
    diff[np.searchsorted(x, mu.points)] += mu.masses
    diff[np.searchsorted(x, nu.points)] -= nu.masses
    return x, diff


def w1(mu: DiscreteMeasure, nu: DiscreteMeasure, ground: str = "euclid") -> float:
    """1-Wasserstein distance between equal-mass non-negative measures."""
    _check_pair(mu, nu)
    x, diff = _merged_difference(mu, nu)
    if ground == "euclid":
        cdf = np.cumsum(diff)[:-1]
        return float(np.sum(np.abs(cdf) * np.diff(x)))
    if ground == "holder_half":
        return holder_half_w1(x, diff)
    raise ValueError(f"unknown ground metric {ground!r}")


def rho(mu: DiscreteMeasure, nu: DiscreteMeasure, ground: str = "euclid") -> float:
    """min(M1, M2) * W1(mu/M1, nu/M2) + |M1 - M2|."""
    a, b = mu.total_mass(), nu.total_mass()
    if a == 0.0 or b == 0.0:
        raise ZeroTotalMassError("rho needs nonzero total masses")
    if mu == nu:
        return 0.0
    return min(a, b) * w1(mu.scale(1.0 / a), nu.scale(1.0 / b), ground) + abs(a - b)


def distance(mu: DiscreteMeasure, nu: DiscreteMeasure, spec: MetricSpec) -> float:
    """Distance between two measures under ``spec``."""
    kind = spec.kind
    if kind is MetricKind.TV:
        return tv_norm(mu - nu)
    if kind is MetricKind.FLAT:
        return flat_norm(mu - nu)
    if kind is MetricKind.FLAT_WEIGHTED:
        return flat_norm_weighted(mu - nu, spec.weight)
    if kind is MetricKind.W1_EUCLID:
        return w1(mu, nu, "euclid")
    if kind is MetricKind.W1_HOLDER:
        return w1(mu, nu, "holder_half")
    if kind is MetricKind.RHO:
        return rho(mu, nu, spec.ground)
    if kind is MetricKind.RHO_WEIGHTED:
        return rho(weight_divide(mu, spec.weight), weight_divide(nu, spec.weight), spec.ground)
    raise ValueError(kind)


def dirac_flat_distance(x: float, y: float) -> float:
    """Closed form of the flat norm of delta_x - delta_y."""
    return min(abs(x - y), 2.0)
