"""Independent reference computations used to check the fast code paths.

* ``cartesian_convolution`` integrates the normalised ball indicator against a
  radially symmetric density directly in Cartesian space (coordinates centred
  at the evaluation point), without using the radial kernel at all.
* ``radial_side`` integrates L(R, r) p(r) dr with the closed-form kernel.
* ``lp_flat_oracle`` solves the flat-norm dual as a generic LP.
* ``enumerate_transport`` finds the optimal transport plan of tiny problems by
  visiting every basic feasible solution with exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .kernels import RadialKernel
from .measures import DiscreteMeasure

LP_ORACLE_MAX_POINTS = 12


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class RadialDensity:
    """Radially symmetric density described by its profile n(|x|).

    kinds: ``flat_top`` (params si, q) with n = 1 - (r/si)^q on [0, si];
    ``indicator`` (param a) with n = 1 on [0, a]; ``gaussian_bump`` (params
    c, s) with n = exp(-(r - c)^2 / (2 s^2)).  The radial density is
    p(r) = 4 pi r^2 n(r) in 3D and 2 pi r n(r) in 2D.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        want = {"flat_top": 2, "indicator": 1, "gaussian_bump": 2}
        if self.kind not in want:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if len(self.params) != want[self.kind]:
            raise ValueError(f"{self.kind} takes {want[self.kind]} parameters")
        positive = self.params[1:] if self.kind == "gaussian_bump" else self.params
        if not all(v > 0 and math.isfinite(v) for v in positive):
            raise ValueError("density parameters must be positive")

    @classmethod
    def flat_top(cls, si: float = 0.79, q: float = 13.0) -> RadialDensity:
        return cls("flat_top", (float(si), float(q)))

    @classmethod
    def indicator(cls, a: float) -> RadialDensity:
        return cls("indicator", (float(a),))

    @classmethod
    def gaussian_bump(cls, c: float, s: float) -> RadialDensity:
        return cls("gaussian_bump", (float(c), float(s)))

    @property
    def breaks(self) -> tuple[float, ...]:
        """Radii where the profile is not smooth."""
        if self.kind == "gaussian_bump":
            return ()
        return (self.params[0],)

    def profile(self, r):
        """Cartesian density n(|x|) at |x| = r."""
        r = np.asarray(r, dtype=np.float64)
        if self.kind == "flat_top":
            si, q = self.params
            out = np.where(r <= si, 1.0 - (np.minimum(r, si) / si) ** q, 0.0)
        elif self.kind == "indicator":
            out = np.where(r <= self.params[0], 1.0, 0.0)
        else:
            c, s = self.params
            out = np.exp(-0.5 * ((r - c) / s) ** 2)
        return out if out.ndim else float(out)

    def p(self, r, dimension: int = 3):
        r = np.asarray(r, dtype=np.float64)
        shell = 4.0 * np.pi * r**2 if dimension == 3 else 2.0 * np.pi * r
        out = shell * self.profile(r)
        return out if out.ndim else float(out)

    def cartesian(self, x):
        """n at Cartesian points ``x`` (last axis holds the coordinates)."""
        return self.profile(np.linalg.norm(np.asarray(x, dtype=np.float64), axis=-1))


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _panels(lo: float, hi: float, cuts) -> list[tuple[float, float]]:
    pts = sorted({lo, hi, *(c for c in cuts if lo < c < hi)})
    return [(a, b) for a, b in zip(pts, pts[1:]) if b > a]


def _nodes(lo: float, hi: float, cuts, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [lo, hi] split at ``cuts``."""
    t, w = _gauss(n)
    xs, ws = [], []
    for a, b in _panels(lo, hi, cuts):
        half = 0.5 * (b - a)
        xs.append(a + half * (t + 1.0))
        ws.append(half * w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def _ball_average(d: RadialDensity, k: RadialKernel, R: float, n: int) -> float:
    sigma = k.sigma
    # radii rho (from the ball centre) where the sphere of radius rho becomes
    # tangent to a break sphere of the density
    cuts = [c for b in d.breaks for c in (abs(R - b), R + b)]
    rho, wr = _nodes(0.0, sigma, cuts, n)
    total = 0.0
    for p, w in zip(rho, wr):
        # 3D: y = x + p (sin t cos f, sin t sin f, cos t), f integrated out.
        # 2D: y = x + p (sin t, cos t), t in [0, pi] doubled by symmetry.
        angle_cuts = []
        for b in d.breaks:
            if R > 0 and p > 0:
                c = (b * b - R * R - p * p) / (2.0 * R * p)
                if -1.0 < c < 1.0:
                    angle_cuts.append(math.acos(c))
        th, wt = _nodes(0.0, math.pi, angle_cuts, n)
        radius = np.sqrt(np.maximum(R * R + p * p + 2.0 * R * p * np.cos(th), 0.0))
        vals = d.profile(radius)
        if k.dimension == 3:
            inner = 2.0 * math.pi * float(np.sum(wt * vals * np.sin(th)))
            total += w * p * p * inner
        else:
            inner = 2.0 * float(np.sum(wt * vals))
            total += w * p * inner
    volume = 4.0 * math.pi * sigma**3 / 3.0 if k.dimension == 3 else math.pi * sigma**2
    return k.alpha * total / volume


def cartesian_convolution(d: RadialDensity, k: RadialKernel, R: float,
                          resolution: int = 256) -> tuple[float, float]:
    """(k * n)(x) at |x| = R with k the ball indicator scaled by alpha / |B_sigma|.

    Product Gauss-Legendre quadrature over the ball centred at x in
    coordinates centred at x (distance rho and polar angle), split where the
    density profile has kinks.  Returns (value, error estimate), the estimate
    being the change from ``resolution // 2``.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if R < 0:
        raise ValueError("R must be non-negative")
    fine = _ball_average(d, k, float(R), resolution)
    coarse = _ball_average(d, k, float(R), resolution // 2)
    return fine, abs(fine - coarse)


def radial_side(d: RadialDensity, k: RadialKernel, R: float,
                resolution: int = 256) -> tuple[float, float]:
    """Integral of L(R, r) p(r) dr over [max(0, R - sigma), R + sigma].

    Panels split at the kernel branch points and density kinks.  Returns
    (value, error estimate) as for ``cartesian_convolution``.
    """
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if not R > 0:
        raise ValueError("R must be positive")
    s = k.sigma
    lo, hi = max(0.0, R - s), R + s
    cuts = [abs(s - R), *d.breaks]

    def integrate(n):
        r, w = _nodes(lo, hi, cuts, n)
        keep = r > 0
        r, w = r[keep], w[keep]
        return float(np.sum(w * k.L(R, r) * d.p(r, k.dimension)))

    fine = integrate(resolution)
    return fine, abs(fine - integrate(resolution // 2))


def lp_flat_oracle(mu: DiscreteMeasure) -> float:
    """Flat norm as an LP in the test-function values psi_i.

    max sum psi_i m_i  s.t.  |psi_i| <= 1,  |psi_{i+1} - psi_i| <= x_{i+1} - x_i.
    """
    n = len(mu)
    if n > LP_ORACLE_MAX_POINTS:
        raise OracleSizeError(f"LP oracle takes at most {LP_ORACLE_MAX_POINTS} points, got {n}")
    if n == 0:
        return 0.0
    gaps = np.diff(mu.points)
    rows = []
    for i in range(n - 1):
        e = np.zeros(n)
        e[i], e[i + 1] = -1.0, 1.0
        rows += [e, -e]
    A = np.array(rows) if rows else None
    b = np.repeat(gaps, 2) if rows else None
    res = linprog(-mu.masses, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * n, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:  # pragma: no cover - the LP is always feasible and bounded
        raise RuntimeError(res.message)
    return float(-res.fun)


def enumerate_transport(a: Sequence[float], s: Sequence, b: Sequence[float], t: Sequence,
                        cost=lambda x, y: abs(x - y) ** 0.5) -> float:
    """Minimal transport cost by enumerating every basic feasible plan.

    Masses are converted to ``Fraction`` so basic solutions are exact; the
    totals must agree exactly.  Only sensible for a handful of points.
    """
    s = [Fraction(v) for v in s]
    t = [Fraction(v) for v in t]
    n, m = len(s), len(t)
    if sum(s) != sum(t):
        raise ValueError("marginals must have equal totals")
    if n * m > 16:
        raise OracleSizeError("enumeration is limited to 16 arcs")
    arcs = [(i, j) for i in range(n) for j in range(m)]
    best = math.inf
    rank = n + m - 1
    for basis in itertools.combinations(arcs, rank):
        plan = _solve_basis(basis, s, t)
        if plan is None or any(v < 0 for v in plan.values()):
            continue
        c = sum(float(v) * cost(a[i], b[j]) for (i, j), v in plan.items())
        best = min(best, c)
    return best


def _solve_basis(basis, s, t):
    """Plan supported on ``basis`` meeting the marginals, or None."""
    rs, rt = list(s), list(t)
    left = set(basis)
    plan = {}
    # peel leaves of the basis tree: a row or column with one open arc
    while left:
        for arc in left:
            i, j = arc
            row_deg = sum(1 for (p, _) in left if p == i)
            col_deg = sum(1 for (_, q) in left if q == j)
            if row_deg == 1:
                v = rs[i]
                break
            if col_deg == 1:
                v = rt[j]
                break
        else:
            return None   # contains a cycle: not a basis
        plan[arc] = v
        rs[i] -= v
        rt[j] -= v
        left.remove(arc)
    if any(rs) or any(rt):
        return None
    return plan
