"""Particle (EBT) scheme for the radially reduced proliferation model.

Cohorts sit at the fixed nodes x_i = i * r0 / n, i = 1..n, and their masses
follow

    dm_i/dt = (cap_i - m_i) * sum_j L(x_i, x_j) m_j,

with carrying capacity cap_i = 4 pi x_i^2 r0/n in 3D (2 pi x_i r0/n in 2D).
Time stepping is explicit Euler.  The interaction sum only runs over the
band |x_i - x_j| <= sigma.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from . import _accel
from .kernels import RadialKernel
from .measures import DiscreteMeasure

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 8 * 10**9
INIT_RULES = ("cell_integral", "point")


class StabilityError(RuntimeError):
    """dt * sum_j L(x_i, x_j) m_j exceeded 1 for some node."""


class UndefinedRatioError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    dimension: int = 3
    sigma: float = 0.04
    alpha: float = 1.0
    r0: float = 2.0
    n: int = 2000
    dt: float = 1e-3
    t_end: float = 10.0
    init_sigma_i: float = 0.79
    init_q: float = 13.0
    init_rule: str = "cell_integral"
    memory_budget_bytes: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        for name in ("sigma", "alpha", "r0", "dt", "init_sigma_i", "init_q"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.init_rule not in INIT_RULES:
            raise ValueError(f"init_rule must be one of {INIT_RULES}, got {self.init_rule!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dimension", int(self.dimension))
        if self.r0 < self.init_sigma_i:
            raise ValueError("r0 must be at least init_sigma_i")
        if self.r0 < 1.0:
            warnings.warn("r0 < 1 lies outside the range covered by the convergence theory",
                          stacklevel=3)

    @classmethod
    def coupled(cls, dt: float, **kw) -> SchemeConfig:
        """Config with the spatial step tied to the time step (n = r0 / dt)."""
        r0 = kw.get("r0", cls.r0)
        n = round(r0 / dt)
        if abs(n * dt - r0) > 1e-9 * r0:
            raise ValueError(f"r0 / dt = {r0 / dt} is not an integer")
        return cls(n=n, dt=dt, **kw)

    @property
    def h(self) -> float:
        return self.r0 / self.n

    @property
    def steps(self) -> int:
        k = round(self.t_end / self.dt)
        if abs(k * self.dt - self.t_end) > 1e-12 * max(self.t_end, self.dt):
            raise ValueError(f"t_end = {self.t_end} is not a multiple of dt = {self.dt}")
        return k

    def kernel(self) -> RadialKernel:
        return RadialKernel(self.dimension, self.sigma, self.alpha)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SchemeState:
    grid: np.ndarray
    masses: np.ndarray
    time: float = 0.0
    step: int = 0

    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure._trusted(self.grid, self.masses)

    def copy(self) -> SchemeState:
        return SchemeState(self.grid, self.masses.copy(), self.time, self.step)


def make_grid(cfg: SchemeConfig) -> np.ndarray:
    return np.arange(1, cfg.n + 1, dtype=np.float64) * (cfg.r0 / cfg.n)


def capacity(grid: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    if cfg.dimension == 3:
        return 4.0 * np.pi * grid**2 * cfg.h
    return 2.0 * np.pi * grid * cfg.h


def initial_density(r: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    """p(r, 0) = S(r) (1 - (r/si)^q) on [0, si], zero beyond."""
    si, q = cfg.init_sigma_i, cfg.init_q
    shell = 4.0 * np.pi * r**2 if cfg.dimension == 3 else 2.0 * np.pi * r
    inside = r <= si
    return np.where(inside, shell * (1.0 - (np.minimum(r, si) / si) ** q), 0.0)


def init_masses(cfg: SchemeConfig) -> SchemeState:
    """Initial cohort masses.

    ``cell_integral``: m_i is the exact integral of p(r, 0) over
    (x_{i-1}, x_i].  ``point``: m_i = p(x_i, 0) * h, the right-endpoint rule.
    S(r) = 4 pi r^2 in 3D and 2 pi r in 2D.
    """
    x = make_grid(cfg)
    if cfg.init_rule == "point":
        return SchemeState(x, initial_density(x, cfg) * cfg.h)
    si, q = cfg.init_sigma_i, cfg.init_q
    b = np.minimum(x, si)
    a = np.minimum(np.concatenate([[0.0], x[:-1]]), si)
    ua, ub = a / si, b / si
    if cfg.dimension == 3:
        poly = (b - a) * (b * b + a * b + a * a) / 3.0
        tail = si**3 * (ub ** (q + 3) - ua ** (q + 3)) / (q + 3)
        m = 4.0 * np.pi * (poly - tail)
    else:
        poly = (b - a) * (b + a) / 2.0
        tail = si**2 * (ub ** (q + 2) - ua ** (q + 2)) / (q + 2)
        m = 2.0 * np.pi * (poly - tail)
    return SchemeState(x, np.maximum(m, 0.0))


def initial_total_mass(cfg: SchemeConfig) -> float:
    """Closed-form total mass of the initial density."""
    si, q = cfg.init_sigma_i, cfg.init_q
    if cfg.dimension == 3:
        return 4.0 * np.pi * si**3 * q / (3.0 * (q + 3.0))
    return 2.0 * np.pi * si**2 * q / (2.0 * (q + 2.0))


@dataclass
class KernelBand:
    """Kernel values L(x_i, x_j) on the band |i - j| <= half_width.

    ``values`` is ``None`` in matrix-free mode; values are then recomputed
    on every product.
    """

    grid: np.ndarray
    half_width: int
    kernel: RadialKernel
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def matrix_free(self) -> bool:
        return self.values is None

    def row_range(self, i: int) -> range:
        """0-based column range of row ``i``."""
        n = self.grid.size
        return range(max(0, i - self.half_width), min(n, i + self.half_width + 1))

    def matvec(self, m: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """sum_j L(x_i, x_j) m_j, summed in ascending j."""
        n = self.grid.size
        s = self.half_width
        mpad = np.zeros(n + 2 * s)
        mpad[s:s + n] = m
        if out is None:
            out = np.empty(n)
        return self._product(mpad, out)

    def _product(self, mpad, out, threads=1):
        if self.values is not None:
            return _accel.band_matvec_threaded(self.values, mpad, out, threads)
        k = self.kernel
        return _accel.free_matvec(self.grid, self.half_width, k.prefactor, k.sigma,
                                  k.dimension, mpad, out)

    def dense(self) -> np.ndarray:
        """Full n x n kernel matrix (for testing on small grids)."""
        x = self.grid
        R, r = np.meshgrid(x, x, indexing="ij")
        return self.kernel.L(R, r)


def band_half_width(grid_step: float, sigma: float) -> int:
    """Largest k with k * grid_step <= sigma, counting rounding ties as inside."""
    k = math.floor(sigma / grid_step)
    eps = 4.0 * np.finfo(float).eps
    while (k + 1) * grid_step <= sigma * (1.0 + eps):
        k += 1
    while k > 0 and k * grid_step > sigma * (1.0 + eps):
        k -= 1
    return k


def build_band(cfg: SchemeConfig, grid: np.ndarray | None = None) -> KernelBand:
    if grid is None:
        grid = make_grid(cfg)
    n = grid.size
    s = min(band_half_width(cfg.h, cfg.sigma), n - 1)
    kernel = cfg.kernel()
    need = (2 * s + 1) * n * 8
    if need > cfg.memory_budget_bytes:
        log.info("band needs %d bytes > budget %d; using matrix-free products",
                 need, cfg.memory_budget_bytes)
        return KernelBand(grid, s, kernel, None)
    diag = _accel.kernel_diagonal_3d if cfg.dimension == 3 else _accel.kernel_diagonal_2d
    vals = np.empty((2 * s + 1, n))
    for k in range(2 * s + 1):
        vals[k] = diag(grid, k, s, kernel.prefactor, kernel.sigma)
    return KernelBand(grid, s, kernel, vals)


def interaction(state: SchemeState, band: KernelBand) -> np.ndarray:
    return band.matvec(state.masses)


def rhs(state: SchemeState, band: KernelBand, cfg: SchemeConfig) -> np.ndarray:
    cap = capacity(state.grid, cfg)
    return (cap - state.masses) * interaction(state, band)


def growth_bound(cfg: SchemeConfig) -> float:
    """Constant C with  d/dt sum m_i/x_i <= C sum m_j/x_j  for the scheme.

    Counting argument over the band: at most (2 sigma + 1) n / r0 nodes
    interact with a given node, and x_i L(x_i, x_j) x_j <= 2 sigma^2 times the
    kernel prefactor in 3D.  In 2D the kernel is bounded by its prefactor
    times pi and sum m_j <= r0 sum m_j / x_j.
    """
    k = cfg.kernel()
    count = 2.0 * cfg.sigma + 1.0
    if cfg.dimension == 3:
        return 8.0 * math.pi * cfg.sigma**2 * count * k.prefactor
    return 2.0 * math.pi * count * k.sup * cfg.r0


def growth_diagnostic(state: SchemeState, band: KernelBand, cfg: SchemeConfig) -> float:
    """(sum_i rhs_i / x_i) / (sum_j m_j / x_j)."""
    den = float(np.sum(state.masses / state.grid))
    if den <= 0.0:
        raise UndefinedRatioError("total weighted mass is zero")
    num = float(np.sum(rhs(state, band, cfg) / state.grid))
    return num / den


def tail_mass(state: SchemeState, threshold: float) -> float:
    return float(np.sum(state.masses[state.grid > threshold]))


def euler_step(state: SchemeState, band: KernelBand, cfg: SchemeConfig) -> SchemeState:
    S = interaction(state, band)
    worst = float(np.max(S)) * cfg.dt if S.size else 0.0
    if worst > 1.0:
        raise StabilityError(f"dt * interaction = {worst:.6g} > 1 at t = {state.time:g}")
    m = state.masses.copy()
    _accel.euler_update(m, capacity(state.grid, cfg), S, 1.0 / state.grid, cfg.dt)
    return SchemeState(state.grid, m, state.time + cfg.dt, state.step + 1)


@dataclass
class RunDiagnostics:
    max_growth_ratio: float = -math.inf
    min_mass: float = math.inf
    max_dt_interaction: float = 0.0
    steps: int = 0


@dataclass
class RunResult:
    final: SchemeState
    snapshots: list[SchemeState]
    diagnostics: RunDiagnostics


def run(
    cfg: SchemeConfig,
    snapshot_times: Sequence[float] = (),
    *,
    band: KernelBand | None = None,
    progress: Callable[[int, int], None] | None = None,
    threads: int = 1,
) -> RunResult:
    """Integrate to ``cfg.t_end`` with ``cfg.steps`` Euler steps.

    ``threads`` > 1 splits the banded product over row blocks; the result is
    bit-identical to the serial run.
    Snapshots are taken at the step nearest to each requested time.  The
    diagnostics record, over all steps, the largest growth ratio, the
    smallest mass and the largest dt * interaction.
    """
    nsteps = cfg.steps
    state = init_masses(cfg)
    if band is None:
        band = build_band(cfg, state.grid)
    want = sorted({min(nsteps, max(0, round(t / cfg.dt))) for t in snapshot_times})
    snaps: list[SchemeState] = []
    diag = RunDiagnostics(min_mass=float(np.min(state.masses)))

    n, s = state.grid.size, band.half_width
    m = state.masses
    cap = capacity(state.grid, cfg)
    inv_x = 1.0 / state.grid
    mpad = np.zeros(n + 2 * s)
    S = np.empty(n)
    wi = 0
    every = max(1, nsteps // 100)
    for step in range(nsteps + 1):
        while wi < len(want) and want[wi] == step:
            snaps.append(SchemeState(state.grid, m.copy(), step * cfg.dt, step))
            wi += 1
        if step == nsteps:
            break
        mpad[s:s + n] = m
        band._product(mpad, S, threads)
        worst = float(S.max()) * cfg.dt
        if worst > 1.0:
            raise StabilityError(
                f"dt * interaction = {worst:.6g} > 1 at step {step} (t = {step * cfg.dt:g})")
        num, den = _accel.euler_update(m, cap, S, inv_x, cfg.dt)
        diag.max_dt_interaction = max(diag.max_dt_interaction, worst)
        if den > 0.0:
            diag.max_growth_ratio = max(diag.max_growth_ratio, num / den)
        diag.min_mass = min(diag.min_mass, float(m.min()))
        if progress is not None and (step + 1) % every == 0:
            progress(step + 1, nsteps)
    diag.steps = nsteps
    final = SchemeState(state.grid, m, nsteps * cfg.dt, nsteps)
    return RunResult(final, snaps, diag)


def with_dt(cfg: SchemeConfig, dt: float) -> SchemeConfig:
    """Same model with dt = r0 / n = ``dt``."""
    n = round(cfg.r0 / dt)
    if abs(n * dt - cfg.r0) > 1e-9 * cfg.r0:
        raise ValueError(f"r0 / dt = {cfg.r0 / dt} is not an integer")
    return replace(cfg, n=n, dt=dt)
