"""Exact transportation solver for the square-root ground cost on a line.

The cost |x - y|**0.5 is concave, so the monotone (CDF) coupling is not
optimal and W1 has no closed form.  Because the cost is a metric, W1 only
depends on mu - nu; shared mass cancels before solving.  What remains is a
transportation LP, solved by column generation: a sparse set of short arcs
(plus a feasible monotone plan) goes to a warm-started HiGHS model, then the duals are checked
against every source/sink pair and violating arcs are added until none
remain.
"""

from __future__ import annotations

import logging

import highspy
import numpy as np

log = logging.getLogger(__name__)

DENSE_LIMIT = 40_000     # source*sink pairs solved as one dense LP
WINDOW = 8               # initial sinks per source on each side
ADD_PER_LINE = 8         # violating arcs added per source (and per sink) and round
PRUNE_REL = 1e-14        # atoms lighter than this fraction of the moved mass are dropped
_TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def sqrt_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(a - b))


def _monotone_plan(s: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arcs of the north-west-corner plan (feasible, at most n + m - 1 arcs)."""
    rows, cols = [], []
    i = j = 0
    rs, rt = s[0], t[0]
    n, m = s.size, t.size
    while i < n and j < m:
        rows.append(i)
        cols.append(j)
        if rs <= rt:
            rt -= rs
            i += 1
            if i < n:
                rs = s[i]
        else:
            rs -= rt
            j += 1
            if j < m:
                rt = t[j]
    # rounding can end the walk early; tie leftover sources/sinks to the last ones
    rows += list(range(i, n)) + [n - 1] * max(0, m - j)
    cols += [m - 1] * max(0, n - i) + list(range(j, m))
    return np.asarray(rows), np.asarray(cols)


def _window_arcs(a: np.ndarray, b: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.searchsorted(b, a)
    offs = np.arange(-width, width)
    cols = k[:, None] + offs[None, :]
    rows = np.broadcast_to(np.arange(a.size)[:, None], cols.shape)
    ok = (cols >= 0) & (cols < b.size)
    return rows[ok], cols[ok]


class _Master:
    """Restricted transport LP kept in one HiGHS model across rounds.

    Added columns leave the previous basis primal feasible, so each re-solve
    warm-starts instead of starting from scratch.
    """

    def __init__(self, a, b, s, t):
        self.a, self.b, self.n = a, b, s.size
        self.cost = np.empty(0)
        h = self.h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("solver", "simplex")
        h.setOptionValue("simplex_strategy", 4)  # primal: new columns keep the basis feasible
        for key, value in _TIGHT.items():
            h.setOptionValue(key, value)
        rhs = np.concatenate([s, t])
        empty_i, empty_f = np.zeros(0, np.int32), np.zeros(0)
        h.addRows(rhs.size, rhs, rhs, 0, np.zeros(rhs.size, np.int32), empty_i, empty_f)

    def add(self, rows, cols):
        k = rows.size
        c = sqrt_cost(self.a[rows], self.b[cols])
        index = np.empty(2 * k, np.int32)
        index[0::2], index[1::2] = rows, self.n + cols
        self.h.addCols(k, c, np.zeros(k), np.full(k, highspy.kHighsInf), 2 * k,
                       np.arange(0, 2 * k, 2, dtype=np.int32), index, np.ones(2 * k))
        self.cost = np.concatenate([self.cost, c])

    def solve(self):
        h = self.h
        for attempt in range(3):
            h.run()
            if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
                break
            log.debug("HiGHS attempt %d: %s", attempt, h.modelStatusToString(h.getModelStatus()))
            # presolve occasionally misreports a feasible transport LP as
            # infeasible under tight tolerances; retry cold without it, then loose
            h.clearSolver()
            h.setOptionValue("presolve", "off")
            if attempt == 1:
                h.resetOptions()
                h.setOptionValue("output_flag", False)
        else:
            raise RuntimeError(f"transport LP failed: {h.modelStatusToString(h.getModelStatus())}")
        sol = h.getSolution()
        x = np.asarray(sol.col_value)
        y = np.asarray(sol.row_dual)
        return float(np.dot(self.cost, x)), y[:self.n], y[self.n:]


def _violations(a, b, u, v, tol, per_line, chunk=512):
    """Most violated arcs: up to ``per_line`` per source and per sink."""
    new_r, new_c = [], []
    worst = 0.0
    col_best = np.zeros((0, b.size))
    col_rows = np.zeros((0, b.size), dtype=np.int64)
    for lo in range(0, a.size, chunk):
        hi = min(lo + chunk, a.size)
        rc = sqrt_cost(a[lo:hi, None], b[None, :]) - u[lo:hi, None] - v[None, :]
        bad = rc < -tol
        if not bad.any():
            continue
        worst = min(worst, float(rc.min()))
        for r in np.nonzero(bad.any(axis=1))[0]:
            row = rc[r]
            cand = np.nonzero(row < -tol)[0]
            if cand.size > per_line:
                cand = cand[np.argpartition(row[cand], per_line)[:per_line]]
            new_r.append(np.full(cand.size, lo + r))
            new_c.append(cand)
        # running per-column best candidates
        k = min(per_line, hi - lo)
        idx = np.argpartition(rc, k - 1, axis=0)[:k]
        vals = np.take_along_axis(rc, idx, axis=0)
        col_best = np.concatenate([col_best, vals])
        col_rows = np.concatenate([col_rows, idx + lo])
        if col_best.shape[0] > per_line:
            keep = np.argpartition(col_best, per_line - 1, axis=0)[:per_line]
            col_best = np.take_along_axis(col_best, keep, axis=0)
            col_rows = np.take_along_axis(col_rows, keep, axis=0)
    if not new_r:
        return None, None, 0.0
    ok = col_best < -tol
    cols = np.broadcast_to(np.arange(b.size), col_best.shape)
    new_r.append(col_rows[ok])
    new_c.append(cols[ok])
    return np.concatenate(new_r), np.concatenate(new_c), worst


def transport_cost(a: np.ndarray, s: np.ndarray, b: np.ndarray, t: np.ndarray) -> float:
    """Minimal sum pi_ij |a_i - b_j|**0.5 over plans with marginals s and t.

    ``a`` and ``b`` must be sorted; the masses must be positive with equal sums
    (a relative mismatch up to 1e-9 is absorbed by rescaling ``t``).
    """
    n, m = s.size, t.size
    if n == 0 or m == 0:
        return 0.0
    total = float(s.sum())
    # O(1) variables keep the HiGHS absolute tolerances meaningful
    unit = total / n
    s = s / unit
    t = t * (s.sum() / t.sum())
    master = _Master(a, b, s, t)
    if n * m <= DENSE_LIMIT:
        master.add(np.repeat(np.arange(n), m), np.tile(np.arange(m), n))
        return master.solve()[0] * unit

    r0, c0 = _monotone_plan(s, t)
    r1, c1 = _window_arcs(a, b, WINDOW)
    c2, r2 = _window_arcs(b, a, WINDOW)
    arcs = np.unique(np.concatenate([r0 * m + c0, r1 * m + c1, r2 * m + c2]))
    master.add(*np.divmod(arcs, m))
    tol = 1e-9
    for it in range(200):
        obj, u, v = master.solve()
        nr, nc, worst = _violations(a, b, u, v, tol, ADD_PER_LINE)
        log.debug("transport round %d: %d arcs, worst reduced cost %.3e", it, arcs.size, worst)
        if nr is None:
            return obj * unit
        fresh = np.setdiff1d(nr * m + nc, arcs)
        arcs = np.union1d(arcs, fresh)
        master.add(*np.divmod(fresh, m))
    raise RuntimeError("transport column generation did not converge")


def holder_half_w1(x: np.ndarray, diff: np.ndarray) -> float:
    """W1 under |x - y|**0.5 for the signed net mass ``diff`` on sorted ``x``.

    Atoms below ``PRUNE_REL`` times the moved mass are dropped before solving
    (HiGHS cannot balance rows spanning 40 orders of magnitude).  The result
    moves by at most the dropped mass times sqrt(x[-1] - x[0]).
    """
    moved = float(np.sum(np.abs(diff))) / 2.0
    if moved == 0.0:
        return 0.0
    pos = diff > PRUNE_REL * moved
    neg = diff < -PRUNE_REL * moved
    return transport_cost(x[pos], diff[pos], x[neg], -diff[neg])
