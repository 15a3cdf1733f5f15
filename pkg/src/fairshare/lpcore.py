"""Small dense revised-simplex LP solver.

Problems are stated as::

    min/max  c @ x
    s.t.     A_eq @ x == b_eq
             A_ge @ x >= b_ge
             x >= 0            (except columns flagged free)

Free columns are split into a difference of two nonnegative columns, ``>=``
rows receive surplus columns, and a two-phase method with one artificial per
row finds a starting basis (or repairs a caller-supplied crash basis). Pricing is Dantzig's most-negative reduced cost;
Bland's smallest-index rule takes over after ``5 * (rows + cols)`` iterations
or a long run of degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericalFailure

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
REFACTOR_EVERY = 64
DEGENERATE_STALL = 200


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    sense: str = "min"
    A_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    A_ge: sp.csr_matrix | None = None
    b_ge: np.ndarray | None = None
    free: np.ndarray | None = None  # boolean mask over columns
    var_names: list[str] | None = None
    eq_names: list[str] | None = None
    ge_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n)
        self.A_ge, self.b_ge = _rows(self.A_ge, self.b_ge, n)
        self.free = np.zeros(n, dtype=bool) if self.free is None else np.asarray(self.free, dtype=bool)
        if self.free.shape != (n,):
            raise ValueError("free mask must have one entry per variable")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A_eq.shape[0] + self.A_ge.shape[0]

    def residuals(self, x: np.ndarray) -> tuple[float, float]:
        """Max equality violation and max ``>=`` shortfall at ``x``."""
        eq = float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0))
        ge = float(np.max(self.b_ge - self.A_ge @ x, initial=0.0))
        return eq, max(ge, 0.0)


def _rows(A, b, n):
    if A is None:
        return sp.csr_matrix((0, n)), np.zeros(0)
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[1] != n or A.shape[0] != b.shape[0]:
        raise ValueError(f"constraint block shape {A.shape} inconsistent with {n} vars / {b.shape[0]} rhs")
    return A, b


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    objective: float = float("nan")
    x: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    duals_ge: np.ndarray | None = None
    iterations: int = 0
    residual_eq: float = float("nan")
    residual_ge: float = float("nan")
    backend: str = "simplex"
    notes: list[str] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Simplex:
    """Revised simplex on ``min c@x, A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A: sp.csc_matrix, b: np.ndarray, n_real: int, basis=None):
        self.A = A
        self.b = b
        self.m, self.n = A.shape
        self.n_real = n_real  # columns >= n_real are artificials
        self.iterations = 0
        self.since_refactor = 0
        if basis is None:
            self.basis = np.arange(self.n_real, self.n_real + self.m)
            self.Binv = np.eye(self.m)
        else:
            self.basis = np.asarray(basis, dtype=int)
            self.refactor()

    def refactor(self):
        B = self.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("basis matrix became singular") from exc
        self.since_refactor = 0

    def xB(self) -> np.ndarray:
        return self.Binv @ self.b

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        bland_after = 5 * (self.m + self.n)
        degenerate_run = 0
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[self.basis] = True
        AT = self.A.T.tocsr()
        while True:
            if self.iterations >= max_iter:
                raise NumericalFailure(f"simplex did not converge in {max_iter} iterations")
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            y = cost[self.basis] @ self.Binv
            red = cost - AT @ y
            cand = allowed & ~in_basis & (red < -OPT_TOL)
            if not cand.any():
                if self.since_refactor:
                    self.refactor()
                    y = cost[self.basis] @ self.Binv
                    red = cost - AT @ y
                    cand = allowed & ~in_basis & (red < -OPT_TOL)
                if not cand.any():
                    return "optimal"
            idx = np.flatnonzero(cand)
            use_bland = self.iterations >= bland_after or degenerate_run >= DEGENERATE_STALL
            q = int(idx[0]) if use_bland else int(idx[np.argmin(red[idx])])
            col = self.A[:, q].toarray().ravel()
            d = self.Binv @ col
            xb = self.xB()
            pos = np.flatnonzero(d > PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = np.maximum(xb[pos], 0.0) / d[pos]
            tmin = ratios.min()
            ties = pos[ratios <= tmin + 1e-12 * max(1.0, tmin)]
            if use_bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(d[ties])])
            degenerate_run = degenerate_run + 1 if tmin <= FEAS_TOL else 0
            # eta update of the explicit inverse
            piv = d[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(d, row_r)
            self.Binv[r] = row_r
            in_basis[self.basis[r]] = False
            in_basis[q] = True
            self.basis[r] = q
            self.iterations += 1
            self.since_refactor += 1

    def drive_out_artificials(self):
        """Pivot zero-level artificials out of the basis where possible.

        Rows where no real column can replace the artificial are redundant;
        the artificial stays basic at zero and can never move.
        """
        for r in range(self.m):
            if self.basis[r] < self.n_real:
                continue
            row = self.Binv[r] @ self.A[:, : self.n_real]
            row = np.asarray(row).ravel()
            in_basis = np.zeros(self.n_real, dtype=bool)
            in_basis[self.basis[self.basis < self.n_real]] = True
            cand = np.flatnonzero((np.abs(row) > 1e-7) & ~in_basis)
            if cand.size == 0:
                continue
            q = int(cand[np.argmax(np.abs(row[cand]))])
            d = self.Binv @ self.A[:, q].toarray().ravel()
            piv = d[r]
            row_r = self.Binv[r] / piv
            self.Binv -= np.outer(d, row_r)
            self.Binv[r] = row_r
            self.basis[r] = q
            self.since_refactor += 1
        self.refactor()


def solve_lp(lp: LinearProgram, backend: str = "simplex", max_iter: int | None = None,
             basis_hint=None) -> LpSolution:
    """Solve ``lp``. ``backend="highs"`` routes through scipy for cross-checks.

    ``basis_hint`` optionally proposes a starting basis: one entry per row
    (equality rows first, then ``>=`` rows), each either a structural column
    index, ``("neg", j)`` for the negative part of free column ``j``,
    ``("surplus", k)`` for the surplus of ``>=`` row ``k``, or ``None`` for
    the row's artificial. Singular or primal-infeasible hints are ignored.
    """
    if backend == "highs":
        return _solve_highs(lp)
    if backend != "simplex":
        raise ValueError(f"unknown backend {backend!r}")

    n = lp.n_vars
    sign = 1.0 if lp.sense == "min" else -1.0
    free_idx = np.flatnonzero(lp.free)
    m_eq, m_ge = lp.A_eq.shape[0], lp.A_ge.shape[0]
    m = m_eq + m_ge

    # structural | negated free copies | surplus
    blocks = [sp.vstack([lp.A_eq, lp.A_ge]).tocsc()]
    c_std = [sign * lp.c]
    if free_idx.size:
        blocks.append(-blocks[0][:, free_idx])
        c_std.append(-sign * lp.c[free_idx])
    if m_ge:
        surplus = sp.vstack([sp.csr_matrix((m_eq, m_ge)), -sp.identity(m_ge)])
        blocks.append(surplus.tocsc())
        c_std.append(np.zeros(m_ge))
    A = sp.hstack(blocks).tocsc()
    b = np.concatenate([lp.b_eq, lp.b_ge])
    flip = b < 0
    if flip.any():
        D = sp.diags(np.where(flip, -1.0, 1.0))
        A = (D @ A).tocsc()
        b = np.abs(b)
    n_real = A.shape[1]
    c_real = np.concatenate(c_std)
    if max_iter is None:
        max_iter = 50 * (m + n_real) + 1000

    art_sign = np.ones(m)
    start = None
    if basis_hint is not None:
        start = _crash_basis(A, b, basis_hint, n, free_idx, m_eq)
        if start is not None:
            start, art_sign = start
    A_full = sp.hstack([A, sp.diags(art_sign, format="csc")]).tocsc()
    spx = _Simplex(A_full, b, n_real, start)
    phase1 = np.concatenate([np.zeros(n_real), np.ones(m)])
    allowed = np.ones(n_real + m, dtype=bool)
    status = spx.run(phase1, allowed, max_iter)
    if status != "optimal":
        raise NumericalFailure(f"phase I ended with status {status}")
    infeas = float(phase1[spx.basis] @ spx.xB())
    if infeas > FEAS_TOL * max(1.0, float(b.max(initial=0.0))):
        return LpSolution("infeasible", iterations=spx.iterations,
                          notes=[f"phase I infeasibility {infeas:.3e}"])
    spx.drive_out_artificials()
    allowed[n_real:] = False
    cost2 = np.concatenate([c_real, np.zeros(m)])
    status = spx.run(cost2, allowed, max_iter)
    if status == "unbounded":
        return LpSolution("unbounded", iterations=spx.iterations)

    spx.refactor()
    xs = np.zeros(n_real + m, dtype=np.longdouble)
    xs[spx.basis] = _refine(A_full, b, spx.basis, spx.Binv)
    xs = np.where(np.abs(xs) < 1e-13, 0.0, xs)
    x_ld = xs[:n].copy()
    if free_idx.size:
        x_ld[free_idx] -= xs[n : n + free_idx.size]
    notes = []
    art = xs[n_real:]
    if np.any(np.abs(art) > FEAS_TOL):
        notes.append(f"artificial residue {float(np.max(np.abs(art))):.3e}")
    neg = ~lp.free & (x_ld < 0)
    if np.any(x_ld[neg] < -1e-12):
        notes.append(f"clamped negative primal {float(x_ld[neg].min()):.3e}")
    x_ld[neg] = 0.0
    objective = float(np.sum(lp.c.astype(np.longdouble) * x_ld))
    x = x_ld.astype(float)
    y = cost2[spx.basis] @ spx.Binv
    y = np.where(flip, -y, y) * sign
    res_eq, res_ge = lp.residuals(x)
    if max(res_eq, res_ge) > FEAS_TOL:
        raise NumericalFailure(f"primal residual {max(res_eq, res_ge):.3e} exceeds {FEAS_TOL}")
    return LpSolution("optimal", objective, x, y[:m_eq], y[m_eq:], spx.iterations,
                      res_eq, res_ge, "simplex", notes)


def _refine(A, b, basis, Binv, steps: int = 3) -> np.ndarray:
    """Basic solution by iterative refinement with extended-precision residuals.

    Float64 corrections from the basis inverse, residuals in long double; the
    result is accurate well below float64 resolution, so alternative optimal
    bases report the same rounded objective.
    """
    B = A[:, basis].astype(np.longdouble).tocsr()
    rhs = b.astype(np.longdouble)
    x = (Binv @ b).astype(np.longdouble)
    for _ in range(steps):
        r = rhs - B @ x
        x += Binv @ r.astype(float)
    return x


def _crash_basis(A, b, hint, n, free_idx, m_eq):
    m = A.shape[0]
    if len(hint) != m:
        return None
    free_pos = {int(j): k for k, j in enumerate(free_idx)}
    n_real = A.shape[1]
    cols = []
    for r, h in enumerate(hint):
        if h is None:
            cols.append(n_real + r)
        elif isinstance(h, tuple) and h[0] == "neg":
            cols.append(n + free_pos[int(h[1])])
        elif isinstance(h, tuple) and h[0] == "surplus":
            cols.append(n + len(free_idx) + int(h[1]))
        else:
            cols.append(int(h))
    cols = np.array(cols)
    if len(set(cols.tolist())) != m:
        return None
    A_full = sp.hstack([A, sp.identity(m, format="csc")]).tocsc()
    try:
        B = A_full[:, cols].toarray()
        if np.linalg.cond(B) > 1e12:
            return None
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError:
        return None
    art = cols >= n_real
    # a negative surplus is swapped for its row's artificial
    surplus = (cols >= n + len(free_idx)) & ~art
    bad = surplus & (xb < -FEAS_TOL)
    if bad.any():
        for k in np.flatnonzero(bad):
            cols[k] = n_real + m_eq + (cols[k] - n - len(free_idx))
        try:
            xb = np.linalg.solve(A_full[:, cols].toarray(), b)
        except np.linalg.LinAlgError:
            return None
        art = cols >= n_real
    if np.any(xb[~art] < -FEAS_TOL):
        log.debug("basis hint infeasible; starting from artificials")
        return None
    sign = np.ones(m)
    neg_art = art & (xb < 0)
    sign[cols[neg_art] - n_real] = -1.0
    return cols, sign


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    sign = 1.0 if lp.sense == "min" else -1.0
    bounds = [(None, None) if f else (0, None) for f in lp.free]
    res = linprog(sign * lp.c,
                  A_ub=-lp.A_ge if lp.A_ge.shape[0] else None,
                  b_ub=-lp.b_ge if lp.A_ge.shape[0] else None,
                  A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
                  b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution("infeasible", backend="highs")
    if res.status == 3:
        return LpSolution("unbounded", backend="highs")
    if res.status != 0:
        raise NumericalFailure(f"highs: {res.message}")
    x = res.x
    res_eq, res_ge = lp.residuals(x)
    return LpSolution("optimal", float(lp.c @ x), x, iterations=int(res.nit),
                      residual_eq=res_eq, residual_ge=res_ge, backend="highs")


# ---------------------------------------------------------------- text dump

def dump_lp(lp: LinearProgram) -> str:
    """Plain-text standard form; see README for the layout."""
    names = lp.var_names or [f"x{j}" for j in range(lp.n_vars)]
    lines = ["# fairshare-lp 1", f"vars: {lp.n_vars}",
             "names: " + " ".join(names),
             "objective: " + lp.sense + " " + _fmt_row(lp.c),
             "free: " + " ".join(str(j) for j in np.flatnonzero(lp.free))]
    for k, (A, b, op, default) in enumerate([(lp.A_eq, lp.b_eq, "=", lp.eq_names),
                                             (lp.A_ge, lp.b_ge, ">=", lp.ge_names)]):
        for i in range(A.shape[0]):
            name = default[i] if default else f"{'eq' if k == 0 else 'ge'}{i}"
            row = A.getrow(i)
            coeffs = " ".join(f"{int(j)}:{float(v)!r}" for j, v in zip(row.indices, row.data) if v != 0)
            lines.append(f"{name}: {coeffs}, {op}, {float(b[i])!r}")
    return "\n".join(lines) + "\n"


def _fmt_row(v) -> str:
    return " ".join(f"{j}:{float(x)!r}" for j, x in enumerate(v) if x != 0)


def parse_lp(text: str) -> LinearProgram:
    header = {}
    eq_rows, ge_rows = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(":")
        if key in ("vars", "names", "objective", "free"):
            header[key] = rest.strip()
            continue
        coeffs, op, rhs = (p.strip() for p in rest.rsplit(",", 2))
        entry = (key, _parse_pairs(coeffs), float(rhs))
        (eq_rows if op == "=" else ge_rows).append(entry)
    n = int(header["vars"])
    sense, _, obj = header["objective"].partition(" ")
    c = np.zeros(n)
    for j, v in _parse_pairs(obj):
        c[j] = v
    free = np.zeros(n, dtype=bool)
    if header.get("free"):
        free[[int(t) for t in header["free"].split()]] = True

    def block(rows):
        if not rows:
            return None, None
        r, cidx, vals = [], [], []
        for i, (_, pairs, _) in enumerate(rows):
            for j, v in pairs:
                r.append(i)
                cidx.append(j)
                vals.append(v)
        return sp.csr_matrix((vals, (r, cidx)), shape=(len(rows), n)), np.array([e[2] for e in rows])

    A_eq, b_eq = block(eq_rows)
    A_ge, b_ge = block(ge_rows)
    names = header.get("names", "").split() or None
    return LinearProgram(c, sense, A_eq, b_eq, A_ge, b_ge, free, names,
                         [e[0] for e in eq_rows] or None, [e[0] for e in ge_rows] or None)


def _parse_pairs(s: str):
    out = []
    for tok in s.split():
        j, v = tok.split(":")
        out.append((int(j), float(v)))
    return out
