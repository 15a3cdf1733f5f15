"""Derived quantities: efficient LLR, price of fairness, bounds, decay fits, sweeps."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .cmdp import build_instance
from .errors import EfficientLLRZero, FairshareError, NotAllGenerating, TooFewPoints
from .netgen import JointChain, UserModel, drifts, stationary_on_recurrent_class
from .policy import single_user_greedy_evaluate
from .programs import solve_f, solve_p

log = logging.getLogger(__name__)

DECAY_FLOOR = 1e-14
SWEEP_KINDS = ("pof_vs_b", "fairness_vs_b", "frontier")
CSV_HEADER = ("kind", "abscissa", "llr_o", "llr_e", "llr_delta", "pof", "theta_star", "epsilon")


def efficient_kernel(chain: JointChain, b_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Induced chain of any efficient policy, plus lost load per (x, b) state.

    Every efficient action moves the battery to clamp(b + sum(x), 0, b_max),
    so the state process does not depend on how ties are split.
    """
    L = b_max + 1
    nx = chain.n_states
    total = chain.states.sum(axis=1)
    raw = total[:, None] + np.arange(L)[None, :]  # (nx, L)
    nb = np.clip(raw, 0, b_max)
    lost = np.maximum(0, -raw).astype(float).ravel()
    K = np.zeros((nx * L, nx * L))
    src = np.arange(nx * L)
    for xn in range(nx):
        K[src, xn * L + nb.ravel()] += np.repeat(chain.kernel[:, xn], L)
    return K, lost


def compute_llr_e(chain: JointChain, b_max: int) -> float:
    """Minimum system loss-of-load rate with no fairness constraint."""
    K, lost = efficient_kernel(chain, b_max)
    start = np.flatnonzero(chain.stationary > 0) * (b_max + 1)
    mu, _ = stationary_on_recurrent_class(K, start)
    return float(mu @ lost)


@dataclass
class PriceOfFairness:
    b_max: int
    llr_o: float
    llr_e: float

    @property
    def value(self) -> float:
        return self.llr_o / self.llr_e


def price_of_fairness(chain: JointChain, b_max: int, backend: str = "simplex") -> PriceOfFairness:
    """LLR under C_i >= 0 divided by the unconstrained LLR.

    Raises ``EfficientLLRZero`` (carrying both numbers) when LLR_e is zero.
    """
    llr_o = solve_p(build_instance(chain, b_max, "full"), 0.0, backend=backend).objective
    llr_e = compute_llr_e(chain, b_max)
    if llr_e <= 0.0:
        raise EfficientLLRZero(llr_o, llr_e)
    return PriceOfFairness(b_max, llr_o, llr_e)


def theorem1_bound(chain: JointChain) -> float:
    """Loss-of-load floor under fairness: total drift deficit of net-demanding users."""
    d, _, demanding, _ = drifts(chain)
    return float(sum(-d[i] for i in demanding))


def chunked_bound(users: Iterable[UserModel], b_max: int, assign_remainder: bool = False) -> float:
    """LLR of the fair policy giving each user a private floor(b_max / n) chunk.

    With ``assign_remainder`` the leftover b_max mod n units go one each to
    users in decreasing-drift order.
    """
    users = list(users)
    d = [u.drift() for u in users]
    if not users or min(d) <= 0:
        raise NotAllGenerating("chunked bound needs every user net generating")
    n = len(users)
    sizes = [b_max // n] * n
    if assign_remainder:
        for i in sorted(range(n), key=lambda i: -d[i])[: b_max % n]:
            sizes[i] += 1
    return float(sum(single_user_greedy_evaluate(u, s).llr[0] for u, s in zip(users, sizes)))


@dataclass
class DecayFit:
    b_values: list[int]
    llr_values: list[float]
    slope: float
    intercept: float
    r_squared: float
    excluded: list[int] = field(default_factory=list)
    degenerate: bool = False

    @property
    def rate(self) -> float:
        return -self.slope

    @property
    def exponential(self) -> bool:
        return (not self.degenerate) and self.r_squared >= 0.99 and self.slope < 0

    def to_dict(self) -> dict:
        return {"b_values": self.b_values, "llr_values": self.llr_values, "slope": self.slope,
                "intercept": self.intercept, "r_squared": self.r_squared, "excluded": self.excluded,
                "degenerate": self.degenerate, "verdict": "exponential" if self.exponential else "not exponential"}


def decay_rate(evaluator: Callable[[int], float], b_range: Iterable[int]) -> DecayFit:
    """Least-squares fit of log LLR against battery size."""
    bs, vals, excluded = [], [], []
    all_b, all_v = [], []
    for b in b_range:
        v = float(evaluator(int(b)))
        all_b.append(int(b))
        all_v.append(v)
        if v < DECAY_FLOOR:
            excluded.append(int(b))
        else:
            bs.append(int(b))
            vals.append(v)
    if len(bs) < 4:
        raise TooFewPoints(f"need at least 4 usable points, got {len(bs)}")
    x = np.array(bs, dtype=float)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    if ss_tot <= 1e-24:
        return DecayFit(all_b, all_v, 0.0, float(y.mean()), 0.0, excluded, True)
    r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return DecayFit(all_b, all_v, float(slope), float(intercept), r2, excluded)


@dataclass
class SweepRow:
    kind: str
    abscissa: float
    metrics: dict
    error: str | None = None

    def csv_cells(self) -> list[str]:
        cells = [self.kind, _fmt(self.abscissa)]
        if self.error:
            # failed point: every metric cell reads nan, the message lives in the sidecar
            return cells + ["nan"] * (len(CSV_HEADER) - 2)
        for key in CSV_HEADER[2:]:
            cells.append(_fmt(self.metrics.get(key)))
        return cells


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _sweep_point(kind: str, chain: JointChain, point, b_max, backend) -> SweepRow:
    try:
        if kind == "pof_vs_b":
            b = int(point)
            llr_o = solve_p(build_instance(chain, b, "full"), 0.0, backend=backend).objective
            llr_e = compute_llr_e(chain, b)
            metrics = {"llr_o": llr_o, "llr_e": llr_e}
            if llr_e > 0:
                metrics["pof"] = PriceOfFairness(b, llr_o, llr_e).value
            else:
                metrics["pof"] = EfficientLLRZero(llr_o, llr_e).symbol
            return SweepRow(kind, b, metrics)
        if kind == "fairness_vs_b":
            b = int(point)
            rep = solve_f(build_instance(chain, b, "efficient"), backend=backend)
            return SweepRow(kind, b, {"theta_star": rep.objective, "llr_e": compute_llr_e(chain, b)})
        delta = float(point)
        llr_d = solve_p(build_instance(chain, b_max, "full"), delta, backend=backend).objective
        llr_e = compute_llr_e(chain, b_max)
        metrics = {"llr_delta": llr_d, "llr_e": llr_e}
        metrics["epsilon"] = llr_d / llr_e - 1.0 if llr_e > 0 else EfficientLLRZero(llr_d, llr_e).symbol
        return SweepRow(kind, delta, metrics)
    except FairshareError as exc:
        log.warning("sweep point %s=%r failed: %s", kind, point, exc)
        return SweepRow(kind, point, {}, f"{type(exc).__name__}: {exc}")


def sweep(kind: str, chain: JointChain, grid, b_max: int | None = None, jobs: int = 1,
          backend: str = "simplex") -> list[SweepRow]:
    """One row per grid point, in grid order.

    ``grid`` is battery sizes for ``pof_vs_b``/``fairness_vs_b`` and deltas for
    ``frontier`` (which also needs ``b_max``). Failed points come back as rows
    with ``error`` set instead of aborting the sweep.
    """
    if kind not in SWEEP_KINDS:
        raise ValueError(f"kind must be one of {SWEEP_KINDS}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    if kind == "frontier" and b_max is None:
        raise ValueError("frontier sweep needs b_max")
    args = [(kind, chain, p, b_max, backend) for p in grid]
    if jobs <= 1:
        return [_sweep_point(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, *zip(*args)))


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [",".join(CSV_HEADER)]
    lines += [",".join(r.csv_cells()) for r in rows]
    return "\n".join(lines) + "\n"


