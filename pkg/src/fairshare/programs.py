"""Occupation-measure linear programs for the battery CMDP.

* ``P``       minimise system loss-of-load subject to C_i >= 0 for all users,
* ``P_delta`` the same with C_i >= -delta (``delta=math.inf`` drops the rows),
* ``F``       maximise min_i C_i over efficient policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cmdp import CmdpInstance
from .errors import InternalError, ModeMismatch, ModelError, NumericalFailure
from .lpcore import LinearProgram, LpSolution, solve_lp
from .policy import StationaryPolicy, exact_evaluate, lowest_index_action

MASS_TOL = 1e-9


def _stationarity_block(inst: CmdpInstance) -> sp.csr_matrix:
    """Rows: outflow minus inflow for every state; columns: (state, action) pairs."""
    nx = inst.chain.n_states
    L = inst.b_max + 1
    K = inst.chain.kernel
    x_of_pair = inst.pair_state // L
    rows = [inst.pair_state]
    cols = [np.arange(inst.n_pairs)]
    vals = [np.ones(inst.n_pairs)]
    for xn in range(nx):
        probs = K[x_of_pair, xn]
        hit = np.flatnonzero(probs > 0)
        rows.append(xn * L + inst.pair_next_level[hit])
        cols.append(hit)
        vals.append(-probs[hit])
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(inst.n_states, inst.n_pairs))
    return M.tocsr()


def _pair_names(inst: CmdpInstance) -> list[str]:
    names = []
    for p in range(inst.n_pairs):
        x, b = inst.state(inst.pair_state[p])
        a = inst.pair_action[p]
        names.append("rho[" + ",".join(map(str, x)) + f"|{b}|" + ",".join(map(str, a)) + "]")
    return names


def _state_names(inst: CmdpInstance) -> list[str]:
    return ["stat[" + ",".join(map(str, x)) + f"|{b}]"
            for x, b in (inst.state(s) for s in range(inst.n_states))]


def build_lp_p(inst: CmdpInstance, delta: float = 0.0) -> LinearProgram:
    """Minimum-LLR program over full-mode occupation measures with C_i >= -delta."""
    if inst.mode != "full":
        raise ModeMismatch("problem P needs a full-mode instance")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    A_eq = sp.vstack([sp.csr_matrix(np.ones((1, inst.n_pairs))), _stationarity_block(inst)]).tocsr()
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[0] = 1.0
    if math.isinf(delta):
        A_ge, b_ge, ge_names = None, None, None
    else:
        A_ge = sp.csr_matrix(inst.pair_action.T.astype(float))
        b_ge = np.full(inst.n_users, -float(delta))
        ge_names = [f"fair[{i}]" for i in range(inst.n_users)]
    return LinearProgram(inst.cost.copy(), "min", A_eq, b_eq, A_ge, b_ge, None,
                         _pair_names(inst), ["mass"] + _state_names(inst), ge_names)


def build_lp_f(inst: CmdpInstance) -> LinearProgram:
    """Max-min net contribution over efficient occupation measures.

    The last column is the free scalar theta.
    """
    if inst.mode != "efficient":
        raise ModeMismatch("problem F needs an efficient-mode instance")
    n = inst.n_pairs
    stat = _stationarity_block(inst)
    A_eq = sp.vstack([sp.csr_matrix(np.ones((1, n))), stat])
    A_eq = sp.hstack([A_eq, sp.csr_matrix((A_eq.shape[0], 1))]).tocsr()
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[0] = 1.0
    # sum_p rho_p a_i(p) - theta >= 0
    A_ge = sp.hstack([sp.csr_matrix(inst.pair_action.T.astype(float)),
                      sp.csr_matrix(-np.ones((inst.n_users, 1)))]).tocsr()
    b_ge = np.zeros(inst.n_users)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    free = np.zeros(n + 1, dtype=bool)
    free[-1] = True
    return LinearProgram(c, "max", A_eq, b_eq, A_ge, b_ge, free,
                         _pair_names(inst) + ["theta"], ["mass"] + _state_names(inst),
                         [f"fair[{i}]" for i in range(inst.n_users)])


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    instance: CmdpInstance
    mass: np.ndarray  # per pair

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.shape != (self.instance.n_pairs,):
            raise ValueError("mass must have one entry per (state, action) pair")
        m = np.where(m < 0, 0.0, m)
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def state_mass(self) -> np.ndarray:
        return np.bincount(self.instance.pair_state, weights=self.mass,
                           minlength=self.instance.n_states)

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(_stationarity_block(self.instance) @ self.mass)))

    def work_balance(self) -> float:
        return float(self.mass @ self.instance.pair_action.sum(axis=1))


@dataclass
class Marginals:
    contributions: np.ndarray
    llr: np.ndarray
    state: np.ndarray
    battery: np.ndarray


def occupation_marginals(rho: OccupationMeasure) -> Marginals:
    inst = rho.instance
    state = rho.state_mass()
    battery = np.bincount(inst.state_levels(), weights=state, minlength=inst.b_max + 1)
    return Marginals(rho.mass @ inst.pair_action, rho.mass @ inst.user_cost, state, battery)


@dataclass
class SolveReport:
    problem: str  # P | P_delta | F
    objective: float
    delta: float | None
    llr_per_user: np.ndarray
    contributions: np.ndarray
    measure: OccupationMeasure
    battery_marginal: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def llr_sys(self) -> float:
        return float(np.sum(self.llr_per_user))

    def to_dict(self) -> dict:
        if self.delta is None:
            delta = None
        elif math.isinf(self.delta):
            delta = "inf"
        else:
            delta = float(self.delta)
        return {
            "problem": self.problem,
            "objective": float(self.objective),
            "delta": delta,
            "llr_per_user": [float(v) for v in self.llr_per_user],
            "contributions": [float(v) for v in self.contributions],
            "battery_marginal": [float(v) for v in self.battery_marginal],
            "diagnostics": self.diagnostics,
        }


def _report(problem, inst, sol: LpSolution, mass, objective, delta) -> SolveReport:
    if sol.status != "optimal":
        raise InternalError(f"LP for {problem} reported {sol.status}; a feasible optimum must exist")
    rho = OccupationMeasure(inst, mass)
    marg = occupation_marginals(rho)
    total = float(rho.mass.sum())
    if abs(total - 1.0) > MASS_TOL:
        raise NumericalFailure(f"occupation mass sums to {total!r}")
    diag = {
        "iterations": sol.iterations,
        "backend": sol.backend,
        "residual_eq": sol.residual_eq,
        "residual_ge": sol.residual_ge,
        "stationarity_residual": rho.stationarity_residual(),
        "work_balance": rho.work_balance(),
        "support_states": int(np.count_nonzero(marg.state > 1e-12)),
        "n_states": inst.n_states,
        "n_pairs": inst.n_pairs,
        "notes": list(sol.notes),
    }
    return SolveReport(problem, float(objective), delta, marg.llr, marg.contributions, rho,
                       marg.battery, diag)


def _greedy_pairs(inst: CmdpInstance):
    pairs = np.array([inst.pair_index(s, lowest_index_action(*inst.state(s), inst.b_max))
                      for s in range(inst.n_states)])
    probs = np.zeros(inst.n_pairs)
    probs[pairs] = 1.0
    try:
        ev = exact_evaluate(StationaryPolicy(inst, probs))
    except ModelError:
        return None, None
    return pairs, ev.contributions


def basis_hint(inst: CmdpInstance, problem: str, delta: float = 0.0):
    """Crash basis from the greedy efficient policy.

    Its pairs fill the mass row and all but the last stationarity row (which
    is redundant and keeps its artificial); fairness rows get their surplus,
    and for F the free theta sits in the row of the worst-off user.
    """
    pairs, contrib = _greedy_pairs(inst)
    if pairs is None:
        return None
    hint = list(pairs.tolist()) + [None]
    if problem == "F":
        worst = int(np.argmin(contrib))
        theta = inst.n_pairs
        hint += [(("neg", theta) if k == worst else ("surplus", k)) for k in range(inst.n_users)]
    elif not math.isinf(delta):
        hint += [("surplus", k) for k in range(inst.n_users)]
    return hint


def solve_p(inst: CmdpInstance, delta: float = 0.0, backend: str = "simplex") -> SolveReport:
    """Minimum system loss-of-load under C_i >= -delta (``math.inf`` = unconstrained)."""
    lp = build_lp_p(inst, delta)
    hint = basis_hint(inst, "P", delta) if backend == "simplex" else None
    sol = solve_lp(lp, backend=backend, basis_hint=hint)
    tag = "P" if delta == 0 else "P_delta"
    return _report(tag, inst, sol, sol.x if sol.x is not None else None, sol.objective, float(delta))


def solve_f(inst: CmdpInstance, backend: str = "simplex") -> SolveReport:
    """Best achievable min_i C_i among efficient stationary policies."""
    lp = build_lp_f(inst)
    hint = basis_hint(inst, "F") if backend == "simplex" else None
    sol = solve_lp(lp, backend=backend, basis_hint=hint)
    if sol.status != "optimal":
        raise InternalError(f"LP for F reported {sol.status}")
    return _report("F", inst, sol, sol.x[:-1], sol.x[-1], None)
