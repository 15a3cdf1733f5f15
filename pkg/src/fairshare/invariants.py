"""Cross-module invariant checks run by ``fairshare validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import chunked_bound, compute_llr_e, theorem1_bound
from .cmdp import allowed_actions, build_instance, efficient_actions
from .errors import FairshareError
from .netgen import JointChain, UserModel
from .policy import exact_evaluate, extract_policy, greedy_efficient_policy
from .programs import solve_f, solve_p

TOL = 1e-8


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "ok": bool(self.ok), "detail": self.detail}


def _check(out: list, name: str, ok: bool, detail: str = ""):
    out.append(Check(name, bool(ok), detail))


def run_invariants(chain: JointChain, b_max: int, users: list[UserModel] | None = None,
                   backend: str = "simplex") -> list[Check]:
    """Every check is recorded; an exception inside one group fails that group only."""
    checks: list[Check] = []
    groups = [_chain_checks, _action_checks, _p_checks, _f_checks, _tie_checks]
    for g in groups:
        try:
            g(checks, chain, b_max, backend)
        except FairshareError as exc:
            _check(checks, g.__name__.strip("_"), False, f"{type(exc).__name__}: {exc}")
    if users and chain.independent and all(u.drift() > 0 for u in users):
        try:
            llr_o = solve_p(build_instance(chain, b_max), 0.0, backend).objective
            cb = chunked_bound(users, b_max)
            _check(checks, "chunked_bound_dominates", cb >= llr_o - TOL, f"bound={cb!r} llr_o={llr_o!r}")
        except FairshareError as exc:
            _check(checks, "chunked_bound_dominates", False, str(exc))
    return checks


def _chain_checks(out, chain, b_max, backend):
    pi = chain.stationary
    _check(out, "stationary_sums_to_one", abs(pi.sum() - 1) <= 1e-12, repr(float(pi.sum())))
    res = float(np.max(np.abs(pi @ chain.kernel - pi)))
    _check(out, "stationary_fixed_point", res <= 1e-10, f"residual={res!r}")
    drift_sum = float(np.sum(chain.user_drifts))
    _check(out, "drifts_sum_to_system_drift", abs(drift_sum - chain.system_drift) <= 1e-12)


def _action_checks(out, chain, b_max, backend):
    ok = True
    for x in chain.states:
        x = tuple(int(v) for v in x)
        for b in range(b_max + 1):
            allowed = set(allowed_actions(x, b, b_max))
            for a in efficient_actions(x, b, b_max):
                nb = b + sum(a)
                if a not in allowed or nb != min(max(b + sum(x), 0), b_max):
                    ok = False
    _check(out, "efficient_actions_allowed_and_clamped", ok)


def _p_checks(out, chain, b_max, backend):
    inst = build_instance(chain, b_max, "full")
    rep = solve_p(inst, 0.0, backend)
    d = rep.diagnostics
    _check(out, "P_mass_one", abs(rep.measure.mass.sum() - 1) <= 1e-9)
    _check(out, "P_stationarity", d["stationarity_residual"] <= TOL, repr(d["stationarity_residual"]))
    _check(out, "P_work_balance", abs(d["work_balance"]) <= TOL, repr(d["work_balance"]))
    _check(out, "P_fairness_feasible", rep.contributions.min() >= -TOL, repr(rep.contributions.tolist()))
    floor = theorem1_bound(chain)
    _check(out, "P_above_drift_floor", rep.objective >= floor - TOL, f"llr_o={rep.objective!r} floor={floor!r}")
    llr_e = compute_llr_e(chain, b_max)
    unc = solve_p(inst, math.inf, backend).objective
    _check(out, "P_inf_equals_llr_e", abs(unc - llr_e) <= TOL, f"{unc!r} vs {llr_e!r}")
    _check(out, "llr_e_below_llr_o", llr_e <= rep.objective + TOL)


def _f_checks(out, chain, b_max, backend):
    inst = build_instance(chain, b_max, "efficient")
    rep = solve_f(inst, backend)
    _check(out, "F_theta_nonpositive", rep.objective <= 1e-9, repr(rep.objective))
    _check(out, "F_contributions_sum_zero", abs(rep.contributions.sum()) <= TOL)
    _check(out, "F_min_contribution_is_theta", abs(rep.contributions.min() - rep.objective) <= 1e-7)
    pol = extract_policy(rep.measure)
    support = np.flatnonzero(rep.measure.state_mass() > 1e-12)
    ev = exact_evaluate(pol, start=support)
    gap = float(np.max(np.abs(ev.contributions - rep.contributions)))
    _check(out, "F_policy_roundtrip", gap <= 1e-6, f"max |C diff|={gap!r}")


def _tie_checks(out, chain, b_max, backend):
    inst = build_instance(chain, b_max, "efficient")
    a = exact_evaluate(greedy_efficient_policy(inst, "lowest_index_first"))
    b = exact_evaluate(greedy_efficient_policy(inst, "proportional"))
    gap = float(np.max(np.abs(a.mu - b.mu)))
    _check(out, "tie_rule_invariance", gap <= 1e-9 and abs(a.lost_load - b.lost_load) <= 1e-9,
           f"max |mu diff|={gap!r}")
