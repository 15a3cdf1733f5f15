"""Stationary randomized policies: extraction, reference policies, exact evaluation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cmdp import CmdpInstance, efficient_case
from .errors import ModeMismatch
from .netgen import UserModel, build_joint_chain, stationary_on_recurrent_class

log = logging.getLogger(__name__)

POSITIVE_MASS = 1e-12
TIE_RULES = ("lowest_index_first", "proportional")


@dataclass(frozen=True, eq=False)
class StationaryPolicy:
    """Per-pair action probabilities; pairs of a state sum to one."""

    instance: CmdpInstance
    probs: np.ndarray
    fallback: str = "greedy_efficient"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        inst = self.instance
        if p.shape != (inst.n_pairs,) or np.any(p < 0):
            raise ValueError("policy needs one nonnegative probability per (state, action) pair")
        sums = np.bincount(inst.pair_state, weights=p, minlength=inst.n_states)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            s = int(np.argmax(np.abs(sums - 1.0)))
            raise ValueError(f"action law of state {inst.state(s)} sums to {sums[s]!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def action_law(self, s: int) -> list[tuple[tuple[int, ...], float]]:
        inst = self.instance
        return [(tuple(int(v) for v in inst.pair_action[p]), float(self.probs[p]))
                for p in inst.pairs_of(s) if self.probs[p] > 0]

    def induced_kernel(self) -> np.ndarray:
        """Transition matrix over (x, b) states under this policy."""
        inst = self.instance
        L = inst.b_max + 1
        nx = inst.chain.n_states
        K = np.zeros((inst.n_states, inst.n_states))
        live = np.flatnonzero(self.probs > 0)
        for p in live:
            s = inst.pair_state[p]
            xi = s // L
            K[s, np.arange(nx) * L + inst.pair_next_level[p]] += self.probs[p] * inst.chain.kernel[xi]
        return K

    def to_json(self) -> list[dict]:
        out = []
        for s in range(self.instance.n_states):
            x, b = self.instance.state(s)
            out.append({"state": {"x": list(x), "b": b},
                        "actions": [{"a": list(a), "p": p} for a, p in self.action_law(s)]})
        return out


def lowest_index_action(x, b, b_max) -> tuple[int, ...]:
    """Efficient action filling the E2/E3 total in increasing user order."""
    x = [int(v) for v in x]
    case = efficient_case(x, b, b_max)
    if case == "E1":
        return tuple(x)
    if case == "E2":
        a = [v if v < 0 else 0 for v in x]
        need = b_max - b - sum(v for v in x if v < 0)
        for i, v in enumerate(x):
            if v > 0:
                take = min(v, need)
                a[i] = take
                need -= take
    else:
        a = [v if v > 0 else 0 for v in x]
        need = b + sum(v for v in x if v > 0)
        for i, v in enumerate(x):
            if v < 0:
                give = min(-v, need)
                a[i] = -give
                need -= give
    return tuple(a)


def _proportional_split(x, b, b_max) -> list[tuple[tuple[int, ...], float]]:
    """Randomised efficient action with E[|a_i|] proportional to |x_i| among eligible users.

    Whole units go by floor of the proportional share; leftover units are
    assigned by systematic sampling so user i gets an extra unit with
    probability equal to its fractional remainder.
    """
    x = [int(v) for v in x]
    case = efficient_case(x, b, b_max)
    if case == "E1":
        return [(tuple(x), 1.0)]
    if case == "E2":
        base = [v if v < 0 else 0 for v in x]
        elig = [i for i, v in enumerate(x) if v > 0]
        total = b_max - b - sum(v for v in x if v < 0)
        sign = 1
    else:
        base = [v if v > 0 else 0 for v in x]
        elig = [i for i, v in enumerate(x) if v < 0]
        total = b + sum(v for v in x if v > 0)
        sign = -1
    weights = np.array([abs(x[i]) for i in elig], dtype=float)
    share = total * weights / weights.sum()
    whole = np.floor(share + 1e-12).astype(int)
    frac = np.clip(share - whole, 0.0, None)
    frac[frac < 1e-12] = 0.0
    cum = np.concatenate([[0.0], np.cumsum(frac)])
    # breakpoints of the uniform offset u in [0, 1) where the selected set changes
    cuts = sorted({0.0, 1.0} | {float(c - math.floor(c)) for c in cum})
    law: dict[tuple[int, ...], float] = {}
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 1e-15:
            continue
        u = 0.5 * (lo + hi)
        extra = [int(math.floor(cum[k + 1] - u) - math.floor(cum[k] - u)) for k in range(len(elig))]
        a = list(base)
        for k, i in enumerate(elig):
            a[i] = sign * int(whole[k] + extra[k])
        key = tuple(a)
        law[key] = law.get(key, 0.0) + (hi - lo)
    return sorted(law.items())


def greedy_efficient_policy(inst: CmdpInstance, tie_rule: str = "lowest_index_first") -> StationaryPolicy:
    """Reference efficient policy on an efficient-mode instance."""
    if inst.mode != "efficient":
        raise ModeMismatch("greedy efficient policy needs an efficient-mode instance")
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    probs = np.zeros(inst.n_pairs)
    for s in range(inst.n_states):
        x, b = inst.state(s)
        if tie_rule == "lowest_index_first":
            law = [(lowest_index_action(x, b, inst.b_max), 1.0)]
        else:
            law = _proportional_split(x, b, inst.b_max)
        for a, p in law:
            probs[inst.pair_index(s, a)] += p
    return StationaryPolicy(inst, probs, "greedy_efficient")


def extract_policy(rho, fallback: str = "greedy_efficient") -> StationaryPolicy:
    """phi(a|s) = rho(s, a) / rho(s) on states with mass; ``fallback`` elsewhere."""
    inst = rho.instance
    state_mass = rho.state_mass()
    probs = np.zeros(inst.n_pairs)
    for s in range(inst.n_states):
        pairs = inst.pairs_of(s)
        if state_mass[s] > POSITIVE_MASS:
            probs[pairs.start:pairs.stop] = rho.mass[pairs.start:pairs.stop] / state_mass[s]
            continue
        x, b = inst.state(s)
        if fallback == "greedy_efficient":
            a = lowest_index_action(x, b, inst.b_max)
        elif fallback == "zero_action":
            a = (0,) * inst.n_users
        else:
            raise ValueError(f"unknown fallback {fallback!r}")
        probs[inst.pair_index(s, a)] = 1.0
    # renormalise per state to absorb rounding
    sums = np.bincount(inst.pair_state, weights=probs, minlength=inst.n_states)
    probs = probs / sums[inst.pair_state]
    return StationaryPolicy(inst, probs, fallback)


@dataclass
class ExactEvaluation:
    mu: np.ndarray
    llr: np.ndarray
    contributions: np.ndarray
    p_empty: float
    p_full: float
    recurrent_class: np.ndarray

    @property
    def lost_load(self) -> float:
        return float(np.sum(self.llr))

    def battery_marginal(self, b_max: int) -> np.ndarray:
        return np.bincount(np.arange(self.mu.size) % (b_max + 1), weights=self.mu, minlength=b_max + 1)


def default_start(inst: CmdpInstance) -> np.ndarray:
    """States (x, 0) for every x in the support of the background stationary law."""
    xs = np.flatnonzero(inst.chain.stationary > 0)
    return xs * (inst.b_max + 1)


def exact_evaluate(policy: StationaryPolicy, start=None) -> ExactEvaluation:
    """Steady-state metrics of ``policy`` on its recurrent class.

    ``start`` lists the state indices the process may start from (default: battery
    empty, x anywhere); exactly one recurrent class must be reachable from them.
    """
    inst = policy.instance
    K = policy.induced_kernel()
    mu, cls = stationary_on_recurrent_class(K, default_start(inst) if start is None else start)
    w = mu[inst.pair_state] * policy.probs
    levels = inst.state_levels()
    return ExactEvaluation(mu, w @ inst.user_cost, w @ inst.pair_action,
                           float(mu[levels == 0].sum()), float(mu[levels == inst.b_max].sum()), cls)


def single_user_greedy_evaluate(user: UserModel, b_max: int) -> ExactEvaluation:
    """Exact steady state of the clamped greedy battery B' = clamp(B + X, 0, b_max).

    Built directly from the user's kernel rather than through a CMDP instance.
    """
    P = user.transitions
    sup = np.array(user.support)
    ns, L = len(sup), b_max + 1
    K = np.zeros((ns * L, ns * L))
    lost = np.zeros(ns * L)
    move = np.zeros(ns * L)
    for xi in range(ns):
        for b in range(L):
            s = xi * L + b
            raw = b + sup[xi]
            nb = min(max(raw, 0), b_max)
            lost[s] = max(0, -raw)
            move[s] = nb - b
            K[s, np.arange(ns) * L + nb] += P[xi]
    start = np.flatnonzero(build_joint_chain([user]).stationary > 0) * L
    mu, cls = stationary_on_recurrent_class(K, start)
    levels = np.arange(ns * L) % L
    return ExactEvaluation(mu, np.array([mu @ lost]), np.array([mu @ move]),
                           float(mu[levels == 0].sum()), float(mu[levels == b_max].sum()), cls)

