"""Controlled battery process over (background state, battery level).

States are indexed ``x_index * (b_max + 1) + b``. Every (state, action) pair
gets a flat column index; the arrays on :class:`CmdpInstance` are laid out
by that pair index so LP builders can work vectorised.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ActionNotAllowed, BatteryOutOfRange, InstanceTooLarge, ModelError
from .netgen import JointChain

MODES = ("full", "efficient")
DEFAULT_SIZE_CAP = 10**7


def _box(xi: int) -> range:
    return range(0, xi + 1) if xi >= 0 else range(xi, 1)


def _check_level(b: int, b_max: int) -> None:
    if b_max < 0 or not 0 <= b <= b_max:
        raise BatteryOutOfRange(f"battery level {b} outside [0, {b_max}]")


def allowed_actions(x, b: int, b_max: int) -> list[tuple[int, ...]]:
    """All actions within each user's box that keep the battery in [0, b_max].

    Returned in lexicographic order.
    """
    _check_level(b, b_max)
    out = []
    for a in itertools.product(*[_box(int(xi)) for xi in x]):
        if 0 <= b + sum(a) <= b_max:
            out.append(tuple(a))
    return out


def _compositions(total: int, caps: list[int]):
    """Nonnegative integer vectors with entries <= caps summing to total, lexicographic."""
    if not caps:
        if total == 0:
            yield ()
        return
    rest = sum(caps[1:])
    for v in range(max(0, total - rest), min(caps[0], total) + 1):
        for tail in _compositions(total - v, caps[1:]):
            yield (v,) + tail


def efficient_case(x, b: int, b_max: int) -> str:
    level = b + int(sum(x))
    if level > b_max:
        return "E2"
    if level < 0:
        return "E3"
    return "E1"


def efficient_actions(x, b: int, b_max: int) -> list[tuple[int, ...]]:
    """Actions that store every available unit and serve every feasible demand."""
    _check_level(b, b_max)
    x = [int(v) for v in x]
    case = efficient_case(x, b, b_max)
    if case == "E1":
        return [tuple(x)]
    if case == "E2":
        free = [i for i, v in enumerate(x) if v > 0]
        fixed = sum(v for v in x if v < 0)
        need = b_max - b - fixed
        sign = 1
    else:
        free = [i for i, v in enumerate(x) if v < 0]
        fixed = sum(v for v in x if v > 0)
        need = b + fixed
        sign = -1
    caps = [abs(x[i]) for i in free]
    out = []
    for comp in _compositions(need, caps):
        a = [v if (v < 0 if sign > 0 else v > 0) else 0 for v in x]
        for i, v in zip(free, comp):
            a[i] = sign * v
        out.append(tuple(a))
    out.sort()
    return out


@dataclass(frozen=True, eq=False)
class CmdpInstance:
    chain: JointChain
    b_max: int
    mode: str
    action_sets: tuple[np.ndarray, ...]  # per state, (k, n_users) int
    pair_offsets: np.ndarray  # state s owns pairs [off[s], off[s+1])
    pair_state: np.ndarray
    pair_action: np.ndarray  # (n_pairs, n_users)
    pair_next_level: np.ndarray
    cost: np.ndarray  # total lost load per pair
    user_cost: np.ndarray  # (n_pairs, n_users) lost load per user

    @property
    def n_states(self) -> int:
        return self.chain.n_states * (self.b_max + 1)

    @property
    def n_pairs(self) -> int:
        return self.pair_state.shape[0]

    @property
    def n_users(self) -> int:
        return self.chain.n_users

    @property
    def fairness_coeffs(self) -> np.ndarray:
        return self.pair_action

    def state_index(self, x_index: int, b: int) -> int:
        return x_index * (self.b_max + 1) + b

    def split_state(self, s: int) -> tuple[int, int]:
        return divmod(int(s), self.b_max + 1)

    def state(self, s: int) -> tuple[tuple[int, ...], int]:
        xi, b = self.split_state(s)
        return tuple(int(v) for v in self.chain.states[xi]), b

    def state_levels(self) -> np.ndarray:
        return np.arange(self.n_states) % (self.b_max + 1)

    def state_x_index(self) -> np.ndarray:
        return np.arange(self.n_states) // (self.b_max + 1)

    def pairs_of(self, s: int) -> range:
        return range(int(self.pair_offsets[s]), int(self.pair_offsets[s + 1]))

    def pair_index(self, s: int, action) -> int:
        acts = self.action_sets[s]
        hits = np.flatnonzero((acts == np.asarray(action)).all(axis=1))
        if hits.size == 0:
            raise ActionNotAllowed(f"action {tuple(action)} not allowed in state {self.state(s)}")
        return int(self.pair_offsets[s] + hits[0])

    def cost_of(self, s: int, action) -> float:
        return float(self.cost[self.pair_index(s, action)])


def stage_costs(x: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Per-user unmet demand 1{x_i < 0} (a_i - x_i) for each action row."""
    return np.where(x < 0, actions - x, 0).astype(float)


def build_instance(chain: JointChain, b_max: int, mode: str = "full",
                   size_cap: int = DEFAULT_SIZE_CAP) -> CmdpInstance:
    """Enumerate states and action sets of the battery CMDP.

    ``b_max = 0`` is accepted; the battery then never holds energy.
    """
    if mode not in MODES:
        raise ModelError(f"mode must be one of {MODES}, got {mode!r}")
    b_max = int(b_max)
    if b_max < 0:
        raise BatteryOutOfRange(f"b_max must be >= 0, got {b_max}")
    n_states = chain.n_states * (b_max + 1)
    box_sizes = np.prod(np.abs(chain.states) + 1, axis=1)
    if n_states * int(box_sizes.max()) > size_cap:
        raise InstanceTooLarge(f"{n_states} states x {int(box_sizes.max())} actions exceeds cap {size_cap}")
    enum = allowed_actions if mode == "full" else efficient_actions
    action_sets = []
    counts = np.zeros(n_states, dtype=int)
    for xi, x in enumerate(chain.states.tolist()):
        for b in range(b_max + 1):
            acts = np.array(enum(x, b, b_max), dtype=int).reshape(-1, chain.n_users)
            acts.setflags(write=False)
            action_sets.append(acts)
            counts[xi * (b_max + 1) + b] = len(acts)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    pair_state = np.repeat(np.arange(n_states), counts)
    pair_action = np.concatenate(action_sets, axis=0)
    levels = pair_state % (b_max + 1)
    x_of_pair = chain.states[pair_state // (b_max + 1)]
    pair_next = levels + pair_action.sum(axis=1)
    user_cost = stage_costs(x_of_pair, pair_action)
    arrays = (offsets, pair_state, pair_action, pair_next, user_cost)
    for a in arrays:
        a.setflags(write=False)
    cost = user_cost.sum(axis=1)
    cost.setflags(write=False)
    return CmdpInstance(chain, b_max, mode, tuple(action_sets), offsets, pair_state,
                        pair_action, pair_next, cost, user_cost)


def transition_step(instance: CmdpInstance, s: int, action) -> np.ndarray:
    """Next-state distribution (length ``n_states``) for taking ``action`` in state ``s``."""
    p = instance.pair_index(s, action)
    xi, _ = instance.split_state(s)
    nb = int(instance.pair_next_level[p])
    out = np.zeros(instance.n_states)
    out[np.arange(instance.chain.n_states) * (instance.b_max + 1) + nb] = instance.chain.kernel[xi]
    return out
