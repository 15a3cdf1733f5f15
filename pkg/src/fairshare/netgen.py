"""Markov net-generation models for individual users and their joint chain."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    Degenerate,
    EmptyUserList,
    InvalidSupport,
    NotStochastic,
    Reducible,
    SelfLoopViolated,
    WrongShape,
)

ROW_SUM_TOL = 1e-9
ZERO_DRIFT_TOL = 1e-12


def _check_stochastic(P: np.ndarray, what: str = "kernel") -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotStochastic(f"{what} must be square, got shape {P.shape}")
    if np.any(P < -1e-15) or np.any(P > 1 + 1e-15):
        raise NotStochastic(f"{what} has entries outside [0, 1]")
    sums = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise NotStochastic(f"{what} row {int(bad[0])} sums to {sums[bad[0]]!r}")
    return P


def communicating_classes(P: np.ndarray, tol: float = 0.0) -> tuple[list[np.ndarray], list[bool]]:
    """Strongly connected components of the support graph of ``P``.

    Returns the classes and, for each, whether it is closed (recurrent).
    """
    A = csr_matrix(np.asarray(P) > tol)
    n_comp, labels = connected_components(A, directed=True, connection="strong")
    classes = [np.flatnonzero(labels == k) for k in range(n_comp)]
    closed = []
    rows, cols = A.nonzero()
    leaks = labels[rows] != labels[cols]
    leaky = set(labels[rows[leaks]].tolist())
    for k in range(n_comp):
        closed.append(k not in leaky)
    order = np.argsort([c[0] for c in classes])
    return [classes[k] for k in order], [closed[k] for k in order]


def _solve_stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    M = P.T - np.eye(n)
    M[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(M, rhs)
        ok = np.all(np.isfinite(pi)) and np.max(np.abs(pi @ P - pi)) <= 1e-11
    except np.linalg.LinAlgError:
        ok = False
    if not ok:
        pi = np.full(n, 1.0 / n)
        for _ in range(1_000_000):
            nxt = pi @ P
            if np.max(np.abs(nxt - pi)) < 1e-12:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(kernel) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix.

    Raises ``NotStochastic`` for malformed rows and ``Reducible`` when the
    support graph has more than one communicating class.
    """
    P = _check_stochastic(kernel)
    classes, _ = communicating_classes(P)
    if len(classes) > 1:
        raise Reducible(f"kernel has {len(classes)} communicating classes", classes)
    return _solve_stationary(P)


def stationary_on_recurrent_class(P: np.ndarray, start=None) -> tuple[np.ndarray, np.ndarray]:
    """Stationary vector supported on the unique closed class reachable from ``start``.

    ``start`` is an iterable of state indices (default: all states). Transient
    states get zero mass. Returns ``(pi, class_indices)``.
    """
    P = np.asarray(P, dtype=float)
    classes, closed = communicating_classes(P)
    recurrent = [c for c, is_closed in zip(classes, closed) if is_closed]
    if start is not None:
        start = np.asarray(sorted(set(int(s) for s in start)))
        reach = _reachable(P, start)
        recurrent = [c for c in recurrent if reach[c[0]]]
    if len(recurrent) != 1:
        raise Reducible(f"{len(recurrent)} recurrent classes reachable", recurrent)
    cls = recurrent[0]
    sub = P[np.ix_(cls, cls)]
    sub = sub / sub.sum(axis=1, keepdims=True)
    pi = np.zeros(P.shape[0])
    pi[cls] = _solve_stationary(sub)
    return pi, cls


def _reachable(P: np.ndarray, start: np.ndarray) -> np.ndarray:
    seen = np.zeros(P.shape[0], dtype=bool)
    seen[start] = True
    frontier = list(start)
    adj = [np.flatnonzero(row > 0) for row in P]
    while frontier:
        s = frontier.pop()
        for t in adj[s]:
            if not seen[t]:
                seen[t] = True
                frontier.append(t)
    return seen


@dataclass(frozen=True, eq=False)
class UserModel:
    """One user's integer net-generation support and its transition matrix."""

    support: tuple[int, ...]
    transitions: np.ndarray
    label: str = ""

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if any(float(s) != float(orig) for s, orig in zip(support, self.support)):
            raise InvalidSupport(f"support of {self.label!r} must be integers")
        if len(set(support)) != len(support):
            raise InvalidSupport(f"support of {self.label!r} has repeated values")
        if not support or max(support) <= 0 or min(support) >= 0:
            raise InvalidSupport(f"support of {self.label!r} needs a positive and a negative value")
        P = _check_stochastic(self.transitions, f"transitions of {self.label or 'user'}")
        if P.shape[0] != len(support):
            raise NotStochastic(f"transitions of {self.label!r} have shape {P.shape}, support has {len(support)} values")
        P = P.copy()
        P.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "transitions", P)

    @property
    def s_plus(self) -> int:
        return max(self.support)

    @property
    def s_minus(self) -> int:
        return min(self.support)

    def drift(self) -> float:
        pi = stationary_distribution(self.transitions)
        return float(np.dot(self.support, pi))

    def to_dict(self) -> dict:
        return {"label": self.label, "support": list(self.support),
                "transitions": self.transitions.tolist()}

    @classmethod
    def two_state(cls, p: float, q: float, label: str = "") -> "UserModel":
        """User on {+1, -1} with kernel [[p, 1-p], [1-q, q]]."""
        return cls((1, -1), np.array([[p, 1 - p], [1 - q, q]]), label)


@dataclass(frozen=True, eq=False)
class JointChain:
    states: np.ndarray  # (n_states, n_users) int
    kernel: np.ndarray
    stationary: np.ndarray
    user_drifts: tuple[float, ...]
    users: tuple[UserModel, ...] = field(default=())
    independent: bool = False

    @property
    def n_users(self) -> int:
        return self.states.shape[1]

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def system_drift(self) -> float:
        return float(sum(self.user_drifts))

    def index_of(self, x) -> int:
        hits = np.flatnonzero((self.states == np.asarray(x)).all(axis=1))
        if hits.size == 0:
            raise KeyError(f"joint state {tuple(x)} not in chain")
        return int(hits[0])


def joint_chain_from_kernel(states, kernel, users=()) -> JointChain:
    """Validate an explicit joint kernel and compute its stationary quantities."""
    states = np.asarray(states, dtype=int)
    if states.ndim != 2 or states.shape[0] == 0:
        raise WrongShape("joint states must be a nonempty list of integer vectors")
    P = _check_stochastic(kernel, "joint kernel")
    if P.shape[0] != states.shape[0]:
        raise WrongShape(f"joint kernel has {P.shape[0]} rows for {states.shape[0]} states")
    if len({tuple(s) for s in states.tolist()}) != states.shape[0]:
        raise WrongShape("joint states must be distinct")
    for i, u in enumerate(users):
        bad = set(states[:, i].tolist()) - set(u.support)
        if bad:
            raise InvalidSupport(f"joint states use values {sorted(bad)} outside support of user {i}")
    diag = np.diag(P)
    if np.any(diag <= 0):
        k = int(np.flatnonzero(diag <= 0)[0])
        raise SelfLoopViolated(f"joint state {states[k].tolist()} has no self-transition")
    pi = stationary_distribution(P)
    drifts = tuple(float(d) for d in pi @ states)
    for a in (states, P, pi):
        a.setflags(write=False)
    return JointChain(states, P, pi, drifts, tuple(users), False)


def build_joint_chain(users, joint_kernel=None, joint_states=None) -> JointChain:
    """Joint background chain for ``users``.

    Without an explicit kernel the users are independent: states are the
    Cartesian product of supports in lexicographic user-major order and the
    kernel is the Kronecker product of the user kernels.
    """
    users = tuple(users)
    if joint_kernel is not None:
        if joint_states is None:
            raise WrongShape("explicit joint kernel needs joint_states")
        return joint_chain_from_kernel(joint_states, joint_kernel, users)
    if not users:
        raise EmptyUserList("at least one user is required")
    states = np.array(list(itertools.product(*[u.support for u in users])), dtype=int)
    P = users[0].transitions
    for u in users[1:]:
        P = np.kron(P, u.transitions)
    chain = joint_chain_from_kernel(states, P, users)
    return JointChain(chain.states, chain.kernel, chain.stationary, chain.user_drifts, users, True)


def drifts(chain: JointChain) -> tuple[list[float], float, list[int], list[int]]:
    """Per-user drifts, system drift, net-demanding and net-generating user indices."""
    d = list(chain.user_drifts)
    demanding = [i for i, v in enumerate(d) if v < -ZERO_DRIFT_TOL]
    generating = [i for i, v in enumerate(d) if v > ZERO_DRIFT_TOL]
    return d, float(sum(d)), demanding, generating


def generation_probability(user: UserModel) -> float:
    """Stationary probability of the +1 state of a two-state (+1, -1) user."""
    if tuple(user.support) != (1, -1):
        raise WrongShape(f"expected support (1, -1), got {user.support}")
    p = user.transitions[0, 0]
    q = user.transitions[1, 1]
    if p + q >= 2:
        raise Degenerate("p = q = 1: both states absorbing")
    return float((1 - q) / (2 - p - q))
