"""Monte Carlo trajectories of a stationary policy with batch-means error bars.

Randomness comes from numpy's PCG64 bit generator seeded with the integer
``seed``. Each step consumes exactly two uniforms from two independent
streams (``SeedSequence(seed).spawn(2)``): one picks the action, the other
the next background state, by inverse-CDF lookup in lexicographic order.
The initial background state (when not given) uses one extra draw from
the action stream before the loop.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .policy import StationaryPolicy

DEFAULT_BATCHES = 100


def _pick(cum: list[float], u: float) -> int:
    return min(bisect_right(cum, u), len(cum) - 1)


def batch_means(samples: np.ndarray, n_batches: int = DEFAULT_BATCHES) -> tuple[np.ndarray, np.ndarray]:
    """Mean and batch-means standard error along axis 0."""
    samples = np.asarray(samples, dtype=float)
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2 * n_batches:
        return mean, np.full(mean.shape, np.nan)
    batches = np.array([b.mean(axis=0) for b in np.array_split(samples, n_batches)])
    se = batches.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return mean, se


@dataclass
class SimResult:
    steps: int
    seed: int
    llr: np.ndarray
    llr_se: np.ndarray
    contributions: np.ndarray
    contributions_se: np.ndarray
    lost_load: float
    lost_load_se: float
    histogram: np.ndarray
    x0: tuple[int, ...]
    b0: int
    b_final: int
    net_energy: int  # sum over steps and users of a_i(t)

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "seed": self.seed,
            "llr": self.llr.tolist(),
            "llr_se": self.llr_se.tolist(),
            "contributions": self.contributions.tolist(),
            "contributions_se": self.contributions_se.tolist(),
            "lost_load": self.lost_load,
            "lost_load_se": self.lost_load_se,
            "histogram": self.histogram.tolist(),
            "initial": {"x": list(self.x0), "b": self.b0},
            "final_level": self.b_final,
        }

    def histogram_csv(self) -> str:
        return "level,count\n" + "".join(f"{k},{int(c)}\n" for k, c in enumerate(self.histogram))


def simulate_policy(policy: StationaryPolicy, steps: int, seed: int = 0, b0: int = 0,
                    x0=None, n_batches: int = DEFAULT_BATCHES) -> SimResult:
    """Run ``policy`` for ``steps`` steps from battery level ``b0``.

    ``x0`` is a joint background state vector; by default it is drawn from
    the background stationary law.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    inst = policy.instance
    chain = inst.chain
    L = inst.b_max + 1
    if not 0 <= b0 <= inst.b_max:
        raise ValueError(f"b0={b0} outside [0, {inst.b_max}]")
    act_seq, x_seq = (np.random.Generator(np.random.PCG64(s))
                      for s in np.random.SeedSequence(seed).spawn(2))
    if x0 is None:
        xi = _pick(np.cumsum(chain.stationary).tolist(), float(act_seq.random()))
    else:
        xi = chain.index_of(x0)
    ua = act_seq.random(steps).tolist()
    ux = x_seq.random(steps).tolist()

    cum_k = [np.cumsum(row).tolist() for row in chain.kernel]
    act_pairs, act_cum = [], []
    for s in range(inst.n_states):
        live = [p for p in inst.pairs_of(s) if policy.probs[p] > 0]
        act_pairs.append(live)
        act_cum.append(np.cumsum(policy.probs[live]).tolist())
    nxt = inst.pair_next_level.tolist()

    x_start, b = xi, int(b0)
    chosen = [0] * steps
    for t in range(steps):
        s = xi * L + b
        live = act_pairs[s]
        p = live[0] if len(live) == 1 else live[_pick(act_cum[s], ua[t])]
        chosen[t] = p
        b = nxt[p]
        xi = _pick(cum_k[xi], ux[t])

    chosen = np.asarray(chosen)
    levels = inst.pair_state[chosen] % L
    if levels.min() < 0 or levels.max() > inst.b_max or not 0 <= b <= inst.b_max:
        raise AssertionError("battery left [0, b_max]")
    actions = inst.pair_action[chosen]
    lost = inst.user_cost[chosen]
    net = int(actions.sum())
    if net != b - int(b0):
        raise AssertionError("energy telescoping identity violated")
    llr, llr_se = batch_means(lost, n_batches)
    contrib, contrib_se = batch_means(actions, n_batches)
    tot, tot_se = batch_means(lost.sum(axis=1), n_batches)
    hist = np.bincount(levels, minlength=L)
    x0_vec = tuple(int(v) for v in chain.states[x_start])
    return SimResult(steps, int(seed), llr, llr_se, contrib, contrib_se, float(tot), float(tot_se),
                     hist, x0_vec, int(b0), int(b), net)
