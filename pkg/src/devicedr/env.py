"""Sampled environment around a :class:`~devicedr.model.DeviceModel`.

The learner sees states and costs only; the kernel tables stay hidden.
Randomness comes from :class:`RngStream` (NumPy ``PCG64``), so a seed and an
action sequence fix the trajectory on every platform.
"""
from __future__ import annotations

import csv
import math
from bisect import bisect_right
from itertools import accumulate
from typing import Callable, NamedTuple, TextIO

import numpy as np

from .model import Action, DeviceModel, State
from .solver import check_policy, stationary_distribution


class RngStream:
    """Seeded PCG64 stream.

    :meth:`uniform` serves scalars from a buffer refilled in blocks, which
    keeps per-step overhead low in pure-Python loops.  ``generator`` exposes
    the underlying ``numpy.random.Generator`` for vectorized draws.
    """

    def __init__(self, seed: int, block: int = 4096):
        if seed < 0 or seed >= 1 << 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self.generator.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


class EnvStep(NamedTuple):
    cost: float
    next: State
    episode_ended: bool


class EnvNotResetError(RuntimeError):
    pass


def _cumulative(probs) -> list[float]:
    """Cumulative sums with the tail pinned to 1 from the last positive entry
    on, so round-off never selects a zero-probability outcome."""
    probs = list(probs)
    cum = list(accumulate(probs))
    last = max(i for i, p in enumerate(probs) if p > 0)
    for i in range(last, len(cum)):
        cum[i] = 1.0
    return cum


class DeviceEnv:
    """Agent-facing simulator of one device.

    ``evaluation_noise``, if given, is called as ``noise(rng)`` whenever a job
    completes or a request is canceled, and its (zero-mean) draw is added to
    the user's evaluation before weighting by ``gamma``.  ``trajectory``
    receives one CSV record per step.
    """

    def __init__(
        self,
        model: DeviceModel,
        evaluation_noise: Callable[[RngStream], float] | None = None,
        trajectory: TextIO | None = None,
    ):
        self._model = model
        self.evaluation_noise = evaluation_noise
        self.n_states = len(model.states)
        self.alpha = model.alpha
        self.max_cost = model.kernel.max_cost
        self._states = model.states
        self._init_cum = _cumulative(
            np.kron(stationary_distribution(model.price_chain), model.regen_vector)
        )
        self._table = []
        for per_action in model.kernel.outcomes:
            row = []
            for outs in per_action:
                row.append((
                    _cumulative([o.prob for o in outs]),
                    [model.state_index(o.next) for o in outs],
                    [o.cost for o in outs],
                    [o.bill for o in outs],
                    [o.dissatisfaction for o in outs],
                    [o.ends_episode for o in outs],
                ))
            self._table.append(row)
        self._x: int | None = None
        self._t = 0
        self._writer = None
        if trajectory is not None:
            self._writer = csv.writer(trajectory, lineterminator="\n")
            self._writer.writerow(["t", "price_idx", "s", "g", "action", "cost", "episode_ended"])

    @property
    def state(self) -> State | None:
        return None if self._x is None else self._states[self._x]

    def reset_index(self, rng: RngStream) -> int:
        self._x = bisect_right(self._init_cum, rng.uniform())
        self._t = 0
        return self._x

    def set_state(self, x: State | int) -> None:
        """Place the environment in ``x`` (a state or its index)."""
        k = x if isinstance(x, (int, np.integer)) else self._model.state_index(x)
        if not 0 <= k < self.n_states:
            raise IndexError(f"state index {k} out of range")
        self._x = int(k)
        self._t = 0

    def step_index(self, a: int, rng: RngStream) -> tuple[float, int, bool]:
        """Index-level step used by the learner's inner loop."""
        x = self._x
        if x is None:
            raise EnvNotResetError("step() called before reset()")
        cum, nxt, cost, bill, dis, ends = self._table[x][a]
        k = bisect_right(cum, rng.uniform())
        c = cost[k]
        if self.evaluation_noise is not None and ends[k]:
            c = bill[k] + self._model.gamma * (dis[k] + self.evaluation_noise(rng))
        y = nxt[k]
        if self._writer is not None:
            s = self._states[x]
            self._writer.writerow([self._t, s.price_idx, s.s, s.g, Action(a).name.lower(), repr(c), int(ends[k])])
        self._x = y
        self._t += 1
        return c, y, ends[k]

    def reset(self, rng: RngStream) -> State:
        """Draw ``x ~ pi_P x pi_0``."""
        return self._states[self.reset_index(rng)]

    def step(self, a: Action, rng: RngStream) -> EnvStep:
        c, y, ended = self.step_index(int(a), rng)
        return EnvStep(c, self._states[y], ended)


def default_horizon(model: DeviceModel, tail_tol: float = 1e-4) -> int:
    """Steps after which the discounted tail is below ``tail_tol``."""
    bound = model.kernel.max_cost / (1.0 - model.alpha)
    if bound <= tail_tol:
        return 1
    return math.ceil(math.log(tail_tol / bound) / math.log(model.alpha))


def simulate_policy_returns(
    model: DeviceModel,
    mu: np.ndarray,
    n_runs: int,
    rng: RngStream,
    horizon: int | None = None,
) -> np.ndarray:
    """Discounted returns of ``n_runs`` independent trajectories of a fixed
    policy from ``pi_P x pi_0``, truncated at ``horizon`` steps.

    Vectorized over runs; independent of :class:`DeviceEnv` bookkeeping.
    """
    mu = check_policy(model, mu)
    horizon = default_horizon(model) if horizon is None else horizon
    kern = model.kernel
    n = kern.n_states
    width = max(len(outs) for per in kern.outcomes for outs in per)
    cum = np.full((n, 2, width), np.inf)
    nxt = np.zeros((n, 2, width), dtype=np.int64)
    cost = np.zeros((n, 2, width))
    for i, per in enumerate(kern.outcomes):
        for a, outs in enumerate(per):
            m = len(outs)
            cum[i, a, :m] = _cumulative([o.prob for o in outs])
            nxt[i, a, :m] = [model.state_index(o.next) for o in outs]
            cost[i, a, :m] = [o.cost for o in outs]
    gen = rng.generator
    d0 = np.array(_cumulative(np.kron(stationary_distribution(model.price_chain), model.regen_vector)))
    x = np.searchsorted(d0, gen.random(n_runs), side="right")
    p_on = mu[:, Action.ON]
    total = np.zeros(n_runs)
    disc = 1.0
    for _ in range(horizon):
        a = (gen.random(n_runs) < p_on[x]).astype(np.int64)
        u = gen.random(n_runs)
        k = (u[:, None] >= cum[x, a]).sum(axis=1)
        total += disc * cost[x, a, k]
        x = nxt[x, a, k]
        disc *= model.alpha
    return total
