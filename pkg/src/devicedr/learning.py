"""Tabular Q-learning with an epsilon-mixture of greedy and Boltzmann actions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np

from .env import DeviceEnv, RngStream
from .model import Action, DeviceModel, State


@dataclass(frozen=True)
class StepSize:
    """Per-episode step size ``scale / (offset + j) ** power``.

    The default is ``10 / (20 + j)``.  Any ``power`` in ``(0.5, 1]`` gives a
    divergent sum with a summable square.
    """

    scale: float = 10.0
    offset: float = 20.0
    power: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and self.offset > 0 and self.power > 0):
            raise ValueError("step size parameters must be positive")

    def __call__(self, j: int) -> float:
        return self.scale / (self.offset + j) ** self.power


@dataclass(frozen=True)
class LearnerConfig:
    epsilon: float = 0.05
    eta: float = 0.1
    step_size: StepSize = field(default_factory=StepSize)
    q_init: float = 0.0
    episodes: int | None = None  # None: ceil(2 / (1 - alpha))

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if self.episodes is not None and self.episodes < 1:
            raise ValueError("episodes must be >= 1")

    def episode_budget(self, alpha: float) -> int:
        return self.episodes if self.episodes is not None else default_episodes(alpha)


def default_episodes(alpha: float) -> int:
    # round first: 2 / (1 - 0.9995) is 4000.0000000000036 in binary floating point
    return math.ceil(round(2.0 / (1.0 - alpha), 9))


class LearningResult(NamedTuple):
    q: np.ndarray
    discounted_cost: float
    episode_costs: list[float]
    visits: np.ndarray
    steps: int
    tail_bound: float  # bound on the discounted cost beyond the last step


def boltzmann_on_probability(q_off: float, q_on: float, eta: float) -> float:
    """Softmin probability of ON; depends only on ``q_on - q_off``."""
    z = (q_on - q_off) / eta
    if z >= 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def _choose(q_off: float, q_on: float, epsilon: float, eta: float, rng: RngStream) -> int:
    if epsilon > 0 and rng.uniform() < epsilon:
        return 1 if rng.uniform() < boltzmann_on_probability(q_off, q_on, eta) else 0
    return 1 if q_on < q_off else 0


def behavioral_action(q: np.ndarray, x: int | State, cfg: LearnerConfig, rng: RngStream,
                      model: DeviceModel | None = None) -> Action:
    """With probability ``epsilon`` sample from the Boltzmann distribution
    ``exp(-Q(x, a) / eta)``, otherwise take the argmin (ties go to OFF).

    ``x`` is a state index, or a :class:`State` when ``model`` is given.
    """
    i = model.state_index(x) if isinstance(x, State) else int(x)
    return Action(_choose(float(q[i, 0]), float(q[i, 1]), cfg.epsilon, cfg.eta, rng))


def td_update(q: np.ndarray, x: int, a: int, cost: float, x_next: int, beta: float, alpha: float) -> np.ndarray:
    """In-place Q-learning update of the single entry ``q[x, a]``; returns ``q``."""
    delta = cost + alpha * q[x_next].min() - q[x, a]
    q[x, a] += beta * delta
    return q


def learn(
    env: DeviceEnv,
    cfg: LearnerConfig,
    rng: RngStream,
    episode_log: TextIO | None = None,
) -> LearningResult:
    """Run Q-learning for the configured number of episodes.

    Episodes are delimited by device regeneration; the price process and the
    global clock carry over.  Episode ``j`` (from 0) uses step size
    ``cfg.step_size(j)`` throughout.  Returns the realized lifetime
    discounted cost ``sum_t alpha^t Phi_t``, one sample of the learner's
    expected cost.
    """
    n = env.n_states
    alpha = env.alpha
    episodes = cfg.episode_budget(alpha)
    eps, eta = cfg.epsilon, cfg.eta
    # lists of lists are markedly faster than ndarray indexing in this loop
    q = [[cfg.q_init, cfg.q_init] for _ in range(n)]
    visits = [0] * n
    writer = None
    if episode_log is not None:
        writer = csv.writer(episode_log, lineterminator="\n")
        writer.writerow(["episode", "length", "discounted_cost", "beta"])

    uniform = rng.uniform
    step = env.step_index
    x = env.reset_index(rng)
    disc = 1.0
    total = 0.0
    t = 0
    episode_costs = []
    for j in range(episodes):
        beta = cfg.step_size(j)
        ep_total = 0.0
        start = t
        ended = False
        while not ended:
            qx = q[x]
            q_off, q_on = qx
            if eps > 0 and uniform() < eps:
                a = 1 if uniform() < boltzmann_on_probability(q_off, q_on, eta) else 0
            else:
                a = 1 if q_on < q_off else 0
            cost, y, ended = step(a, rng)
            qy = q[y]
            target = qy[0] if qy[0] <= qy[1] else qy[1]
            qx[a] += beta * (cost + alpha * target - qx[a])
            ep_total += disc * cost
            disc *= alpha
            visits[x] += 1
            t += 1
            x = y
        total += ep_total
        episode_costs.append(ep_total)
        if writer is not None:
            writer.writerow([j, t - start, repr(ep_total), repr(beta)])
    tail = disc * env.max_cost / (1.0 - alpha)
    return LearningResult(np.array(q), total, episode_costs, np.array(visits), t, tail)
