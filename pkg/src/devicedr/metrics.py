"""Policy performance, demand-response potential and related diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import Action, DeviceModel, state_space_size
from .solver import (
    check_policy,
    greedy,
    policy_iteration,
    stationary_distribution,
    state_values,
    value_iteration,
)

CSV_COLUMNS = (
    "gamma", "v_base", "v_star", "drp", "rdrp",
    "v_tilde_mean", "v_tilde_se", "runs", "ri",
)


class ValueDecomposition(NamedTuple):
    a_mu: float  # discounted electricity bill
    b_mu: float  # discounted dissatisfaction


class DRPotential(NamedTuple):
    drp: float
    rdrp: float | None  # None when v_base == 0
    v_base: float
    v_star: float
    policy: np.ndarray


class Estimate(NamedTuple):
    mean: float
    se: float
    n: int


def _fmt(x) -> str:
    if x is None:
        return "undefined"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.10g}"


@dataclass(frozen=True)
class MetricsReport:
    gamma: float
    v_base: float
    v_star: float
    drp: float
    rdrp: float | None
    v_tilde: Estimate
    ri: float | None
    error: str | None = None

    def csv_row(self) -> list[str]:
        return [
            _fmt(self.gamma), _fmt(self.v_base), _fmt(self.v_star), _fmt(self.drp),
            _fmt(self.rdrp), _fmt(self.v_tilde.mean), _fmt(self.v_tilde.se),
            _fmt(self.v_tilde.n), _fmt(self.ri),
        ]

    @classmethod
    def failed(cls, gamma: float, error: str) -> MetricsReport:
        nan = math.nan
        return cls(gamma, nan, nan, nan, nan, Estimate(nan, nan, 0), nan, error)


def initial_distribution(model: DeviceModel) -> np.ndarray:
    """``pi_P x pi_0`` as a vector over state indices."""
    pi_p = stationary_distribution(model.price_chain)
    return np.kron(pi_p, model.regen_vector)


def baseline_policy(model: DeviceModel) -> np.ndarray:
    """Never self-initiate; serve every request exactly at its target time."""
    mu = np.zeros((state_space_size(model), 2))
    for i, x in enumerate(model.states):
        mu[i, Action.ON if (x.g >= 1 and x.s == 0) else Action.OFF] = 1.0
    return mu


def always_off_policy(model: DeviceModel) -> np.ndarray:
    mu = np.zeros((state_space_size(model), 2))
    mu[:, Action.OFF] = 1.0
    return mu


def policy_value(model: DeviceModel, mu: np.ndarray, tol: float = 1e-9) -> float:
    """Expected discounted cost of ``mu`` from ``x ~ pi_P x pi_0``."""
    v = state_values(model, mu, tol)
    return float(initial_distribution(model) @ v)


def decompose_value(model: DeviceModel, mu: np.ndarray, tol: float = 1e-9) -> ValueDecomposition:
    """Split ``V_mu`` into bill and dissatisfaction parts, ``V = A + gamma * B``."""
    k = model.kernel
    d0 = initial_distribution(model)
    a = d0 @ state_values(model, mu, tol, cost=k.bill)
    b = d0 @ state_values(model, mu, tol, cost=k.dissatisfaction)
    return ValueDecomposition(float(a), float(b))


def optimal_policy(model: DeviceModel, tol: float = 1e-9, q0: np.ndarray | None = None):
    """Greedy policy of ``Q*`` from value iteration, polished by exact policy
    iteration so near-ties below the value-iteration error resolve correctly.

    Returns ``(q_star, policy)``.
    """
    q_vi = value_iteration(model, tol=tol, q0=q0).q
    result = policy_iteration(model, mu0=greedy(q_vi))
    return result.q, result.policy


def dr_potential(model: DeviceModel, tol: float = 1e-9, q0: np.ndarray | None = None) -> DRPotential:
    """``DRP = V_base - V*`` and ``RDRP = DRP / V_base``."""
    v_base = policy_value(model, baseline_policy(model), tol)
    _, mu_star = optimal_policy(model, tol, q0)
    v_star = policy_value(model, mu_star, tol)
    drp = v_base - v_star
    rdrp = drp / v_base if v_base > 0 else None
    return DRPotential(drp, rdrp, v_base, v_star, mu_star)


def gamma_star_bound(model: DeviceModel, delta_b: float) -> float:
    """``(P_max - P_min) C / ((1 - alpha) delta_b)``.

    A sufficient threshold on ``gamma`` above which the baseline is optimal,
    not a tight one.
    """
    if not delta_b > 0:
        raise ValueError("delta_b must be > 0")
    prices = model.price_chain.prices
    spread = float(prices.max() - prices.min())
    return spread * model.params.C / ((1.0 - model.alpha) * delta_b)


def _deterministic_policy_values(model: DeviceModel, cost: np.ndarray, chunk: int = 4096):
    """Yield ``(choices, values)`` for every deterministic policy, in batches.

    ``choices[k, x]`` is the action taken at ``x`` by policy ``k``, where the
    policy index read in binary gives the ON states.
    """
    k = model.kernel
    n = k.n_states
    d0 = initial_distribution(model)
    bits = 1 << np.arange(n)
    total = 1 << n
    eye = np.eye(n)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        choices = ((ids[:, None] & bits[None, :]) > 0).astype(int)
        P = k.P[np.arange(n)[None, :], choices]  # (m, n, n)
        r = cost[np.arange(n)[None, :], choices]  # (m, n)
        v = np.linalg.solve(eye[None] - model.alpha * P, r[..., None])[..., 0]
        yield choices, v @ d0


def delta_b_bruteforce(model: DeviceModel, max_states: int = 16, zero_tol: float = 1e-10) -> float | None:
    """Smallest strictly positive discounted dissatisfaction over all
    deterministic policies.

    Enumerates ``2 ** n_states`` policies, so refuses instances above
    ``max_states``.  Returns ``None`` when every policy has zero
    dissatisfaction (the gap is undefined).  Values below ``zero_tol`` times
    the largest one count as zero.
    """
    n = state_space_size(model)
    if n > max_states:
        raise ValueError(
            f"instance has {n} states; exhaustive policy enumeration is capped at {max_states}"
        )
    dis = model.kernel.dissatisfaction
    b_all = np.concatenate([b for _, b in _deterministic_policy_values(model, dis)])
    scale = max(1.0, float(b_all.max()))
    positive = b_all[b_all > zero_tol * scale]
    return float(positive.min()) if positive.size else None


def gamma_threshold_bruteforce(model: DeviceModel, max_states: int = 16) -> float:
    """Exact smallest ``gamma`` at which the baseline beats every
    deterministic policy, ``max over mu with B_mu > 0 of (A_base - A_mu) / B_mu``
    (clipped at 0).  Diagnostic for checking :func:`gamma_star_bound`."""
    n = state_space_size(model)
    if n > max_states:
        raise ValueError(f"instance has {n} states; capped at {max_states}")
    k = model.kernel
    a_base = decompose_value(model, baseline_policy(model)).a_mu
    a_all = np.concatenate([a for _, a in _deterministic_policy_values(model, k.bill)])
    b_all = np.concatenate([b for _, b in _deterministic_policy_values(model, k.dissatisfaction)])
    scale = max(1.0, float(b_all.max()))
    mask = b_all > 1e-10 * scale
    if not mask.any():
        return 0.0
    return max(0.0, float(np.max((a_base - a_all[mask]) / b_all[mask])))


def relative_improvement(v_base: float, v_tilde: float) -> float:
    """``(V_base - V_tilde) / V_base``; negative when learning costs more
    than the baseline."""
    if not v_base > 0:
        raise ValueError("v_base must be > 0")
    return (v_base - v_tilde) / v_base


def mean_and_se(samples) -> Estimate:
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n == 0:
        return Estimate(math.nan, math.nan, 0)
    mean = math.fsum(x.tolist()) / n
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return Estimate(mean, se, n)
