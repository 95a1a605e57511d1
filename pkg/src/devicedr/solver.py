"""Dynamic programming on the device MDP.

Q-tables and policies are ``(n_states, 2)`` float arrays indexed by the
enumeration order of :func:`devicedr.model.enumerate_states` and by
:class:`~devicedr.model.Action`.
"""
from __future__ import annotations

import warnings
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .model import Action, DeviceModel, PriceChain, state_space_size

DIRECT_SOLVE_LIMIT = 10_000


class ConvergenceWarning(RuntimeWarning):
    pass


class VIResult(NamedTuple):
    q: np.ndarray
    residual: float
    iterations: int


class PIResult(NamedTuple):
    q: np.ndarray
    policy: np.ndarray
    iterations: int


def _check_q(model: DeviceModel, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = state_space_size(model)
    if q.shape != (n, 2):
        raise ValueError(f"table has shape {q.shape}, expected ({n}, 2)")
    return q


def _operator(model: DeviceModel, cost: np.ndarray | None = None):
    k = model.kernel
    n = k.n_states
    P2 = np.ascontiguousarray(k.P.reshape(2 * n, n))
    c = k.cost if cost is None else cost
    return P2, np.ascontiguousarray(c.reshape(2 * n)), n


def bellman_backup(model: DeviceModel, q: np.ndarray) -> np.ndarray:
    """One Jacobi sweep of the optimal Bellman operator.

    ``T(q)(x, a) = sum over outcomes of prob * (cost + alpha * min_a' q(x', a'))``.
    """
    q = _check_q(model, q)
    P2, c, n = _operator(model)
    return (c + model.alpha * (P2 @ q.min(axis=1))).reshape(n, 2)


def value_iteration(
    model: DeviceModel,
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
    q0: np.ndarray | None = None,
) -> VIResult:
    """Iterate the Bellman operator until the sup-norm residual ``|T(Q) - Q|``
    of the returned table is at most ``tol``.

    Emits :class:`ConvergenceWarning` when ``max_iter`` is exhausted.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    P2, c, n = _operator(model)
    alpha = model.alpha
    q = np.zeros(2 * n) if q0 is None else _check_q(model, q0).reshape(2 * n).copy()
    residual = np.inf
    it = 0
    while True:
        q_new = c + alpha * (P2 @ q.reshape(n, 2).min(axis=1))
        residual = float(np.max(np.abs(q_new - q)))
        if residual <= tol or it >= max_iter:
            break
        q = q_new
        it += 1
    if residual > tol:
        warnings.warn(
            f"value iteration stopped after {it} iterations with residual {residual:.3e} > {tol:.3e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return VIResult(q.reshape(n, 2), residual, it)


def greedy(q: np.ndarray) -> np.ndarray:
    """Deterministic argmin policy; exact ties go to OFF."""
    q = np.asarray(q, dtype=float)
    choice = (q[:, Action.ON] < q[:, Action.OFF]).astype(int)
    mu = np.zeros_like(q)
    mu[np.arange(len(q)), choice] = 1.0
    return mu


def check_policy(model: DeviceModel, mu: np.ndarray) -> np.ndarray:
    mu = _check_q(model, mu)
    if np.any(mu < 0) or np.any(np.abs(mu.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("policy rows must be probability distributions")
    return mu


def state_values(
    model: DeviceModel,
    mu: np.ndarray,
    tol: float = 1e-9,
    cost: np.ndarray | None = None,
    method: str = "auto",
) -> np.ndarray:
    """``V_mu(x)`` for every state, optionally under a substitute cost table."""
    mu = check_policy(model, mu)
    k = model.kernel
    n = k.n_states
    c = k.cost if cost is None else np.asarray(cost, dtype=float)
    r_mu = (mu * c).sum(axis=1)
    P_mu = np.einsum("xa,xay->xy", mu, k.P)
    if method == "auto":
        method = "direct" if 2 * n <= DIRECT_SOLVE_LIMIT else "iterative"
    if method == "direct":
        return np.linalg.solve(np.eye(n) - model.alpha * P_mu, r_mu)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    v = np.zeros(n)
    while True:
        v_new = r_mu + model.alpha * (P_mu @ v)
        step = np.max(np.abs(v_new - v))
        v = v_new
        if model.alpha * step <= tol:
            return v


def policy_q(
    model: DeviceModel,
    mu: np.ndarray,
    tol: float = 1e-9,
    cost: np.ndarray | None = None,
    method: str = "auto",
) -> np.ndarray:
    """Q-function of a (possibly randomized) stationary policy.

    Solves ``Q(x,a) = c(x,a) + alpha * sum_y P(y|x,a) sum_a' mu(y,a') Q(y,a')``
    by a direct linear solve on state values for small instances, otherwise by
    iterative evaluation to residual ``tol``.
    """
    k = model.kernel
    c = k.cost if cost is None else np.asarray(cost, dtype=float)
    v = state_values(model, mu, tol, cost=c, method=method)
    return c + model.alpha * np.einsum("xay,y->xa", k.P, v)


def policy_iteration(
    model: DeviceModel,
    mu0: np.ndarray | None = None,
    max_iter: int = 1000,
) -> PIResult:
    """Howard policy iteration with exact evaluation.

    The incumbent action is kept unless the other one is better by more than
    a relative ``1e-12``, so the loop cannot cycle on ties.
    """
    n = state_space_size(model)
    rows = np.arange(n)
    start = np.zeros(n, dtype=int) if mu0 is None else check_policy(model, mu0).argmax(axis=1)
    mu = np.zeros((n, 2))
    mu[rows, start] = 1.0
    for it in range(1, max_iter + 1):
        q = policy_q(model, mu)
        current = mu.argmax(axis=1)
        other = 1 - current
        slack = 1e-12 * np.maximum(1.0, np.abs(q).max())
        switch = q[rows, other] < q[rows, current] - slack
        if not switch.any():
            return PIResult(q, mu, it)
        new = np.where(switch, other, current)
        mu = np.zeros((n, 2))
        mu[rows, new] = 1.0
    warnings.warn("policy iteration hit max_iter", ConvergenceWarning, stacklevel=2)
    return PIResult(q, mu, max_iter)


def stationary_distribution(chain: PriceChain, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of an ergodic chain via the balance equations."""
    T = chain.transition
    n = T.shape[0]
    A = np.vstack([T.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    err = np.max(np.abs(pi @ T - pi))
    if err > tol:
        raise ArithmeticError(f"stationary distribution residual {err:.3e} exceeds {tol:.3e}")
    return pi


# -- flat text tables ---------------------------------------------------------


def save_table(path: str | Path, table: np.ndarray) -> None:
    """Write ``state_index action value`` lines, one per entry.

    Values use ``repr`` so a round trip is exact.
    """
    table = np.asarray(table, dtype=float)
    with open(path, "w") as fh:
        fh.write("# state action value\n")
        for i, row in enumerate(table):
            for a in (Action.OFF, Action.ON):
                fh.write(f"{i} {a.name.lower()} {float(row[a])!r}\n")


def load_table(path: str | Path) -> np.ndarray:
    entries = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                idx, act, val = line.split()
                entries[(int(idx), Action[act.upper()])] = float(val)
            except (ValueError, KeyError):
                raise ValueError(f"{path}:{lineno}: expected 'state action value'") from None
    n = max(i for i, _ in entries) + 1
    if len(entries) != 2 * n:
        raise ValueError(f"{path}: expected {2 * n} entries, found {len(entries)}")
    table = np.empty((n, 2))
    for (i, a), v in entries.items():
        table[i, a] = v
    return table
