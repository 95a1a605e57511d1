"""Problem instances and the exact transition/cost kernel of the device MDP.

A state is ``(price_idx, s, g)``.  ``g == 0`` means no request has arrived in
the current episode and ``s`` counts steps since the episode started
(saturating at ``W_hat``).  ``g >= 1`` is the priority of the pending request
and ``s`` is the signed offset from its target time, in ``[-W, W]``.

Tables indexed by a signed offset store offset ``o`` at row ``o + W``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, NamedTuple

import numpy as np

PROB_TOL = 1e-12


class InvalidModelError(ValueError):
    """Raised when an instance violates an invariant.

    ``path`` points into the configuration tree, e.g.
    ``price_chain.transition[2]``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class Action(enum.IntEnum):
    OFF = 0
    ON = 1


ACTIONS = (Action.OFF, Action.ON)


class State(NamedTuple):
    price_idx: int
    s: int
    g: int


class TransitionOutcome(NamedTuple):
    """One branch of the kernel from a state-action pair.

    ``cost == bill + gamma * dissatisfaction``.  ``ends_episode`` is set when
    the device portion is regenerated on this branch.
    """

    next: State
    prob: float
    cost: float
    bill: float
    dissatisfaction: float
    ends_episode: bool


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def is_ergodic(transition: np.ndarray) -> bool:
    """True when the chain is irreducible and aperiodic (primitive matrix)."""
    n = transition.shape[0]
    adj = (transition > 0).astype(np.int64)
    reach = np.eye(n, dtype=np.int64)
    # Wielandt: a primitive n x n matrix has A^k > 0 for k = (n-1)^2 + 1
    for _ in range((n - 1) ** 2 + 1):
        reach = np.minimum(reach @ adj, 1)
    return bool(reach.all())


@dataclass(frozen=True, eq=False)
class PriceChain:
    prices: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        prices = _readonly(self.prices)
        trans = _readonly(self.transition)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "transition", trans)
        if prices.ndim != 1 or prices.size == 0:
            raise InvalidModelError("price_chain.prices", "must be a non-empty list")
        for i, p in enumerate(prices):
            if not np.isfinite(p) or p <= 0:
                raise InvalidModelError(f"price_chain.prices[{i}]", f"price {p} must be > 0")
        n = prices.size
        if trans.shape != (n, n):
            raise InvalidModelError(
                "price_chain.transition", f"expected shape ({n}, {n}), got {trans.shape}"
            )
        for i, row in enumerate(trans):
            if np.any(row < 0) or np.any(row > 1) or not np.all(np.isfinite(row)):
                raise InvalidModelError(
                    f"price_chain.transition[{i}]", "entries must lie in [0, 1]"
                )
            if abs(row.sum() - 1.0) > PROB_TOL:
                raise InvalidModelError(
                    f"price_chain.transition[{i}]", f"row sums to {row.sum():.15g}, expected 1"
                )
        if not is_ergodic(trans):
            raise InvalidModelError(
                "price_chain.transition", "chain is not ergodic (irreducible and aperiodic)"
            )

    @property
    def n_prices(self) -> int:
        return self.prices.size


@dataclass(frozen=True)
class DeviceParams:
    W: int
    W_hat: int
    g_max: int
    C: float
    alpha: float
    gamma: float

    def __post_init__(self):
        for name in ("W", "W_hat", "g_max"):
            v = getattr(self, name)
            if int(v) != v:
                raise InvalidModelError(f"params.{name}", f"must be an integer, got {v}")
            object.__setattr__(self, name, int(v))
        if self.W < 0:
            raise InvalidModelError("params.W", "must be >= 0")
        if self.W_hat < 0:
            raise InvalidModelError("params.W_hat", "must be >= 0")
        if self.g_max < 1:
            raise InvalidModelError("params.g_max", "must be >= 1")
        if not self.C > 0:
            raise InvalidModelError("params.C", "must be > 0")
        if not 0 < self.alpha < 1:
            raise InvalidModelError("params.alpha", "must lie in (0, 1)")
        if not self.gamma >= 0:
            raise InvalidModelError("params.gamma", "must be >= 0")


@dataclass(frozen=True, eq=False)
class DissatisfactionTables:
    """``u_r``/``u_c`` have shape ``(2W+1, g_max)``; ``u_e`` has ``W_hat+1`` rows."""

    u_r: np.ndarray
    u_c: np.ndarray
    u_e: np.ndarray

    def __post_init__(self):
        for name in ("u_r", "u_c", "u_e"):
            arr = _readonly(getattr(self, name))
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise InvalidModelError(f"dissatisfaction.{name}", "entries must be finite")


@dataclass(frozen=True, eq=False)
class RequestModel:
    """Request arrivals, survival of pending requests, and regeneration.

    ``arrival[s, d + W, g - 1]`` is the probability that a request with target
    offset ``d`` in ``[-W, 0]`` and priority ``g`` arrives next step, given no
    request yet and elapsed time ``s``.  ``continuation[s + W, g - 1]`` is the
    probability a pending request is not canceled this step.  ``regen`` maps
    device portions ``(s, g)`` to their regeneration probability.
    """

    arrival: np.ndarray
    continuation: np.ndarray
    regen: Mapping[tuple[int, int], float]

    def __post_init__(self):
        object.__setattr__(self, "arrival", _readonly(self.arrival))
        object.__setattr__(self, "continuation", _readonly(self.continuation))
        regen = {(int(s), int(g)): float(p) for (s, g), p in dict(self.regen).items()}
        object.__setattr__(self, "regen", regen)
        total = sum(regen.values())
        if any(p < 0 for p in regen.values()) or abs(total - 1.0) > PROB_TOL:
            raise InvalidModelError(
                "requests.regen", f"must be a distribution, probabilities sum to {total:.15g}"
            )


@dataclass(frozen=True, eq=False)
class DeviceModel:
    price_chain: PriceChain
    params: DeviceParams
    dissatisfaction: DissatisfactionTables
    requests: RequestModel
    theorem1_compliant: bool = False
    name: str = field(default="", compare=False)

    def __post_init__(self):
        _check_shapes(self)
        if self.theorem1_compliant:
            problems = theorem1_violations(self)
            if problems:
                path, msg = problems[0]
                raise InvalidModelError(path, msg)

    # -- convenience -------------------------------------------------------

    @property
    def W(self) -> int:
        return self.params.W

    @property
    def W_hat(self) -> int:
        return self.params.W_hat

    @property
    def g_max(self) -> int:
        return self.params.g_max

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def n_device(self) -> int:
        return (2 * self.W + 1) * self.g_max + self.W_hat + 1

    def with_gamma(self, gamma: float) -> DeviceModel:
        return replace(self, params=replace(self.params, gamma=float(gamma)))

    def with_params(self, **changes) -> DeviceModel:
        return replace(self, params=replace(self.params, **changes))

    def device_index(self, s: int, g: int) -> int:
        if g == 0:
            if not 0 <= s <= self.W_hat:
                raise InvalidModelError("state", f"no-request elapsed time {s} outside [0, {self.W_hat}]")
            return s
        if not (1 <= g <= self.g_max and -self.W <= s <= self.W):
            raise InvalidModelError("state", f"invalid request state (s={s}, g={g})")
        return self.W_hat + 1 + (s + self.W) * self.g_max + (g - 1)

    def state_index(self, x: State) -> int:
        if not 0 <= x.price_idx < self.price_chain.n_prices:
            raise InvalidModelError("state", f"price index {x.price_idx} out of range")
        return x.price_idx * self.n_device + self.device_index(x.s, x.g)

    def state_at(self, k: int) -> State:
        return self.states[k]

    @cached_property
    def states(self) -> tuple[State, ...]:
        return tuple(enumerate_states(self))

    @cached_property
    def regen_vector(self) -> np.ndarray:
        """Regeneration distribution as a dense vector over device portions."""
        vec = np.zeros(self.n_device)
        for (s, g), p in self.requests.regen.items():
            vec[self.device_index(s, g)] += p
        vec.setflags(write=False)
        return vec

    @cached_property
    def kernel(self) -> Kernel:
        return Kernel.build(self)


def _check_shapes(model: DeviceModel) -> None:
    W, W_hat, g_max = model.W, model.W_hat, model.g_max
    d = model.dissatisfaction
    r = model.requests
    expected = {
        "dissatisfaction.u_r": (d.u_r, (2 * W + 1, g_max)),
        "dissatisfaction.u_c": (d.u_c, (2 * W + 1, g_max)),
        "dissatisfaction.u_e": (d.u_e, (W_hat + 1,)),
        "requests.arrival": (r.arrival, (W_hat + 1, W + 1, g_max)),
        "requests.continuation": (r.continuation, (2 * W + 1, g_max)),
    }
    for path, (arr, shape) in expected.items():
        if arr.shape != shape:
            raise InvalidModelError(path, f"expected shape {shape}, got {arr.shape}")

    for s in range(W_hat + 1):
        row = r.arrival[s]
        if np.any(row < 0) or not np.all(np.isfinite(row)):
            raise InvalidModelError(f"requests.arrival[{s}]", "probabilities must be >= 0")
        if row.sum() > 1.0 + PROB_TOL:
            raise InvalidModelError(
                f"requests.arrival[{s}]", f"arrival probabilities sum to {row.sum():.15g} > 1"
            )
    cont = r.continuation
    if np.any(cont < 0) or np.any(cont > 1):
        raise InvalidModelError("requests.continuation", "entries must lie in [0, 1]")
    for g in range(g_max):
        if cont[2 * W, g] != 0:
            raise InvalidModelError(
                f"requests.continuation[{2 * W}][{g}]",
                "a request must be canceled at the end of the window (s = W): entry must be 0",
            )
    for (s, g) in r.regen:
        try:
            model.device_index(s, g)
        except InvalidModelError:
            raise InvalidModelError("requests.regen", f"({s}, {g}) is not a device portion state") from None


def theorem1_violations(model: DeviceModel) -> list[tuple[str, str]]:
    """Conditions under which the baseline becomes optimal for large ``gamma``.

    (a) prices strictly positive, (b) every dissatisfaction entry is
    non-negative, (c) zero dissatisfaction when a request is served at its
    target time or canceled before it.  ``u_c`` at offset 0 is left free.
    Returns ``(path, message)`` pairs; empty when compliant.
    """
    out = []
    W = model.W
    if np.any(model.price_chain.prices <= 0):
        out.append(("price_chain.prices", "condition (a): prices must be strictly positive"))
    d = model.dissatisfaction
    for name in ("u_r", "u_c", "u_e"):
        arr = getattr(d, name)
        if np.any(arr < 0):
            idx = tuple(int(i) for i in np.argwhere(arr < 0)[0])
            out.append(
                (f"dissatisfaction.{name}" + "".join(f"[{i}]" for i in idx),
                 "condition (b): dissatisfaction must be non-negative")
            )
    for g in range(model.g_max):
        if d.u_r[W, g] != 0:
            out.append(
                (f"dissatisfaction.u_r[{W}][{g}]",
                 "condition (c): serving a request at its target time must cost no dissatisfaction")
            )
        for s in range(-W, 0):
            if d.u_c[s + W, g] != 0:
                out.append(
                    (f"dissatisfaction.u_c[{s + W}][{g}]",
                     "condition (c): canceling before the target time must cost no dissatisfaction")
                )
    return out


# -- enumeration and kernel ---------------------------------------------------


def state_space_size(model: DeviceModel) -> int:
    return model.price_chain.n_prices * model.n_device


def enumerate_states(model: DeviceModel) -> list[State]:
    """All states: price major, then ``s = 0..W_hat`` with ``g = 0``, then
    request states ordered by ``(s, g)``."""
    out = []
    for p in range(model.price_chain.n_prices):
        out.extend(State(p, s, 0) for s in range(model.W_hat + 1))
        out.extend(
            State(p, s, g)
            for s in range(-model.W, model.W + 1)
            for g in range(1, model.g_max + 1)
        )
    return out


def _device_successors(model: DeviceModel, s: int, g: int, a: Action):
    """Device-portion branches: ``(s', g', prob, bill_units, dissatisfaction, ends)``.

    ``bill_units`` is 1 when a job runs (bill = price * C).
    """
    W = model.W
    d = model.dissatisfaction
    regen = [(rs, rg, p) for (rs, rg), p in model.requests.regen.items() if p > 0]
    if g == 0:
        row = min(s, model.W_hat)
        if a == Action.ON:
            return [(rs, rg, p, 1, float(d.u_e[row]), True) for rs, rg, p in regen]
        arr = model.requests.arrival[row]
        out = []
        for i in range(W + 1):
            for gi in range(model.g_max):
                p = float(arr[i, gi])
                if p > 0:
                    out.append((i - W, gi + 1, p, 0, 0.0, False))
        stay = 1.0 - float(arr.sum())
        if stay > 0:
            out.append((min(s + 1, model.W_hat), 0, stay, 0, 0.0, False))
        return out
    if a == Action.ON:
        return [(rs, rg, p, 1, float(d.u_r[s + W, g - 1]), True) for rs, rg, p in regen]
    keep = float(model.requests.continuation[s + W, g - 1])
    out = []
    if keep > 0:
        out.append((s + 1, g, keep, 0, 0.0, False))
    if keep < 1:
        u = float(d.u_c[s + W, g - 1])
        out.extend((rs, rg, (1.0 - keep) * p, 0, u, True) for rs, rg, p in regen)
    return out


def transitions(model: DeviceModel, x: State, a: Action) -> list[TransitionOutcome]:
    """Enumerate every outcome of taking ``a`` in ``x``.

    The EMS observes the current price, acts, then the next price is drawn from
    the chain; the price marginal never depends on the device or the action.
    Zero-probability branches are omitted.
    """
    model.state_index(x)
    a = Action(a)
    price = float(model.price_chain.prices[x.price_idx])
    row = model.price_chain.transition[x.price_idx]
    C, gamma = model.params.C, model.gamma
    out = []
    for s2, g2, pd, job, u, ends in _device_successors(model, x.s, x.g, a):
        bill = job * price * C
        cost = bill + gamma * u
        for p2 in np.flatnonzero(row):
            out.append(
                TransitionOutcome(State(int(p2), s2, g2), pd * float(row[p2]), cost, bill, u, ends)
            )
    return out


@dataclass(frozen=True, eq=False)
class Kernel:
    """Dense tabular form of the kernel used by the solvers.

    ``P[x, a, y]`` transition probabilities, ``bill[x, a]`` and
    ``dissatisfaction[x, a]`` expected one-step components, and per-outcome
    arrays for sampling.
    """

    P: np.ndarray
    bill: np.ndarray
    dissatisfaction: np.ndarray
    gamma: float
    outcomes: tuple[tuple[tuple[TransitionOutcome, ...], ...], ...]

    @property
    def cost(self) -> np.ndarray:
        return self.bill + self.gamma * self.dissatisfaction

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @classmethod
    def build(cls, model: DeviceModel) -> Kernel:
        states = model.states
        n = len(states)
        P = np.zeros((n, 2, n))
        bill = np.zeros((n, 2))
        dis = np.zeros((n, 2))
        outcomes = []
        for i, x in enumerate(states):
            per_action = []
            for a in ACTIONS:
                outs = tuple(transitions(model, x, a))
                per_action.append(outs)
                for o in outs:
                    P[i, a, model.state_index(o.next)] += o.prob
                    bill[i, a] += o.prob * o.bill
                    dis[i, a] += o.prob * o.dissatisfaction
            outcomes.append(tuple(per_action))
        for arr in (P, bill, dis):
            arr.setflags(write=False)
        return cls(P, bill, dis, model.gamma, tuple(outcomes))

    @cached_property
    def max_cost(self) -> float:
        return max(o.cost for per in self.outcomes for outs in per for o in outs)
