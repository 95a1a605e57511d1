"""Shipped problem instances.

The default instance has the experiment's structure (prices, windows,
discount, request types, point regeneration) but synthetic tables, since
only their qualitative shape is known: arrival and cancellation
probabilities increase with elapsed time, cancellation does not depend on
priority, and dissatisfaction vanishes on on-target service and on early
cancellation.
"""
from __future__ import annotations

import numpy as np

from .model import (
    DeviceModel,
    DeviceParams,
    DissatisfactionTables,
    PriceChain,
    RequestModel,
)

DEFAULT_PRICES = (10.0, 12.0, 15.0, 20.0)
DEFAULT_PRICE_TRANSITION = (
    (0.70, 0.20, 0.10, 0.00),
    (0.15, 0.60, 0.20, 0.05),
    (0.05, 0.20, 0.60, 0.15),
    (0.00, 0.10, 0.20, 0.70),
)
# P(request arrives next step | no request yet, elapsed s), s = 0..W_hat
DEFAULT_ARRIVAL = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
# P(pending request canceled this step | offset s), s = -W..W
DEFAULT_CANCEL = (0.02, 0.04, 0.06, 0.08, 0.10, 0.30, 0.50, 0.70, 1.00)
# relative weight of the high priority (g = 2) over normal (g = 1)
PRIORITY_WEIGHT = (1.0, 2.0)


def _uniform_arrival(p_s, W: int, g_max: int) -> np.ndarray:
    """Spread each arrival probability evenly over the (W+1)*g_max request types."""
    p_s = np.asarray(p_s, dtype=float)
    return np.repeat(p_s[:, None, None], W + 1, axis=1).repeat(g_max, axis=2) / ((W + 1) * g_max)


def paper_default_instance(gamma: float = 1.0) -> DeviceModel:
    """Four prices, two priorities, ``W = 4``, ``W_hat = 5``, ``alpha = 0.9995``,
    ``C = 1`` and regeneration to ``(s=0, g=0)``: 96 states."""
    W, W_hat, g_max = 4, 5, 2
    offsets = np.arange(-W, W + 1, dtype=float)
    weight = np.asarray(PRIORITY_WEIGHT)
    # early service hurts half as much per step as late service
    early = np.where(offsets < 0, 0.25 * -offsets, 0.0)
    late = np.where(offsets > 0, 0.5 * offsets, 0.0)
    u_r = (early + late)[:, None] * weight[None, :]
    u_c = np.where(offsets >= 0, 1.0 + 0.5 * offsets, 0.0)[:, None] * weight[None, :]
    # a speculative job is less unwelcome the longer the device has idled
    u_e = np.array([1.5, 1.25, 1.0, 0.75, 0.6, 0.5])
    continuation = np.repeat(1.0 - np.asarray(DEFAULT_CANCEL)[:, None], g_max, axis=1)
    return DeviceModel(
        price_chain=PriceChain(DEFAULT_PRICES, DEFAULT_PRICE_TRANSITION),
        params=DeviceParams(W=W, W_hat=W_hat, g_max=g_max, C=1.0, alpha=0.9995, gamma=gamma),
        dissatisfaction=DissatisfactionTables(u_r=u_r, u_c=u_c, u_e=u_e),
        requests=RequestModel(
            arrival=_uniform_arrival(DEFAULT_ARRIVAL, W, g_max),
            continuation=continuation,
            regen={(0, 0): 1.0},
        ),
        theorem1_compliant=True,
        name="default",
    )


def tiny_instance(gamma: float = 1.0, alpha: float = 0.95) -> DeviceModel:
    """Two prices, one priority, ``W = 1``, ``W_hat = 1``: 10 states.

    Small enough for exhaustive policy enumeration and for tabular
    Q-learning to converge in seconds.
    """
    W, W_hat, g_max = 1, 1, 1
    return DeviceModel(
        price_chain=PriceChain((5.0, 20.0), ((0.6, 0.4), (0.5, 0.5))),
        params=DeviceParams(W=W, W_hat=W_hat, g_max=g_max, C=1.0, alpha=alpha, gamma=gamma),
        dissatisfaction=DissatisfactionTables(
            u_r=[[1.0], [0.0], [2.0]],
            u_c=[[0.0], [3.0], [4.0]],
            u_e=[2.0, 1.5],
        ),
        requests=RequestModel(
            arrival=_uniform_arrival((0.4, 0.6), W, g_max),
            continuation=[[0.8], [0.5], [0.0]],
            regen={(0, 0): 1.0},
        ),
        theorem1_compliant=True,
        name="tiny",
    )
