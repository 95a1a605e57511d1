"""JSON serialization of problem instances.

Canonical layout (all tables are nested lists)::

    {
      "name": "...",
      "theorem1_compliant": true,
      "price_chain": {"prices": [...], "transition": [[...], ...]},
      "params": {"W": 4, "W_hat": 5, "g_max": 2, "C": 1.0,
                 "alpha": 0.9995, "gamma": 1.0},
      "dissatisfaction": {"u_r": [[...]], "u_c": [[...]], "u_e": [...]},
      "requests": {"arrival": [[[...]]], "continuation": [[...]],
                   "regen": [{"s": 0, "g": 0, "p": 1.0}]}
    }

``u_r``, ``u_c`` and ``continuation`` rows run over ``s = -W..W``;
``arrival[s][i][g-1]`` holds target offset ``d = i - W``.
"""
from __future__ import annotations

import json
from pathlib import Path

from .model import (
    DeviceModel,
    DeviceParams,
    DissatisfactionTables,
    InvalidModelError,
    PriceChain,
    RequestModel,
)

_PARAM_KEYS = ("W", "W_hat", "g_max", "C", "alpha", "gamma")


def _section(tree: dict, key: str, path: str = "") -> dict:
    full = f"{path}.{key}" if path else key
    if key not in tree:
        raise InvalidModelError(full, "missing")
    sub = tree[key]
    if not isinstance(sub, dict):
        raise InvalidModelError(full, "expected an object")
    return sub


def _field(tree: dict, key: str, path: str):
    if key not in tree:
        raise InvalidModelError(f"{path}.{key}", "missing")
    return tree[key]


def model_from_dict(tree: dict) -> DeviceModel:
    if not isinstance(tree, dict):
        raise InvalidModelError("<root>", "expected an object")
    pc = _section(tree, "price_chain")
    chain = PriceChain(
        prices=_field(pc, "prices", "price_chain"),
        transition=_field(pc, "transition", "price_chain"),
    )
    pr = _section(tree, "params")
    params = DeviceParams(**{k: _field(pr, k, "params") for k in _PARAM_KEYS})
    ds = _section(tree, "dissatisfaction")
    tables = DissatisfactionTables(
        u_r=_field(ds, "u_r", "dissatisfaction"),
        u_c=_field(ds, "u_c", "dissatisfaction"),
        u_e=_field(ds, "u_e", "dissatisfaction"),
    )
    rq = _section(tree, "requests")
    regen = {}
    for i, entry in enumerate(_field(rq, "regen", "requests")):
        try:
            key = (int(entry["s"]), int(entry["g"]))
            regen[key] = regen.get(key, 0.0) + float(entry["p"])
        except (KeyError, TypeError, ValueError):
            raise InvalidModelError(f"requests.regen[{i}]", "expected {s, g, p}") from None
    requests = RequestModel(
        arrival=_field(rq, "arrival", "requests"),
        continuation=_field(rq, "continuation", "requests"),
        regen=regen,
    )
    try:
        return DeviceModel(
            price_chain=chain,
            params=params,
            dissatisfaction=tables,
            requests=requests,
            theorem1_compliant=bool(tree.get("theorem1_compliant", False)),
            name=str(tree.get("name", "")),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise InvalidModelError("<root>", str(exc)) from exc


def model_to_dict(model: DeviceModel) -> dict:
    p = model.params
    return {
        "name": model.name,
        "theorem1_compliant": model.theorem1_compliant,
        "price_chain": {
            "prices": model.price_chain.prices.tolist(),
            "transition": model.price_chain.transition.tolist(),
        },
        "params": {k: getattr(p, k) for k in _PARAM_KEYS},
        "dissatisfaction": {
            "u_r": model.dissatisfaction.u_r.tolist(),
            "u_c": model.dissatisfaction.u_c.tolist(),
            "u_e": model.dissatisfaction.u_e.tolist(),
        },
        "requests": {
            "arrival": model.requests.arrival.tolist(),
            "continuation": model.requests.continuation.tolist(),
            "regen": [
                {"s": s, "g": g, "p": prob}
                for (s, g), prob in sorted(model.requests.regen.items())
            ],
        },
    }


def load_model(path: str | Path) -> DeviceModel:
    path = Path(path)
    try:
        tree = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidModelError(str(path), f"not valid JSON: {exc}") from None
    return model_from_dict(tree)


def dumps(tree, indent: int = 0) -> str:
    """Canonical JSON text: objects indented, numeric rows kept on one line."""
    pad = "  " * indent
    if isinstance(tree, dict):
        if not tree:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {dumps(v, indent + 1)}' for k, v in tree.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(tree, list) and any(isinstance(v, (list, dict)) for v in tree):
        items = [f"{pad}  {dumps(v, indent + 1)}" for v in tree]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    return json.dumps(tree)


def save_model(model: DeviceModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model_to_dict(model)) + "\n")
