"""Numerical verification of the four baseline/potential claims on an instance.

1. ``V_base`` does not depend on ``gamma``.
2. The baseline is optimal (``DRP = 0``) for all large enough ``gamma``.
3. ``DRP`` and ``RDRP`` are non-increasing in ``gamma``.
4. ``RDRP = 1`` at ``gamma = 0``.

They hold whenever :func:`~devicedr.model.theorem1_violations` is empty.
"""
from __future__ import annotations

from typing import NamedTuple

from .metrics import (
    delta_b_bruteforce,
    dr_potential,
    gamma_star_bound,
)
from .model import DeviceModel, state_space_size, theorem1_violations

CLAIM_TOL = 1e-8


class ClaimResult(NamedTuple):
    claim: int
    passed: bool
    detail: str


class NonCompliantError(ValueError):
    pass


def _baseline_optimal_from(model: DeviceModel, gamma0: float, tol: float, cap: float = 1e9):
    """Double ``gamma`` from ``gamma0`` until the baseline is optimal.

    Returns the first such ``gamma`` or ``None`` if ``cap`` is passed first.
    """
    g = max(gamma0, 1.0)
    while g <= cap:
        pot = dr_potential(model.with_gamma(g), tol)
        if abs(pot.drp) <= CLAIM_TOL * max(1.0, pot.v_base):
            return g
        g *= 2.0
    return None


def verify_claims(
    model: DeviceModel,
    gamma_grid,
    tol: float = 1e-9,
    brute_force_cap: int = 16,
) -> list[ClaimResult]:
    """Evaluate every claim over ``gamma_grid``; ``gamma = 0`` is always added.

    Claim 2 is checked by doubling ``gamma`` past the grid until ``DRP``
    vanishes, and re-checked at twice that value.  On instances with at most
    ``brute_force_cap`` states it is also checked exactly at ``1.01`` times the
    sufficient threshold computed from the brute-force dissatisfaction gap.
    """
    problems = theorem1_violations(model)
    if problems:
        listing = "; ".join(f"{p}: {m}" for p, m in problems)
        raise NonCompliantError(f"instance violates the required conditions: {listing}")

    grid = sorted(set(float(g) for g in gamma_grid) | {0.0})
    pots = [dr_potential(model.with_gamma(g), tol) for g in grid]
    results = []

    v_base = [p.v_base for p in pots]
    spread = max(v_base) - min(v_base)
    results.append(ClaimResult(
        1, spread <= CLAIM_TOL,
        f"V_base in [{min(v_base):.10g}, {max(v_base):.10g}] over {len(grid)} gammas (spread {spread:.3e})",
    ))

    g_opt = _baseline_optimal_from(model, grid[-1], tol)
    ok2 = g_opt is not None
    detail = (f"baseline optimal from gamma={g_opt:g}" if ok2
              else "DRP did not vanish below gamma=1e9")
    if ok2:
        again = dr_potential(model.with_gamma(2 * g_opt), tol)
        ok2 = abs(again.drp) <= CLAIM_TOL * max(1.0, again.v_base)
        detail += f"; DRP({2 * g_opt:g})={again.drp:.3e}"
    if state_space_size(model) <= brute_force_cap:
        db = delta_b_bruteforce(model, max_states=brute_force_cap)
        if db is None:
            detail += "; dissatisfaction gap undefined (all B_mu = 0)"
        else:
            g_star = gamma_star_bound(model, db)
            exact = dr_potential(model.with_gamma(1.01 * g_star), tol)
            ok_exact = abs(exact.drp) <= CLAIM_TOL
            ok2 = ok2 and ok_exact
            detail += f"; gap={db:.6g}, bound={g_star:.6g}, DRP(1.01*bound)={exact.drp:.3e}"
    results.append(ClaimResult(2, ok2, detail))

    drp = [p.drp for p in pots]
    rdrp = [p.rdrp for p in pots]
    worst_drp = max((b - a for a, b in zip(drp, drp[1:])), default=0.0)
    if any(r is None for r in rdrp):
        ok3, worst_rdrp = False, float("nan")
    else:
        worst_rdrp = max((b - a for a, b in zip(rdrp, rdrp[1:])), default=0.0)
        ok3 = worst_drp <= CLAIM_TOL and worst_rdrp <= CLAIM_TOL
    results.append(ClaimResult(
        3, ok3,
        f"largest step increase: DRP {worst_drp:.3e}, RDRP {worst_rdrp:.3e}",
    ))

    r0 = rdrp[0]
    ok4 = r0 is not None and abs(r0 - 1.0) <= CLAIM_TOL
    results.append(ClaimResult(4, ok4, f"RDRP(0)={r0!r}"))
    return results

