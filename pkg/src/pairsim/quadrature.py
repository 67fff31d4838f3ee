"""Adaptive Simpson quadrature."""

from __future__ import annotations

import math
from typing import Callable

from .errors import QuadratureFailure

INITIAL_PANELS = 8
MAX_DEPTH = 60


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = MAX_DEPTH) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    The range is first cut into a few panels so that a narrow feature cannot
    slip between the first five samples.  Panels that hit ``max_depth`` are
    accepted as is; if the error they carry exceeds ``tol`` the call fails.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth)
    total = 0.0
    unresolved = 0.0
    edges = [a + (b - a) * i / INITIAL_PANELS for i in range(INITIAL_PANELS)] + [b]
    stack = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = f(lo), f(mid), f(hi)
        whole = (hi - lo) / 6 * (flo + 4 * fmid + fhi)
        stack.append((lo, hi, flo, fmid, fhi, whole, tol / INITIAL_PANELS, 0))
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6 * (flo + 4 * flm + fmid)
        right = (hi - mid) / 6 * (fmid + 4 * frm + fhi)
        delta = left + right - whole
        if not math.isfinite(delta):
            raise QuadratureFailure(f"non-finite integrand on [{lo}, {hi}]")
        if abs(delta) <= 15 * eps:
            total += left + right + delta / 15
        elif depth >= max_depth or lm <= lo or rm >= hi:
            total += left + right + delta / 15
            unresolved += abs(delta) / 15
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    if unresolved > tol:
        raise QuadratureFailure(f"unresolved error {unresolved:.3g} exceeds tolerance {tol:.3g}")
    return total


def integrate_from_zero(g: Callable[[float], float], upper: float, tol: float = 1e-10) -> float:
    """``int_0^upper g(y) dy`` for finite or infinite ``upper``.

    Nonnegative ranges go through ``y = u / (1 - u)``, which maps ``[0, inf)``
    onto ``[0, 1)``; the transformed integrand is taken as 0 at ``u = 1``.
    """
    if upper == 0:
        return 0.0
    if upper < 0:
        if math.isinf(upper):
            raise QuadratureFailure("lower-infinite ranges are not supported")
        return adaptive_simpson(g, 0.0, upper, tol)

    def transformed(u: float) -> float:
        if u >= 1.0:
            return 0.0
        w = 1.0 - u
        return g(u / w) / (w * w)

    u_end = 1.0 if math.isinf(upper) else upper / (1.0 + upper)
    return adaptive_simpson(transformed, 0.0, u_end, tol)
