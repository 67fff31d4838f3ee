"""Exact and semi-exact fluid solutions.

Two families are covered:

* fine balance (``pi_ij = alpha_bar_i + beta_bar_j``), any ``k``: everything is
  explicit and ``Q(inf) = x y^T``;
* the symmetric 2x2 case (``pi12 = pi21``, ``x1 = y1``) outside fine balance:
  the singles frequency ``A1`` solves a scalar logistic-type ODE whose
  solution is known implicitly, and ``Q12`` is a one-dimensional integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BracketFailure,
    DomainError,
    FineBalanceExcluded,
    NotFineBalance,
    QuadratureFailure,
)
from .model import (
    FineBalanceDecomposition,
    MatingClass,
    ModelParams,
    PopulationFractions,
    Sym2x2Case,
    Sym2x2Params,
    check_dims,
    check_fine_balance,
    classify_2x2,
    sym2x2_from_pi,
    sym2x2_reduce,
)
from .quadrature import integrate_from_zero

QUAD_TOL = 1e-10
# |x1 - gamma| below this is the stationary special case A1(t) = x1.
STATIONARY_ATOL = 1e-12


# -- fine balance ---------------------------------------------------------------


@dataclass(frozen=True)
class FineBalanceSolution:
    decomposition: FineBalanceDecomposition
    fractions: PopulationFractions


def fine_balance_solution(params: ModelParams, fractions: PopulationFractions) -> FineBalanceSolution:
    check_dims(params, fractions)
    dec = check_fine_balance(params)
    if dec is None:
        raise NotFineBalance("pi does not decompose as alpha_bar_i + beta_bar_j")
    return FineBalanceSolution(dec, fractions)


def _decay(rate: np.ndarray, t: float) -> np.ndarray:
    """``exp(-rate * t)`` with ``exp(-0 * inf) = 1``."""
    rate = np.asarray(rate, dtype=float)
    if math.isinf(t):
        return np.where(rate > 0, 0.0, 1.0)
    return np.exp(-rate * t)


def _tilted(weights: np.ndarray, rates: np.ndarray, t: float) -> np.ndarray:
    support = weights > 0
    shift = rates[support].min()
    w = weights * _decay(np.where(support, rates - shift, 0.0), t)
    return w / w.sum()


def fine_balance_eval(sol: FineBalanceSolution, t: float):
    """``(A, B, Z, Q)`` at time ``t`` (``t = inf`` allowed)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    x, y = sol.fractions.x, sol.fractions.y
    ab, bb = sol.decomposition.alpha_bar, sol.decomposition.beta_bar
    pi = ab[:, None] + bb[None, :]
    A = _tilted(x, ab, t)
    B = _tilted(y, bb, t)
    decay = _decay(pi, t)
    Z = float((np.outer(x, y) * decay).sum())
    Q = np.outer(x, y) * (1.0 - decay) if math.isinf(t) else -np.outer(x, y) * np.expm1(-pi * t)
    return A, B, Z, Q


# -- symmetric 2x2 ---------------------------------------------------------------


@dataclass(frozen=True)
class Sym2x2Solution:
    """Symmetric 2x2 fluid solution.

    ``equilibrium`` is ``A1(inf)``; ``xi_inf`` is the limit of
    ``xi = (x1 - A1) / (A1 - gamma)`` (Generic case) or of
    ``zeta = (1 - x1) A1 / (x1 (1 - A1))`` (GammaOne; for GammaZero the
    zeta of the relabelled problem).  ``None`` when ``A1`` is stationary.
    """

    reduced: Sym2x2Params
    equilibrium: float
    xi_inf: float | None

    @property
    def case(self) -> Sym2x2Case:
        return self.reduced.case

    @property
    def x1(self) -> float:
        return self.reduced.x1

    @property
    def stationary(self) -> bool:
        r = self.reduced
        return r.case is Sym2x2Case.GENERIC and abs(r.x1 - r.gamma) <= STATIONARY_ATOL


def sym2x2_solution(params: ModelParams, fractions: PopulationFractions) -> Sym2x2Solution:
    return _from_reduced(sym2x2_reduce(params, fractions))


def _from_reduced(r: Sym2x2Params) -> Sym2x2Solution:
    if r.case is Sym2x2Case.FINE_BALANCE:
        return Sym2x2Solution(r, math.nan, None)
    a_inf, xi = _equilibrium(r)
    return Sym2x2Solution(r, a_inf, xi)


def _relabelled(r: Sym2x2Params) -> Sym2x2Params:
    """Swap the two types: a GammaZero problem becomes a GammaOne problem."""
    return sym2x2_from_pi(r.pi22, r.pi12, r.pi11, 1.0 - r.x1)


def _equilibrium(r: Sym2x2Params) -> tuple[float, float | None]:
    x1, g = r.x1, r.gamma
    if r.case is Sym2x2Case.GAMMA_ONE:
        return (1.0, math.inf) if r.pi22 > r.pi12 else (0.0, 0.0)
    if r.case is Sym2x2Case.GAMMA_ZERO:
        a_inf, zeta = _equilibrium(_relabelled(r))
        return 1.0 - a_inf, zeta
    if abs(x1 - g) <= STATIONARY_ATOL:
        return x1, None
    to_zero = (0.0, -x1 / g)
    to_one = (1.0, -(1.0 - x1) / (1.0 - g))
    above11, above22 = r.pi11 > r.pi12, r.pi22 > r.pi12
    if above11 and above22:
        return g, math.inf
    if not above11 and not above22:
        return to_zero if x1 < g else to_one
    if above11:
        return to_zero
    return to_one


def equilibrium_and_xi(sol: Sym2x2Solution) -> tuple[float, float | None]:
    if sol.case is Sym2x2Case.FINE_BALANCE:
        raise FineBalanceExcluded("use the fine-balance solution")
    return sol.equilibrium, sol.xi_inf


def _bisect(f, start: float, limit: float) -> float:
    """Root of ``f`` between ``start`` and ``limit`` to machine precision.

    ``f(start)`` fixes the sign on the near side; ``f`` is assumed to change
    sign before ``limit``.  If no sign change is found, ``limit`` is returned
    (the root is closer to it than one ulp).
    """
    f0 = f(start)
    if not math.isfinite(f0):
        raise BracketFailure(f"non-finite residual at the bracket start {start}")
    if f0 == 0:
        return start
    near, far = start, limit
    for _ in range(200):
        mid = 0.5 * (near + far)
        if mid == near or mid == far:
            break
        fm = f(mid)
        if math.isnan(fm):
            raise BracketFailure(f"residual undefined at {mid}")
        if fm == 0:
            return mid
        if (fm > 0) == (f0 > 0):
            near = mid
        else:
            far = mid
    return far if far != limit else near


def _generic_log_g(r: Sym2x2Params, a: float) -> float:
    """Log of the left side of the implicit relation; equals ``-pi12 t``."""
    x1, g = r.x1, r.gamma
    ratio = (a - g) / (x1 - g)
    return (r.theta1 * (math.log(ratio) + math.log(x1) - math.log(a))
            + r.theta2 * (math.log(ratio) + math.log1p(-x1) - math.log1p(-a)))


def _gamma_one_log_lhs(x1: float, a: float) -> float:
    """Log of the GammaOne implicit left side; equals ``(pi22 - pi12) t``."""
    return (math.log((1 - x1) * a / (x1 * (1 - a)))
            + 1.0 / (1.0 - a) - 1.0 / (1.0 - x1))


def a1_of_t(sol: Sym2x2Solution, t: float) -> float:
    if t < 0:
        raise DomainError("t must be nonnegative")
    r = sol.reduced
    if r.case is Sym2x2Case.FINE_BALANCE:
        raise FineBalanceExcluded("use the fine-balance solution")
    if t == 0 or sol.stationary:
        return r.x1
    if math.isinf(t):
        return sol.equilibrium
    if r.case is Sym2x2Case.GAMMA_ZERO:
        return 1.0 - a1_of_t(_from_reduced(_relabelled(r)), t)
    if r.case is Sym2x2Case.GAMMA_ONE:
        s = r.pi22 - r.pi12
        return _bisect(lambda a: _gamma_one_log_lhs(r.x1, a) - s * t, r.x1, sol.equilibrium)
    return _bisect(lambda a: _generic_log_g(r, a) + r.pi12 * t, r.x1, sol.equilibrium)


def implicit_residual(sol: Sym2x2Solution, a1: float, t: float) -> float:
    """Left side of the implicit relation at ``a1`` minus its right side."""
    r = sol.reduced
    if r.case is Sym2x2Case.FINE_BALANCE or sol.stationary:
        raise DomainError("no implicit relation: A1 is explicit in this case")
    if r.case is Sym2x2Case.GAMMA_ZERO:
        return implicit_residual(_from_reduced(_relabelled(r)), 1.0 - a1, t)
    if r.case is Sym2x2Case.GAMMA_ONE:
        return math.exp(_gamma_one_log_lhs(r.x1, a1)) - math.exp((r.pi22 - r.pi12) * t)
    return math.exp(_generic_log_g(r, a1)) - math.exp(-r.pi12 * t)


def z_of_a1(sol: Sym2x2Solution, a1: float) -> float:
    """Singles mass ``Z`` as a function of ``A1`` alone."""
    r = sol.reduced
    x1 = r.x1
    if r.case is Sym2x2Case.FINE_BALANCE:
        raise FineBalanceExcluded("use the fine-balance solution")
    if sol.stationary:
        raise DomainError("Z is not a function of A1 when A1 is stationary")
    if not 0 < a1 < 1:
        raise DomainError(f"A1 = {a1} outside (0, 1)")
    if r.case is Sym2x2Case.GAMMA_ZERO:
        return z_of_a1(_from_reduced(_relabelled(r)), 1.0 - a1)
    if r.case is Sym2x2Case.GAMMA_ONE:
        th = r.theta1
        if (a1 - x1) * (sol.equilibrium - x1) < 0:
            raise DomainError(f"A1 = {a1} is on the wrong side of x1 = {x1}")
        return math.exp(th * (math.log1p(-a1) - math.log1p(-x1))
                        - (th + 1) * (math.log(a1) - math.log(x1))
                        - th * (1.0 / (1.0 - a1) - 1.0 / (1.0 - x1)))
    ratio = (a1 - r.gamma) / (x1 - r.gamma)
    if ratio <= 0:
        raise DomainError(f"A1 = {a1} is on the wrong side of gamma = {r.gamma}")
    th1, th2 = r.theta1, r.theta2
    return math.exp(-(th1 + 1) * (math.log(a1) - math.log(x1))
                    - (th2 + 1) * (math.log1p(-a1) - math.log1p(-x1))
                    + (th1 + th2 + 1) * math.log(ratio))


def z_of_t(sol: Sym2x2Solution, t: float) -> float:
    r = sol.reduced
    if sol.stationary:
        return math.exp(-(r.pi12 * r.x1 + r.pi22 * (1 - r.x1)) * t)
    if math.isinf(t):
        return 0.0
    if t == 0:
        return 1.0
    if r.case is Sym2x2Case.GAMMA_ZERO:
        return z_of_t(_from_reduced(_relabelled(r)), t)
    return z_of_a1(sol, a1_of_t(sol, t))


def _generic_integrand(r: Sym2x2Params):
    g, x1 = r.gamma, r.x1
    e1, e2 = -(r.theta1 + 1), -(r.theta2 + 1)
    c1, c2 = g / x1, (1 - g) / (1 - x1)

    def integrand(y: float) -> float:
        b1, b2 = c1 * y, c2 * y
        if b1 <= -1 or b2 <= -1:
            return 0.0
        return math.exp(e1 * math.log1p(b1) + e2 * math.log1p(b2))

    return integrand


def _gamma_one_integrand(r: Sym2x2Params):
    x1, th = r.x1, r.theta1
    scale = x1 * th
    e = -(th + 1)

    def integrand(y: float) -> float:
        b = y / scale
        if b <= -1:
            return 0.0
        return math.exp(e * math.log1p(b) - y / (1 - x1))

    return integrand


def _stationary_q12(r: Sym2x2Params, t: float) -> float:
    x1 = r.x1
    rate = r.pi12 * x1 + r.pi22 * (1 - x1)
    limit = r.pi12 * x1 * (1 - x1) / rate
    return limit if math.isinf(t) else -limit * math.expm1(-rate * t)


def q12_of_t(sol: Sym2x2Solution, t: float) -> float:
    r = sol.reduced
    if r.case is Sym2x2Case.FINE_BALANCE:
        raise FineBalanceExcluded("use the fine-balance solution")
    if t < 0:
        raise DomainError("t must be nonnegative")
    if math.isinf(t):
        return q12_infinity(sol)
    if t == 0:
        return 0.0
    if sol.stationary:
        return _stationary_q12(r, t)
    if r.case is Sym2x2Case.GAMMA_ZERO:
        return q12_of_t(_from_reduced(_relabelled(r)), t)
    a1 = a1_of_t(sol, t)
    if r.case is Sym2x2Case.GAMMA_ONE:
        zeta = (1 - r.x1) * a1 / (r.x1 * (1 - a1))
        return integrate_from_zero(_gamma_one_integrand(r), r.x1 * r.theta1 * (zeta - 1), QUAD_TOL)
    if a1 == r.gamma:
        return q12_infinity(sol)
    xi = (r.x1 - a1) / (a1 - r.gamma)
    return r.pi12 / r.curvature * integrate_from_zero(_generic_integrand(r), xi, QUAD_TOL)


def q12_infinity(sol: Sym2x2Solution) -> float:
    """``Q12(inf)``: the off-diagonal entry of the limiting mating pattern."""
    r = sol.reduced
    if r.case is Sym2x2Case.FINE_BALANCE:
        raise FineBalanceExcluded("use the fine-balance solution")
    if sol.stationary:
        value = _stationary_q12(r, math.inf)
    elif r.case is Sym2x2Case.GAMMA_ZERO:
        value = q12_infinity(_from_reduced(_relabelled(r)))
    elif r.case is Sym2x2Case.GAMMA_ONE:
        upper = math.inf if r.theta1 > 0 else -r.x1 * r.theta1
        value = integrate_from_zero(_gamma_one_integrand(r), upper, QUAD_TOL)
    else:
        value = r.pi12 / r.curvature * integrate_from_zero(
            _generic_integrand(r), sol.xi_inf, QUAD_TOL)
    cap = min(r.x1, 1 - r.x1)
    if not (-1e-12 <= value <= cap + 1e-12):
        raise QuadratureFailure(f"Q12(inf) = {value} outside [0, {cap}]")
    return value


def pattern_from_q12(x1: float, q12: float) -> np.ndarray:
    """Full 2x2 pattern with margins ``(x1, 1 - x1)`` on both sexes."""
    q11 = x1 - q12
    q21 = x1 - q11
    q22 = (1 - x1) - q21
    return np.array([[q11, q12], [q21, q22]])


def sym2x2_report(params: ModelParams, fractions: PopulationFractions) -> dict:
    """Summary of the symmetric 2x2 solution as a JSON-ready dict."""
    sol = sym2x2_solution(params, fractions)
    r = sol.reduced
    x1 = r.x1
    if r.case is Sym2x2Case.FINE_BALANCE:
        A, _, _, _ = fine_balance_eval(fine_balance_solution(params, fractions), math.inf)
        a1_inf, q12 = float(A[0]), x1 * (1 - x1)
    else:
        a1_inf, q12 = sol.equilibrium, q12_infinity(sol)
    return {
        "case": r.case.value,
        "gamma": r.gamma,
        "theta1": r.theta1,
        "theta2": r.theta2,
        "a1_inf": a1_inf,
        "q12_inf": q12,
        "pattern": pattern_from_q12(x1, q12).tolist(),
        "class": classify_2x2(params).value,
    }


def level_curve_grid(pi12: float, x1: float, values: np.ndarray) -> np.ndarray:
    """``Q12(inf)`` over ``pi11 = values[i]``, ``pi22 = values[j]``.

    Grid points with a nonpositive rate lie outside the model and are NaN.
    """
    values = np.asarray(values, dtype=float)
    out = np.full((len(values), len(values)), np.nan)
    for i, p11 in enumerate(values):
        for j, p22 in enumerate(values):
            if p11 <= 0 or p22 <= 0:
                continue
            r = sym2x2_from_pi(p11, pi12, p22, x1)
            if r.case is Sym2x2Case.FINE_BALANCE:
                out[i, j] = x1 * (1 - x1)
            else:
                out[i, j] = q12_infinity(_from_reduced(r))
    return out


def mating_class_of(q12: float, x1: float) -> MatingClass:
    """Class read off a computed pattern (for cross-checks)."""
    gap = x1 * (1 - x1) - q12
    if gap > 0:
        return MatingClass.HOMOGAMOUS
    if gap < 0:
        return MatingClass.HETEROGAMOUS
    return MatingClass.PANMICTIC
