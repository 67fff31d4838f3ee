"""Fluid (infinite-population) limit of the pair-type process.

The rescaled pair masses ``Q(t)`` solve ``Q' = F(Q)`` with

    F_ij(M) = pi_ij (x_i - M_i.) (y_j - M_.j) / (1 - M_tot)

and ``Q(0) = 0``.  Because every ``Q_ij`` is nondecreasing and the masses
still to be formed sum to ``Z(t) = 1 - Q_tot(t)``, stopping at ``Z <= eps``
certifies ``|Q(inf) - Q(t)| <= eps`` entrywise.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundViolation, SingularState, ToleranceNotMet, ValidationError
from .model import ModelParams, PopulationFractions, check_dims, check_pair_matrix
from .ode import OdeSolution, dopri5

LOCAL_TOL_FRACTION = 0.05


def drift_F(params: ModelParams, fractions: PopulationFractions, M, *, check: bool = True) -> np.ndarray:
    x, y = fractions.x, fractions.y
    if check:
        check_dims(params, fractions)
        M = check_pair_matrix(M, x, y, atol=1e-12)
    else:
        M = np.asarray(M, dtype=float)
    z = 1.0 - M.sum()
    if z <= 0:
        return np.zeros_like(params.pi)
    X = np.maximum(x - M.sum(axis=1), 0.0)
    Y = np.maximum(y - M.sum(axis=0), 0.0)
    return params.pi * np.outer(X, Y) / z


def jacobian_F(params: ModelParams, fractions: PopulationFractions, M) -> np.ndarray:
    """``J[i, j, i2, j2] = dF_ij / dM_{i2 j2}``.

    Closed form: ``pi_ij (a_i b_j - a_i [j == j2] - b_j [i == i2])`` with
    ``a = X / Z`` and ``b = Y / Z``.
    """
    check_dims(params, fractions)
    x, y = fractions.x, fractions.y
    M = check_pair_matrix(M, x, y, atol=1e-12)
    z = 1.0 - M.sum()
    if z <= 0:
        raise SingularState("Jacobian undefined at M_tot = 1")
    a = (x - M.sum(axis=1)) / z
    b = (y - M.sum(axis=0)) / z
    k = params.k
    eye = np.eye(k)
    J = (np.outer(a, b)[:, :, None, None]
         - a[:, None, None, None] * eye[None, :, None, :]
         - b[None, :, None, None] * eye[:, None, :, None])
    return params.pi[:, :, None, None] * J


@dataclass
class FluidSolution:
    """Numerical fluid solution on ``[0, t_end]``.

    ``q_infinity`` is the final state and ``error_bound = Z(t_end)`` bounds its
    distance to ``Q(inf)`` entrywise (integration error aside).
    """

    times: np.ndarray
    q: np.ndarray            # shape (len(times), k, k)
    dq: np.ndarray
    q_infinity: np.ndarray
    error_bound: float
    rtol: float

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, t) -> np.ndarray:
        """Dense output (cubic Hermite between accepted steps)."""
        k = self.q.shape[1]
        sol = OdeSolution(self.times, self.q.reshape(len(self.times), -1),
                          self.dq.reshape(len(self.times), -1))
        out = sol(t)
        return out.reshape(np.shape(t) + (k, k))

    def to_csv(self) -> str:
        k = self.q.shape[1]
        header = ["t"] + [f"Q{i + 1}{j + 1}" for i in range(k) for j in range(k)]
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for t, q in zip(self.times, self.q):
            buf.write(",".join([repr(float(t))] + [repr(float(v)) for v in q.ravel()]) + "\n")
        return buf.getvalue()


def _check_rtol(rtol: float) -> None:
    if not (1e-12 <= rtol <= 1e-3):
        raise ValidationError(f"rtol must lie in [1e-12, 1e-3], got {rtol}")


def _solve(params, fractions, t_end, rtol, stop=None) -> FluidSolution:
    check_dims(params, fractions)
    k = params.k
    pi = params.pi
    x, y = fractions.x, fractions.y

    def rhs(t, q):
        M = q.reshape(k, k)
        z = 1.0 - q.sum()
        if z <= 0:
            return np.zeros_like(q)
        X = np.maximum(x - M.sum(axis=1), 0.0)
        Y = np.maximum(y - M.sum(axis=0), 0.0)
        return (pi * np.outer(X, Y) / z).ravel()

    # Local errors add up over long runs; stepping at a fraction of rtol keeps
    # the global error inside the 10 * rtol slack of the mass bounds.
    step_tol = rtol * LOCAL_TOL_FRACTION
    sol = dopri5(rhs, np.zeros(k * k), t_end, rtol=step_tol, atol=step_tol, stop=stop)
    q = sol.y.reshape(-1, k, k)
    _assert_total_mass_bounds(sol.t, q.sum(axis=(1, 2)), pi.min(), pi.max(), rtol)
    final = q[-1].copy()
    return FluidSolution(sol.t, q, sol.dydt.reshape(-1, k, k), final,
                         float(max(1.0 - final.sum(), 0.0)), rtol)


def _assert_total_mass_bounds(t, qtot, c1, c2, rtol) -> None:
    slack = 10 * rtol
    lower = -np.expm1(-c1 * t) - slack
    upper = -np.expm1(-c2 * t) + slack
    bad = (qtot < lower) | (qtot > upper)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise BoundViolation(
            f"Q_tot({t[i]}) = {qtot[i]} outside [{lower[i]}, {upper[i]}]")


def integrate_fluid(params: ModelParams, fractions: PopulationFractions, t_end: float,
                    rtol: float = 1e-10) -> FluidSolution:
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    _check_rtol(rtol)
    return _solve(params, fractions, float(t_end), rtol)


def mating_pattern_limit(params: ModelParams, fractions: PopulationFractions,
                         eps: float = 1e-8, rtol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Infinite-population mating pattern ``Q(inf)`` and a certified bound.

    Integrates until the singles mass ``Z`` drops to ``eps``.  The lower bound
    ``Q_tot(t) >= 1 - exp(-min(pi) t)`` guarantees this happens by
    ``log(1/eps) / min(pi)``.
    """
    if not (0 < eps <= 1e-3):
        raise ValidationError(f"eps must lie in (0, 1e-3], got {eps}")
    _check_rtol(rtol)
    t_max = math.log(1.0 / eps) / params.pi.min()
    sol = _solve(params, fractions, t_max * 1.5 + 1.0, rtol,
                 stop=lambda t, q: 1.0 - q.sum() <= eps)
    if sol.error_bound > eps:
        raise ToleranceNotMet(f"singles mass {sol.error_bound} still above eps={eps}")
    return sol.q_infinity, sol.error_bound
