"""Singles coordinates: Lotka-Volterra and replicator forms of the fluid limit.

With single masses ``X_i = x_i - Q_i.``, ``Y_j = y_j - Q_.j``, ``Z = 1 - Q_tot``
and frequencies ``A = X / Z``, ``B = Y / Z`` the fluid ODE splits into

    A' = -A * (Pi B - A.Pi.B)          (replicator, on the simplex)
    B' = -B * (Pi^T A - A.Pi.B)
    Z' = -Z * A.Pi.B
    Q' = Pi * Z * outer(A, B)

Integrating in these coordinates factors the exponential decay out into ``Z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Absorbed, InvalidSimplexPoint, SingularZ, ValidationError
from .model import ModelParams, PopulationFractions, check_dims, check_pair_matrix
from .ode import OdeSolution, dopri5

SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True)
class SinglesState:
    X: np.ndarray
    Y: np.ndarray
    Z: float
    A: np.ndarray
    B: np.ndarray


def to_singles(fractions: PopulationFractions, Q) -> SinglesState:
    x, y = fractions.x, fractions.y
    Q = check_pair_matrix(Q, x, y, atol=1e-12)
    if Q.sum() >= 1 - 1e-14:
        raise Absorbed("no singles left")
    X = x - Q.sum(axis=1)
    Y = y - Q.sum(axis=0)
    Z = 1.0 - Q.sum()
    return SinglesState(X, Y, Z, X / Z, Y / Z)


def lv_vector_field(params: ModelParams, state: SinglesState) -> tuple[np.ndarray, np.ndarray]:
    """``(X', Y')`` of the time-changed Lotka-Volterra system."""
    if not state.Z > 0:
        raise SingularZ("Z must be positive")
    pi = params.pi
    dX = -state.X * (pi @ state.Y) / state.Z
    dY = -state.Y * (pi.T @ state.X) / state.Z
    return dX, dY


def pi_hat(params: ModelParams) -> np.ndarray:
    k = params.k
    out = np.zeros((2 * k, 2 * k))
    out[:k, k:] = params.pi
    out[k:, :k] = params.pi.T
    return out


def _check_simplex(c, total: float = 1.0) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if np.any(c < -SIMPLEX_ATOL) or abs(c.sum() - total) > SIMPLEX_ATOL:
        raise InvalidSimplexPoint(f"not a simplex point: sum={c.sum()}, min={c.min()}")
    return c


def replicator_vector_field(params: ModelParams, C) -> np.ndarray:
    """``C' = -2 C (Pi_hat C - C.Pi_hat.C)`` for ``C = (A, B) / 2``."""
    C = _check_simplex(C)
    if C.shape != (2 * params.k,):
        raise InvalidSimplexPoint(f"C must have length {2 * params.k}")
    H = pi_hat(params)
    HC = H @ C
    return -2.0 * C * (HC - C @ HC)


def z_vector_field(params: ModelParams, A, B, Z: float) -> float:
    A, B = _check_simplex(A), _check_simplex(B)
    if not Z > 0:
        raise SingularZ("Z must be positive")
    return float(-Z * (A @ params.pi @ B))


def reconstruct_q_rate(params: ModelParams, A, B, Z: float) -> np.ndarray:
    A, B = _check_simplex(A), _check_simplex(B)
    if not 0 < Z <= 1:
        raise SingularZ("Z must lie in (0, 1]")
    return params.pi * Z * np.outer(A, B)


def sym_a1_field(pi11: float, pi12: float, pi22: float, a1: float) -> float:
    """Scalar replicator field of the symmetric 2x2 reduction."""
    return -a1 * (1 - a1) * ((pi11 + pi22 - 2 * pi12) * a1 - (pi22 - pi12))


@dataclass
class ReplicatorSolution:
    times: np.ndarray
    A: np.ndarray            # (m, k)
    B: np.ndarray            # (m, k)
    Z: np.ndarray            # (m,)
    Q: np.ndarray            # (m, k, k)
    _sol: OdeSolution

    def q(self, t) -> np.ndarray:
        k = self.A.shape[1]
        return self._sol(t)[..., 2 * k + 1:].reshape(np.shape(t) + (k, k))


def integrate_replicator(params: ModelParams, fractions: PopulationFractions, t_end: float,
                         rtol: float = 1e-10) -> ReplicatorSolution:
    """Solve the fluid limit through ``(A, B, Z, Q)``.

    ``A`` and ``B`` are renormalised onto the simplex after every accepted step.
    """
    check_dims(params, fractions)
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    k = params.k
    pi = params.pi

    def rhs(t, s):
        A, B, Z = s[:k], s[k:2 * k], s[2 * k]
        PB = pi @ B
        PtA = pi.T @ A
        mean = A @ PB
        dA = -A * (PB - mean)
        dB = -B * (PtA - mean)
        dZ = -Z * mean
        dQ = (pi * Z * np.outer(A, B)).ravel()
        return np.concatenate([dA, dB, [dZ], dQ])

    def project(s):
        s = s.copy()
        s[:k] = np.maximum(s[:k], 0.0)
        s[k:2 * k] = np.maximum(s[k:2 * k], 0.0)
        s[:k] /= s[:k].sum()
        s[k:2 * k] /= s[k:2 * k].sum()
        return s

    s0 = np.concatenate([fractions.x, fractions.y, [1.0], np.zeros(k * k)])
    sol = dopri5(rhs, s0, float(t_end), rtol=rtol, atol=rtol, project=project)
    y = sol.y
    return ReplicatorSolution(sol.t, y[:, :k], y[:, k:2 * k], y[:, 2 * k],
                              y[:, 2 * k + 1:].reshape(-1, k, k), sol)
