"""Gaussian fluctuations around the fluid limit.

* ``simulate_clt_limit``: the linear SDE ``dV = J(Q(t)) V dt + dW(Q(t))``
  whose law is the limit of ``sqrt(n) (Q^(n) / n - Q)``.  The time-changed
  Brownian motions enter through increments of variance ``Q(t+dt) - Q(t)``.
* ``simulate_diffusion``: the diffusion with drift ``F`` and noise variance
  ``F / n`` per entry, kept inside the state space by clamping.
* ``coupled_jump_diffusion``: a jump path and a diffusion path on one
  probability space (see ``coupling``), for pathwise comparison.
* ``empirical_fluctuations``: covariance of the rescaled jump process against
  the covariance of ``V``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coupling import DyadicCoupling
from .ctmc import _states_at, simulate_ensemble, time_change_run
from .errors import MissingFluidSolution, ValidationError
from .fluid import FluidSolution, integrate_fluid, jacobian_F
from .model import ModelParams, PopulationFractions, check_dims, round_population
from .rng import GAUSSIAN, stream

MAX_DT = 1e-2


@dataclass
class FluctuationPath:
    """Samples of ``V`` on ``times``; ``v`` has shape ``(replicates, len(times), k, k)``."""

    times: np.ndarray
    v: np.ndarray


@dataclass
class DiffusionPath:
    """Samples of the diffusion; ``z`` has shape ``(replicates, len(times), k, k)``."""

    times: np.ndarray
    z: np.ndarray


def _grid(t_end: float, dt: float) -> np.ndarray:
    if not t_end > 0:
        raise ValidationError("t_end must be positive")
    if not 0 < dt <= MAX_DT:
        raise ValidationError(f"dt must lie in (0, {MAX_DT}]")
    steps = max(1, math.ceil(t_end / dt - 1e-9))
    return np.linspace(0.0, t_end, steps + 1)


def _record_index(times: np.ndarray, record_times) -> np.ndarray:
    if record_times is None:
        return np.arange(len(times))
    rt = np.atleast_1d(np.asarray(record_times, dtype=float))
    if np.any(rt < 0) or np.any(rt > times[-1] + 1e-12):
        raise ValidationError("record times outside the grid")
    return np.abs(times[None, :] - rt[:, None]).argmin(axis=1)


def simulate_clt_limit(params: ModelParams, fractions: PopulationFractions, t_end: float,
                       dt: float = 1e-3, seed: int = 0, *, replicates: int = 1,
                       noise_scale: float = 1.0, fluid: FluidSolution | None = None,
                       record_times=None) -> FluctuationPath:
    """Euler-Maruyama for ``V`` on a uniform grid.

    ``fluid`` defaults to a fresh ``integrate_fluid`` solve; a supplied
    solution must cover ``[0, t_end]``.  ``noise_scale`` multiplies every
    Gaussian increment, so ``V`` is linear in it.
    """
    check_dims(params, fractions)
    times = _grid(t_end, dt)
    if fluid is None:
        fluid = integrate_fluid(params, fractions, t_end)
    elif fluid.t_end < t_end - 1e-12:
        raise MissingFluidSolution(f"fluid solution ends at {fluid.t_end} < {t_end}")
    if replicates < 1:
        raise ValidationError("replicates must be positive")
    k = params.k
    K = k * k
    q = fluid(times)
    dq = np.maximum(np.diff(q, axis=0), 0.0).reshape(-1, K)
    mid = 0.5 * (q[1:] + q[:-1])
    rec = _record_index(times, record_times)
    out = np.zeros((replicates, len(rec), k, k))
    rng = stream(seed, GAUSSIAN)
    V = np.zeros((replicates, K))
    slot = {int(i): s for s, i in enumerate(rec)}
    for s in np.nonzero(rec == 0)[0]:
        out[:, s] = 0.0
    for m in range(len(times) - 1):
        h = times[m + 1] - times[m]
        J = jacobian_F(params, fractions, mid[m]).reshape(K, K)
        noise = rng.standard_normal((replicates, K)) * np.sqrt(dq[m])
        V = V + h * V @ J.T + noise_scale * noise
        if m + 1 in slot:
            for s in np.nonzero(rec == m + 1)[0]:
                out[:, s] = V.reshape(replicates, k, k)
    return FluctuationPath(times[rec], out)


def _project(Z: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Clamp a batch ``(R, k, k)`` into the state space: negatives to zero,
    then overfull rows and columns scaled back onto their margin."""
    Z = np.maximum(Z, 0.0)
    rows = Z.sum(axis=2)
    scale = np.where(rows > x, x / np.where(rows > 0, rows, 1.0), 1.0)
    Z = Z * scale[:, :, None]
    cols = Z.sum(axis=1)
    scale = np.where(cols > y, y / np.where(cols > 0, cols, 1.0), 1.0)
    return Z * scale[:, None, :]


def _drift(pi, x, y, Z) -> np.ndarray:
    zt = 1.0 - Z.sum(axis=(1, 2))
    X = np.maximum(x - Z.sum(axis=2), 0.0)
    Y = np.maximum(y - Z.sum(axis=1), 0.0)
    safe = np.where(zt > 0, zt, 1.0)
    return np.where((zt > 0)[:, None, None], pi * X[:, :, None] * Y[:, None, :] / safe[:, None, None], 0.0)


def brownian_increments(seed: int, replicates: int, steps: int, k: int, dt: float) -> np.ndarray:
    """Increments of ``k*k`` independent Brownian motions, shape ``(R, steps, k, k)``."""
    return stream(seed, GAUSSIAN).standard_normal((replicates, steps, k, k)) * math.sqrt(dt)


def coarsen(dW: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments (same Brownian path, coarser grid)."""
    R, steps = dW.shape[:2]
    if steps % factor:
        raise ValidationError("factor must divide the number of steps")
    return dW.reshape(R, steps // factor, factor, *dW.shape[2:]).sum(axis=2)


def simulate_diffusion(params: ModelParams, fractions: PopulationFractions, n: int, t_end: float,
                       dt: float = 1e-3, seed: int = 0, *, replicates: int = 1,
                       noise_scale: float = 1.0, dW: np.ndarray | None = None) -> DiffusionPath:
    """Diffusion approximation of ``Q^(n) / n`` started at zero.

    Each step adds the classical Runge-Kutta drift increment of ``F`` and a
    noise increment ``sqrt(F(Z) / n) dW``, then projects back into the state
    space.  With ``noise_scale = 0`` the path is an RK4 solution of the fluid
    equation.  Brownian increments may be supplied as ``dW`` with shape
    ``(replicates, steps, k, k)`` to compare step sizes on a common path.
    """
    check_dims(params, fractions)
    if n < 10:
        raise ValidationError("n must be at least 10")
    times = _grid(t_end, dt)
    steps = len(times) - 1
    k = params.k
    if dW is None:
        dW = brownian_increments(seed, replicates, steps, k, times[1] - times[0])
    elif dW.shape != (replicates, steps, k, k):
        raise ValidationError(f"dW must have shape {(replicates, steps, k, k)}")
    pi, x, y = params.pi, fractions.x, fractions.y
    Z = np.zeros((replicates, k, k))
    out = np.zeros((replicates, steps + 1, k, k))
    for m in range(steps):
        h = times[m + 1] - times[m]
        f1 = _drift(pi, x, y, Z)
        f2 = _drift(pi, x, y, Z + 0.5 * h * f1)
        f3 = _drift(pi, x, y, Z + 0.5 * h * f2)
        f4 = _drift(pi, x, y, Z + h * f3)
        noise = np.sqrt(f1 / n) * dW[:, m]
        Z = _project(Z + h / 6 * (f1 + 2 * f2 + 2 * f3 + f4) + noise_scale * noise, x, y)
        out[:, m + 1] = Z
    return DiffusionPath(times, out)


# -- pathwise coupling of the jump process and the diffusion --------------------------------


@dataclass
class CoupledPaths:
    n: int
    times: np.ndarray
    jump: np.ndarray          # Q^(n)(t) / n on the grid
    diffusion: np.ndarray     # Z^(n)(t) on the grid

    @property
    def sup_distance(self) -> float:
        return float(np.abs(self.jump - self.diffusion).max())


def coupled_jump_diffusion(params: ModelParams, fractions: PopulationFractions, n: int,
                           t_end: float = 1.0, dt: float = 1e-3, seed: int = 0) -> CoupledPaths:
    """Jump path and diffusion path driven by coupled ``(J_ij, W_ij)``.

    The jump path is ``Q_ij(t) = J_ij(int_0^t rho_ij ds)``.  The diffusion is
    advanced in the matching time-changed form

        Z_ij += F_ij dt + (W_ij(tau_ij + n F_ij dt) - W_ij(tau_ij)) / n,
        tau_ij += n F_ij dt,

    so both processes read the same noise at (nearly) the same internal
    times.  The noise increment has variance ``F_ij dt / n``.
    """
    check_dims(params, fractions)
    if n < 10:
        raise ValidationError("n must be at least 10")
    times = _grid(t_end, dt)
    pop = round_population(fractions, n)
    k = params.k
    K = k * k
    horizon = 1.25 * n + 20 * math.sqrt(n) + 64
    noise = DyadicCoupling(seed, K, horizon)
    ev_t, ev_c, _ = time_change_run(params.pi, pop, noise, t_max=t_end)
    jump = _states_at(ev_t, ev_c, k, times) / n

    pi, x, y = params.pi, pop.x / n, pop.y / n
    Z = np.zeros((1, k, k))
    tau = np.zeros(K)
    diff = np.zeros((len(times), k, k))
    for m in range(len(times) - 1):
        h = times[m + 1] - times[m]
        F = _drift(pi, x, y, Z)[0].ravel()
        new_tau = tau + n * F * h
        dw = np.array([noise.brownian(c, new_tau[c]) - noise.brownian(c, tau[c]) for c in range(K)])
        Z = _project(Z + (F * h + dw / n).reshape(1, k, k), x, y)
        tau = new_tau
        diff[m + 1] = Z[0]
    return CoupledPaths(n, times, jump, diff)


# -- empirical study ------------------------------------------------------------------------------


@dataclass
class FluctuationReport:
    n: int
    t: float
    replicates: int
    cov_empirical: np.ndarray
    cov_limit: np.ndarray
    rel_diff: np.ndarray
    mean_empirical: np.ndarray
    mean_se: np.ndarray

    def to_json(self) -> dict:
        def clean(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in np.atleast_2d(a)]

        return {
            "n": self.n,
            "t": self.t,
            "replicates": self.replicates,
            "cov_empirical": clean(self.cov_empirical),
            "cov_limit": clean(self.cov_limit),
            "rel_diff": clean(self.rel_diff),
            "mean_empirical": clean(self.mean_empirical.reshape(1, -1))[0],
            "mean_se": clean(self.mean_se.reshape(1, -1))[0],
        }


def empirical_fluctuations(params: ModelParams, fractions: PopulationFractions, n: int,
                           t_probe: float, replicates: int, seed: int, *,
                           limit_replicates: int | None = None, dt: float = 1e-3,
                           workers: int = 1) -> FluctuationReport:
    """Covariance of ``sqrt(n) (Q^(n)(t) / n - Q(t))`` against that of ``V(t)``.

    Entries are ordered row-major over pair types.  ``rel_diff`` is
    ``|cov_empirical - cov_limit| / |cov_limit|`` (NaN where the limit is 0).
    """
    check_dims(params, fractions)
    if not t_probe > 0:
        raise ValidationError("t_probe must be positive")
    if replicates < 1000:
        raise ValidationError("need at least 1000 replicates")
    k = params.k
    K = k * k
    pop = round_population(fractions, n)
    # centre on the fluid path of the rounded population
    frac_n = pop.fractions
    fluid = integrate_fluid(params, frac_n, t_probe)
    q = fluid(np.array([t_probe]))[0].ravel()
    ens = simulate_ensemble(params, pop, replicates, seed, [t_probe], workers=workers,
                            stop_after_snapshots=True)
    samples = math.sqrt(n) * (ens.snapshots[:, 0].reshape(replicates, K) / n - q)
    cov_emp = np.atleast_2d(np.cov(samples, rowvar=False))
    lim = simulate_clt_limit(params, frac_n, t_probe, dt, seed, replicates=limit_replicates or replicates,
                             fluid=fluid, record_times=[t_probe])
    cov_lim = np.atleast_2d(np.cov(lim.v[:, -1].reshape(-1, K), rowvar=False))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(cov_lim != 0, np.abs(cov_emp - cov_lim) / np.abs(cov_lim), np.nan)
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(replicates)
    return FluctuationReport(n, float(t_probe), replicates, cov_emp, cov_lim, rel, mean, se)
