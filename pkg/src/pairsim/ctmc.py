"""Finite-population pair-type process.

State: an integer ``k x k`` matrix ``M`` of pairs formed so far.  From ``M`` a
pair of type ``(i, j)`` forms at rate

    rho_ij(M) = pi_ij (x_i - M_i.) (y_j - M_.j) / (n - M_tot)

and the chain absorbs once all ``n`` pairs exist.  Three samplers live here:

* ``simulate``: direct method, one trajectory per call;
* ``simulate_ensemble``: the same chain for many replicates at once;
* ``simulate_coupled``: the random time-change construction
  ``Q_ij(t) = J_ij(int_0^t rho_ij ds)`` driven by shared unit-rate Poisson
  paths, so trajectories for different ``n`` live on one probability space.

``exact_pattern_oracle`` computes the expected terminal pattern exactly.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import InvalidState, StateSpaceTooLarge, ValidationError
from .model import (
    ModelParams,
    PopulationCounts,
    PopulationFractions,
    check_dims,
    check_pair_matrix,
    round_population,
)
from .rng import ENSEMBLE_CHUNK, POISSON_PATH, REPLICATE, stream

MAX_FULL_PATH_EVENTS = 10**7
MAX_ORACLE_STATES = 10**6
ENSEMBLE_CHUNK_SIZE = 2048


def transition_rates(params: ModelParams, pop: PopulationCounts, M) -> np.ndarray:
    check_dims(params, pop)
    M = check_pair_matrix(M, pop.x, pop.y, integer=True)
    return _rates(params.pi, pop.x, pop.y, pop.n, M)


def _rates(pi, x, y, n, M) -> np.ndarray:
    singles = n - M.sum()
    if singles <= 0:
        return np.zeros_like(pi)
    return pi * np.outer(x - M.sum(axis=1), y - M.sum(axis=0)) / singles


# -- configuration and trajectories ---------------------------------------------


class RecordMode(str, enum.Enum):
    FULL_PATH = "full"
    PATTERN_ONLY = "pattern"
    SNAPSHOTS = "snapshots"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    t_max: float = math.inf
    record_mode: RecordMode = RecordMode.FULL_PATH
    snapshot_times: tuple = ()

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if not self.t_max > 0:
            raise ValidationError("t_max must be positive")
        mode = RecordMode(self.record_mode)
        object.__setattr__(self, "record_mode", mode)
        times = tuple(float(s) for s in self.snapshot_times)
        if mode is RecordMode.SNAPSHOTS and not times:
            raise ValidationError("snapshot mode needs snapshot_times")
        if any(s < 0 for s in times) or any(b < a for a, b in zip(times, times[1:])):
            raise ValidationError("snapshot times must be nonnegative and sorted")
        object.__setattr__(self, "snapshot_times", times)


@dataclass
class SimTrajectory:
    """One sampled path.

    ``times`` and ``types`` (flat index ``i * k + j``) list the events in
    order; they are empty in pattern-only mode.  ``t_absorb`` is ``None`` when
    the horizon was reached first, in which case ``pattern`` is the state at
    ``t_max``.
    """

    n: int
    k: int
    pattern: np.ndarray
    t_absorb: float | None
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    types: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray | None = None

    @property
    def events(self) -> list[tuple[float, int, int]]:
        return [(float(t), int(c) // self.k, int(c) % self.k) for t, c in zip(self.times, self.types)]

    def states(self) -> np.ndarray:
        """Pair matrix right after each event, shape ``(len(times), k, k)``."""
        onehot = np.zeros((len(self.types), self.k * self.k), dtype=np.int64)
        onehot[np.arange(len(self.types)), self.types] = 1
        return np.cumsum(onehot, axis=0).reshape(-1, self.k, self.k)

    def state_at(self, t) -> np.ndarray:
        return _states_at(self.times, self.types, self.k, np.atleast_1d(np.asarray(t, dtype=float)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,i,j\n")
        for t, i, j in self.events:
            buf.write(f"{t!r},{i + 1},{j + 1}\n")
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "events": [[t, i + 1, j + 1] for t, i, j in self.events],
            "pattern": self.pattern.astype(int).tolist(),
            "t_absorb": self.t_absorb,
        }


def _states_at(times, types, k, query) -> np.ndarray:
    """State (events with time <= s) at each sorted query time ``s``."""
    out = np.zeros((len(query), k, k), dtype=np.int64)
    cuts = np.searchsorted(times, query, side="right")
    acc = np.zeros(k * k, dtype=np.int64)
    prev = 0
    for s, cut in enumerate(cuts):
        acc += np.bincount(types[prev:cut], minlength=k * k)
        prev = cut
        out[s] = acc.reshape(k, k)
    return out


def _finish(pop, config, times, types, t_absorb) -> SimTrajectory:
    k = pop.k
    pattern = np.bincount(types, minlength=k * k).reshape(k, k).astype(np.int64)
    mode = config.record_mode
    if mode is RecordMode.FULL_PATH and len(types) > MAX_FULL_PATH_EVENTS:
        mode = RecordMode.SNAPSHOTS
    snaps_t = np.asarray(config.snapshot_times, dtype=float)
    snaps = _states_at(times, types, k, snaps_t) if len(snaps_t) else None
    if mode is not RecordMode.FULL_PATH:
        times, types = np.empty(0), np.empty(0, dtype=np.int64)
    return SimTrajectory(pop.n, k, pattern, t_absorb, times, types, snaps_t, snaps)


# -- direct method ----------------------------------------------------------------------


def simulate(params: ModelParams, pop: PopulationCounts, config: SimConfig,
             replicate: int = 0) -> SimTrajectory:
    """Exact sample path: exponential holding times, categorical jumps.

    Replicate ``r`` draws from the stream ``(seed, REPLICATE, r)``.
    """
    check_dims(params, pop)
    rng = stream(config.seed, REPLICATE, replicate)
    k, n = pop.k, pop.n
    pi = params.pi
    X = pop.x.astype(float).copy()
    Y = pop.y.astype(float).copy()
    expo = rng.standard_exponential(n)
    unif = rng.random(n)
    times = np.empty(n)
    types = np.empty(n, dtype=np.int64)
    t = 0.0
    t_absorb = None
    m = 0
    for m in range(n):
        rates = (pi * np.outer(X, Y)).ravel() / (n - m)
        cum = np.cumsum(rates)
        total = cum[-1]
        t += expo[m] / total
        if t > config.t_max:
            break
        c = int(np.argmax(cum > unif[m] * total))
        times[m] = t
        types[m] = c
        X[c // k] -= 1
        Y[c % k] -= 1
    else:
        m = n
        t_absorb = t if n > 0 else 0.0
    return _finish(pop, config, times[:m], types[:m], t_absorb)


# -- vectorised ensemble ------------------------------------------------------------------


@dataclass
class Ensemble:
    patterns: np.ndarray           # (R, k, k)
    t_absorb: np.ndarray           # (R,)
    snapshot_times: np.ndarray
    snapshots: np.ndarray | None   # (R, S, k, k)
    complete: bool = True          # False: stopped after the last snapshot

    @property
    def replicates(self) -> int:
        return len(self.t_absorb)


def simulate_ensemble(params: ModelParams, pop: PopulationCounts, replicates: int, seed: int,
                      snapshot_times: Sequence[float] = (), workers: int = 1,
                      stop_after_snapshots: bool = False) -> Ensemble:
    """Run ``replicates`` independent chains to absorption in lockstep.

    Every chain absorbs after exactly ``n`` events, so all replicates advance
    one event per step.  Replicates are grouped in fixed-size chunks; chunk
    ``c`` uses the stream ``(seed, ENSEMBLE_CHUNK, c)``, so results do not
    depend on ``workers``.

    With ``stop_after_snapshots`` the chains are abandoned once every
    replicate has passed the last snapshot time; ``patterns`` then holds the
    state at that moment and ``t_absorb`` is NaN.
    """
    check_dims(params, pop)
    if replicates < 1:
        raise ValidationError("replicates must be positive")
    snaps = np.asarray(snapshot_times, dtype=float)
    if np.any(np.diff(snaps) < 0) or np.any(snaps < 0):
        raise ValidationError("snapshot times must be nonnegative and sorted")
    sizes = [min(ENSEMBLE_CHUNK_SIZE, replicates - s) for s in range(0, replicates, ENSEMBLE_CHUNK_SIZE)]
    early = bool(stop_after_snapshots and len(snaps))
    jobs = [(params.pi, pop, size, stream(seed, ENSEMBLE_CHUNK, c), snaps, early)
            for c, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _ensemble_chunk(*a), jobs))
    else:
        parts = [_ensemble_chunk(*a) for a in jobs]
    return Ensemble(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        snaps,
        np.concatenate([p[2] for p in parts]) if len(snaps) else None,
        complete=not early,
    )


def _ensemble_chunk(pi, pop, R, rng, snaps, early=False):
    k, n = pop.k, pop.n
    K = k * k
    X = np.tile(pop.x.astype(float), (R, 1))
    Y = np.tile(pop.y.astype(float), (R, 1))
    counts = np.zeros((R, K), dtype=np.int64)
    t = np.zeros(R)
    S = len(snaps)
    out = np.zeros((R, S, k, k), dtype=np.int64)
    filled = np.zeros(R, dtype=np.int64)   # snapshots already written per replicate
    rows = np.arange(R)
    pif = pi.ravel()
    for m in range(n):
        rates = pif * (X[:, :, None] * Y[:, None, :]).reshape(R, K) / (n - m)
        cum = np.cumsum(rates, axis=1)
        total = cum[:, -1]
        t_new = t + rng.standard_exponential(R) / total
        u = rng.random(R) * total
        c = np.argmax(cum > u[:, None], axis=1)
        if S:
            _fill_snapshots(out, filled, counts, t_new, snaps, k)
            if early and filled.min() == S:
                return counts.reshape(R, k, k), np.full(R, np.nan), out
        t = t_new
        counts[rows, c] += 1
        X[rows, c // k] -= 1
        Y[rows, c % k] -= 1
    if S:
        # states after absorption
        for r in np.nonzero(filled < S)[0]:
            out[r, filled[r]:] = counts[r].reshape(k, k)
    return counts.reshape(R, k, k), t, out


def _fill_snapshots(out, filled, counts, t_new, snaps, k):
    reach = np.searchsorted(snaps, t_new, side="left")   # snapshots strictly before t_new
    for r in np.nonzero(reach > filled)[0]:
        out[r, filled[r]:reach[r]] = counts[r].reshape(k, k)
        filled[r] = reach[r]


# -- coupled construction ---------------------------------------------------------------------


class ArrivalSource(Protocol):
    def arrival(self, channel: int, m: int) -> float:
        """Time of the ``m``-th (0-based) arrival of unit-rate path ``channel``."""


class PoissonPathStore:
    """Unit-rate Poisson paths ``J_ij``, generated lazily and memoized.

    Channel ``c = i * k + j`` of replicate ``r`` draws its exponential gaps
    from the stream ``(seed, POISSON_PATH, r, i, j)``; extending a path never
    changes its prefix.
    """

    BLOCK = 1024

    def __init__(self, seed: int, k: int, replicate: int = 0):
        self.seed = int(seed)
        self.k = k
        self._rng = [stream(seed, POISSON_PATH, replicate, c // k, c % k) for c in range(k * k)]
        self._arr = [np.empty(0) for _ in range(k * k)]

    def arrivals(self, channel: int, count: int) -> np.ndarray:
        a = self._arr[channel]
        while len(a) < count:
            grow = max(self.BLOCK, len(a))
            start = a[-1] if len(a) else 0.0
            a = np.concatenate([a, start + np.cumsum(self._rng[channel].standard_exponential(grow))])
            self._arr[channel] = a
        return a[:count]

    def arrival(self, channel: int, m: int) -> float:
        if m >= len(self._arr[channel]):
            self.arrivals(channel, m + 1)
        return float(self._arr[channel][m])


def time_change_run(pi: np.ndarray, pop: PopulationCounts, source: ArrivalSource,
                    t_max: float = math.inf) -> tuple[np.ndarray, np.ndarray, float | None]:
    """Next-reaction sampler for ``Q_ij(t) = J_ij(int_0^t rho_ij ds)``.

    Returns event times, flat event types and the absorption time.
    """
    k, n = pop.k, pop.n
    K = k * k
    pif = pi.ravel()
    X = pop.x.astype(float).copy()
    Y = pop.y.astype(float).copy()
    tau = np.zeros(K)              # internal clocks
    fired = np.zeros(K, dtype=np.int64)
    nxt = np.array([source.arrival(c, 0) for c in range(K)])
    times = np.empty(n)
    types = np.empty(n, dtype=np.int64)
    t = 0.0
    for m in range(n):
        rates = pif * np.outer(X, Y).ravel() / (n - m)
        with np.errstate(divide="ignore"):
            wait = np.where(rates > 0, (nxt - tau) / rates, np.inf)
        c = int(np.argmin(wait))
        dt = wait[c]
        if t + dt > t_max:
            return times[:m], types[:m], None
        t += dt
        tau += rates * dt
        tau[c] = nxt[c]
        fired[c] += 1
        nxt[c] = source.arrival(c, int(fired[c]))
        times[m] = t
        types[m] = c
        X[c // k] -= 1
        Y[c % k] -= 1
    return times, types, (t if n > 0 else 0.0)


def simulate_coupled(params: ModelParams, fractions: PopulationFractions, n_list: Sequence[int],
                     config: SimConfig, replicate: int = 0,
                     store: PoissonPathStore | None = None) -> list[SimTrajectory]:
    """One trajectory per ``n``, all driven by the same Poisson paths.

    Populations are the largest-remainder roundings of ``n * x`` and ``n * y``.
    """
    check_dims(params, fractions)
    if not n_list:
        raise ValidationError("n_list is empty")
    if store is None:
        store = PoissonPathStore(config.seed, params.k, replicate)
    out = []
    for n in n_list:
        pop = round_population(fractions, int(n))
        times, types, t_abs = time_change_run(params.pi, pop, store, config.t_max)
        out.append(_finish(pop, config, times, types, t_abs))
    return out


# -- comparison with the fluid limit -------------------------------------------------------------


def sup_norm_error(traj: SimTrajectory, fluid, t_end: float) -> float:
    """``sup_{0 <= t <= t_end} max_ij |Q^(n)(t) / n - Q(t)|``.

    The scaled jump path is piecewise constant and the fluid path is
    nondecreasing, so the supremum is attained at an event time (from the left
    or from the right) or at ``t_end``.  ``fluid`` is any callable ``t -> Q(t)``.
    """
    if len(traj.types) == 0 and traj.pattern.sum() > 0:
        raise ValidationError("sup-norm error needs a full-path trajectory")
    n, k = traj.n, traj.k
    keep = traj.times <= t_end
    times = traj.times[keep]
    after = traj.states()[: len(times)] / n
    before = np.concatenate([np.zeros((1, k, k)), after[:-1]]) if len(times) else np.zeros((0, k, k))
    q = fluid(times) if len(times) else np.zeros((0, k, k))
    err = 0.0
    if len(times):
        err = max(np.abs(after - q).max(), np.abs(before - q).max())
    last = after[-1] if len(times) else np.zeros((k, k))
    return float(max(err, np.abs(last - fluid(np.array([t_end]))[0]).max()))


# -- exact oracle -----------------------------------------------------------------------------------


def exact_pattern_oracle(params: ModelParams, pop: PopulationCounts,
                         max_states: int = MAX_ORACLE_STATES) -> np.ndarray:
    """Expected terminal pattern ``E[Q(T_n)]`` by exact forward propagation.

    The jump chain moves from level ``m = M_tot`` to ``m + 1`` with
    probabilities ``rho_ij / sum(rho)``.  The law of the state is pushed level
    by level (singles count decreasing) and the expectation read off at
    level ``n``.  No randomness is involved.
    """
    check_dims(params, pop)
    k, n = pop.k, pop.n
    K = k * k
    pif = params.pi.ravel()
    x = pop.x.astype(float)
    y = pop.y.astype(float)
    states = np.zeros((1, K), dtype=np.int64)
    probs = np.ones(1)
    seen = 1
    eye = np.eye(K, dtype=np.int64)
    for m in range(n):
        M = states.reshape(-1, k, k)
        X = x - M.sum(axis=2)
        Y = y - M.sum(axis=1)
        rates = pif * (X[:, :, None] * Y[:, None, :]).reshape(-1, K)
        w = probs[:, None] * rates / rates.sum(axis=1, keepdims=True)
        live = w > 0
        child = (states[:, None, :] + eye[None, :, :])[live]
        cw = w[live]
        states, inv = np.unique(child, axis=0, return_inverse=True)
        probs = np.bincount(inv.ravel(), weights=cw, minlength=len(states))
        seen += len(states)
        if seen > max_states:
            raise StateSpaceTooLarge(f"more than {max_states} states reachable")
    return (probs[:, None] * states).sum(axis=0).reshape(k, k)


def patterns_to_json(pattern: np.ndarray) -> str:
    return json.dumps(np.asarray(pattern).tolist())
