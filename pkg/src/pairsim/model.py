"""Model parameters, populations, pair-matrix states and the 2x2 classifier."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRate,
    DimensionMismatch,
    InvalidPopulation,
    InvalidProbability,
    InvalidState,
    NotTwoByTwo,
    RoundingInfeasible,
    SymmetryViolation,
)

# Relative tolerance for algebraic identities on the preference matrix.
RTOL = 1e-9
FRACTION_ATOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelParams:
    """Firing rates, acceptance probabilities and the derived matrix ``pi``.

    ``pi[i, j] = p[i, j] * (alpha[i] + beta[j])`` is the only combination the
    pair-type process depends on.
    """

    alpha: np.ndarray
    beta: np.ndarray
    p: np.ndarray
    pi: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.alpha)

    @classmethod
    def from_pi(cls, pi) -> "ModelParams":
        """Build a parameter set with zero female rates realising ``pi``.

        Male rates are the column maxima of ``pi`` so that every acceptance
        probability lies in (0, 1].
        """
        pi = np.array(pi, dtype=float)
        if pi.ndim != 2 or pi.shape[0] != pi.shape[1] or pi.shape[0] == 0:
            raise DimensionMismatch(f"pi must be a non-empty square matrix, got shape {pi.shape}")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0):
            raise DegenerateRate("all entries of pi must be positive and finite")
        beta = pi.max(axis=0)
        p = pi / beta[None, :]
        # p recomputed exactly; pi kept as given to avoid round-off drift.
        return cls(alpha=_frozen(np.zeros(len(beta))), beta=_frozen(beta),
                   p=_frozen(np.minimum(p, 1.0)), pi=_frozen(pi))


def build_params(alpha, beta, p) -> ModelParams:
    """Validate ``(alpha, beta, p)`` and cache ``pi``."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    k = len(alpha)
    if k == 0 or alpha.ndim != 1 or beta.shape != (k,) or p.shape != (k, k):
        raise DimensionMismatch(
            f"alpha {alpha.shape}, beta {beta.shape} and p {p.shape} are not consistent")
    if np.any(~np.isfinite(alpha)) or np.any(~np.isfinite(beta)):
        raise DegenerateRate("rates must be finite")
    if np.any(alpha < 0) or np.any(beta < 0):
        raise DegenerateRate("firing rates must be nonnegative")
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise InvalidProbability("acceptance probabilities must lie in (0, 1]")
    total = alpha[:, None] + beta[None, :]
    if np.any(total <= 0):
        i, j = np.argwhere(total <= 0)[0]
        raise DegenerateRate(f"alpha[{i}] + beta[{j}] = 0")
    return ModelParams(alpha=_frozen(alpha), beta=_frozen(beta), p=_frozen(p),
                       pi=_frozen(p * total))


@dataclass(frozen=True)
class PopulationCounts:
    n: int
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x)
        y = np.asarray(self.y)
        if x.ndim != 1 or x.shape != y.shape:
            raise DimensionMismatch("x and y must be vectors of equal length")
        if np.any(x != np.round(x)) or np.any(y != np.round(y)):
            raise InvalidPopulation("type counts must be integers")
        x = x.astype(np.int64)
        y = y.astype(np.int64)
        if np.any(x < 0) or np.any(y < 0):
            raise InvalidPopulation("type counts must be nonnegative")
        if x.sum() != self.n or y.sum() != self.n:
            raise InvalidPopulation(f"counts must sum to n={self.n}: {x.sum()}, {y.sum()}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def k(self) -> int:
        return len(self.x)

    @property
    def fractions(self) -> "PopulationFractions":
        return PopulationFractions(self.x / self.n, self.y / self.n)


@dataclass(frozen=True)
class PopulationFractions:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DimensionMismatch("x and y must be vectors of equal length")
        if np.any(x < 0) or np.any(y < 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidPopulation("fractions must be nonnegative")
        if abs(x.sum() - 1) > FRACTION_ATOL or abs(y.sum() - 1) > FRACTION_ATOL:
            raise InvalidPopulation(f"fractions must sum to 1: {x.sum()}, {y.sum()}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def k(self) -> int:
        return len(self.x)


def check_dims(params: ModelParams, pop) -> None:
    if pop.k != params.k:
        raise DimensionMismatch(f"population has {pop.k} types, parameters have {params.k}")


def largest_remainder(fracs: np.ndarray, n: int) -> np.ndarray:
    """Integer counts summing to ``n``; remainders go to the largest fractional
    parts, ties to the lowest index."""
    target = np.asarray(fracs, dtype=float) * n
    base = np.floor(target).astype(np.int64)
    short = n - int(base.sum())
    if short < 0 or short > len(base):
        raise RoundingInfeasible(f"cannot round {fracs} to total {n}")
    rema = target - base
    # stable sort on -remainder keeps lowest index first among ties
    order = np.argsort(-rema, kind="stable")
    base[order[:short]] += 1
    return base


def round_population(fractions: PopulationFractions, n: int) -> PopulationCounts:
    if n < 1:
        raise InvalidPopulation("n must be positive")
    return PopulationCounts(n, largest_remainder(fractions.x, n), largest_remainder(fractions.y, n))


def check_pair_matrix(m, x, y, *, integer: bool = False, atol: float = 0.0) -> np.ndarray:
    """Return ``m`` as an array after checking membership in the state space.

    Entries must be nonnegative with row sums at most ``x`` and column sums at
    most ``y`` (up to ``atol``).
    """
    m = np.asarray(m, dtype=float)
    k = len(x)
    if m.shape != (k, k):
        raise InvalidState(f"pair matrix must be {k}x{k}, got {m.shape}")
    if integer and np.any(m != np.round(m)):
        raise InvalidState("pair counts must be integers")
    if np.any(m < -atol):
        raise InvalidState("pair matrix has negative entries")
    if np.any(m.sum(axis=1) > np.asarray(x) + atol) or np.any(m.sum(axis=0) > np.asarray(y) + atol):
        raise InvalidState("pair matrix violates the margin constraints")
    return m


# -- fine balance -------------------------------------------------------------


@dataclass(frozen=True)
class FineBalanceDecomposition:
    """``pi[i, j] = alpha_bar[i] + beta_bar[j]`` with ``min(alpha_bar) == 0``."""

    alpha_bar: np.ndarray
    beta_bar: np.ndarray

    def matrix(self) -> np.ndarray:
        return self.alpha_bar[:, None] + self.beta_bar[None, :]


def fine_balance_defect(pi) -> float:
    """Max over index quadruples of ``|pi_ij + pi_i'j' - pi_ij' - pi_i'j|``."""
    pi = np.asarray(pi, dtype=float)
    d = (pi[:, None, :, None] + pi[None, :, None, :]
         - pi[:, None, None, :] - pi[None, :, :, None])
    return float(np.abs(d).max())


def check_fine_balance(params: ModelParams, rtol: float = RTOL) -> FineBalanceDecomposition | None:
    pi = params.pi
    if fine_balance_defect(pi) > rtol * pi.max():
        return None
    i_star = int(np.argmin(pi[:, 0]))
    alpha_bar = pi[:, 0] - pi[i_star, 0]
    beta_bar = pi[i_star, :].copy()
    return FineBalanceDecomposition(_frozen(alpha_bar), _frozen(beta_bar))


# -- symmetric 2x2 --------------------------------------------------------------


class Sym2x2Case(str, enum.Enum):
    FINE_BALANCE = "FineBalance"
    GAMMA_ONE = "GammaOne"
    GAMMA_ZERO = "GammaZero"
    GENERIC = "Generic"


class MatingClass(str, enum.Enum):
    HETEROGAMOUS = "heterogamous"
    PANMICTIC = "panmictic"
    HOMOGAMOUS = "homogamous"


@dataclass(frozen=True)
class Sym2x2Params:
    pi11: float
    pi12: float
    pi22: float
    x1: float
    case: Sym2x2Case
    gamma: float | None
    theta1: float | None
    theta2: float | None

    @property
    def curvature(self) -> float:
        """``pi11 + pi22 - 2 pi12``; its sign decides the mating class."""
        return self.pi11 + self.pi22 - 2 * self.pi12


def _require_sym2x2(params: ModelParams) -> None:
    if params.k != 2:
        raise NotTwoByTwo(f"need k = 2, got k = {params.k}")
    pi = params.pi
    if abs(pi[0, 1] - pi[1, 0]) > RTOL * pi.max():
        raise SymmetryViolation(f"pi12 = {pi[0, 1]} differs from pi21 = {pi[1, 0]}")


def sym2x2_reduce(params: ModelParams, fractions: PopulationFractions,
                  tol: float = RTOL) -> Sym2x2Params:
    _require_sym2x2(params)
    if fractions.k != 2:
        raise NotTwoByTwo("fractions must have two types")
    if abs(fractions.x[0] - fractions.y[0]) > FRACTION_ATOL:
        raise SymmetryViolation(f"x1 = {fractions.x[0]} differs from y1 = {fractions.y[0]}")
    return sym2x2_from_pi(params.pi[0, 0], 0.5 * (params.pi[0, 1] + params.pi[1, 0]),
                          params.pi[1, 1], float(fractions.x[0]), tol=tol)


def sym2x2_from_pi(pi11: float, pi12: float, pi22: float, x1: float,
                   tol: float = RTOL) -> Sym2x2Params:
    pi11, pi12, pi22, x1 = float(pi11), float(pi12), float(pi22), float(x1)
    scale = tol * max(pi11, pi12, pi22)
    d = pi11 + pi22 - 2 * pi12
    theta1 = pi12 / (pi22 - pi12) if pi22 != pi12 else None
    theta2 = pi12 / (pi11 - pi12) if pi11 != pi12 else None
    if abs(d) <= scale:
        case, gamma = Sym2x2Case.FINE_BALANCE, None
    elif abs(pi11 - pi12) <= scale:
        case, gamma = Sym2x2Case.GAMMA_ONE, 1.0
    elif abs(pi22 - pi12) <= scale:
        case, gamma = Sym2x2Case.GAMMA_ZERO, 0.0
    else:
        case, gamma = Sym2x2Case.GENERIC, (pi22 - pi12) / d
    return Sym2x2Params(pi11, pi12, pi22, x1, case, gamma, theta1, theta2)


def classify_2x2(params: ModelParams, tol: float = RTOL) -> MatingClass:
    _require_sym2x2(params)
    pi = params.pi
    d = pi[0, 0] + pi[1, 1] - pi[0, 1] - pi[1, 0]
    scale = tol * pi.max()
    if d < -scale:
        return MatingClass.HETEROGAMOUS
    if d <= scale:
        return MatingClass.PANMICTIC
    return MatingClass.HOMOGAMOUS
