"""Election domain types, Dirichlet utility sampling and ballot derivation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

# alpha0 regimes for symmetric Dirichlet utilities
POLARIZED, UNIFORM, INDECISIVE = "polarized", "uniform", "indecisive"


def regime(alpha0: float) -> str:
    if alpha0 < 1.0:
        return POLARIZED
    if alpha0 == 1.0:
        return UNIFORM
    return INDECISIVE


def make_rng(seed, *stream) -> np.random.Generator:
    """Seeded generator for a named sub-stream.

    Sub-streams are derived with :class:`numpy.random.SeedSequence` using
    ``seed`` as entropy and ``stream`` (a tuple of non-negative ints) as the
    spawn key, so ``make_rng(s, 1)`` and ``make_rng(s, 2)`` are statistically
    independent and never overlap.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(stream))))


def split_rng(rng: np.random.Generator, k: int) -> list[np.random.Generator]:
    """One independent child stream per worker, in worker order."""
    return [np.random.Generator(np.random.PCG64(s)) for s in rng.bit_generator.seed_seq.spawn(k)]


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.ndim != 1 or alpha.size < 1:
            raise InvalidParameterError("alpha must be a non-empty vector")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise InvalidParameterError(f"Dirichlet parameters must be positive, got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def symmetric(cls, alpha0: float, m: int) -> "DirichletParams":
        return cls(np.full(int(m), float(alpha0)))

    @property
    def m(self) -> int:
        return self.alpha.size


@dataclass(frozen=True, eq=False)
class UtilityProfile:
    """n x m matrix of normalised, non-negative voter utilities (voter-major)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 2:
            raise InvalidParameterError(f"utility profile must be n x m with n>=1, m>=2; got {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidParameterError("utilities must be finite and non-negative")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class PreferenceProfile:
    """Ballots stored rank-major: ``rank_order[i, k]`` is voter i's k-th choice."""

    rank_order: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rank_order)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 2:
            raise InvalidParameterError(f"profile must be n x m with n>=1, m>=2; got {r.shape}")
        if not np.issubdtype(r.dtype, np.integer):
            raise InvalidParameterError("rank_order must hold integer candidate indices")
        r = r.astype(np.int64, copy=False)
        if not np.array_equal(np.sort(r, axis=1), np.broadcast_to(np.arange(r.shape[1]), r.shape)):
            raise InvalidParameterError("every ballot must be a permutation of 0..m-1")
        object.__setattr__(self, "rank_order", r)

    @property
    def n(self) -> int:
        return self.rank_order.shape[0]

    @property
    def m(self) -> int:
        return self.rank_order.shape[1]

    def positions(self) -> np.ndarray:
        """Forward map: ``positions()[i, a]`` is the 0-based rank voter i gives candidate a."""
        pos = np.empty_like(self.rank_order)
        rows = np.arange(self.n)[:, None]
        pos[rows, self.rank_order] = np.arange(self.m)
        return pos

    def __eq__(self, other):
        return isinstance(other, PreferenceProfile) and np.array_equal(self.rank_order, other.rank_order)

    __hash__ = None


@dataclass(frozen=True)
class ElectionSpec:
    n_min: int = 2
    n_max: int = 20
    m_min: int = 2
    m_max: int = 5
    alpha0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise InvalidParameterError(f"need 1 <= n_min <= n_max, got {self.n_min}..{self.n_max}")
        if not 2 <= self.m_min <= self.m_max:
            raise InvalidParameterError(f"need 2 <= m_min <= m_max, got {self.m_min}..{self.m_max}")
        if not (np.isfinite(self.alpha0) and self.alpha0 > 0):
            raise InvalidParameterError(f"alpha0 must be positive, got {self.alpha0}")


def sample_utilities(alpha: np.ndarray, shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet draws of shape ``shape + (len(alpha),)`` via normalised gammas.

    numpy's gamma sampler is Marsaglia-Tsang squeeze/rejection with the
    ``U**(1/alpha)`` boost for alpha < 1, so the polarised regime is exact.
    """
    g = rng.standard_gamma(alpha, size=tuple(shape) + (alpha.size,))
    total = g.sum(axis=-1, keepdims=True)
    # all-zero rows only happen when tiny alphas underflow; such a draw is a
    # simplex vertex in the limit, so pick one uniformly
    bad = total[..., 0] == 0.0
    if np.any(bad):
        k = rng.integers(alpha.size, size=int(bad.sum()))
        g[bad] = np.eye(alpha.size)[k]
        total = g.sum(axis=-1, keepdims=True)
    return g / total


def sample_utility_profile(params: DirichletParams, n_voters: int, rng: np.random.Generator) -> UtilityProfile:
    if n_voters < 1:
        raise InvalidParameterError(f"n_voters must be >= 1, got {n_voters}")
    return UtilityProfile(sample_utilities(params.alpha, (int(n_voters),), rng))


def rank_order_from_utilities(u: np.ndarray) -> np.ndarray:
    """Sort candidates by descending utility along the last axis; ties go to the lower index."""
    return np.argsort(-np.asarray(u), axis=-1, kind="stable")


def profile_from_utilities(u: UtilityProfile) -> PreferenceProfile:
    return PreferenceProfile(rank_order_from_utilities(u.values))


def sample_election(spec: ElectionSpec, rng: np.random.Generator) -> tuple[UtilityProfile, PreferenceProfile]:
    n = int(rng.integers(spec.n_min, spec.n_max + 1))
    m = int(rng.integers(spec.m_min, spec.m_max + 1))
    u = sample_utility_profile(DirichletParams.symmetric(spec.alpha0, m), n, rng)
    return u, profile_from_utilities(u)
