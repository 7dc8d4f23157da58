"""Exact classical voting rules over strict preference profiles.

All winners are reported through :class:`WinnerResult` whose ``per_candidate``
vector is sign-normalised so that the winner is always the lowest-index
argmax. Batched variants (``*_batch``) take stacked ballots of shape
(B, n, m) and are what the training pipeline uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .elections import PreferenceProfile
from .errors import CapacityError, InvalidParameterError

RULES = ("plurality", "borda", "copeland", "maximin", "kemeny")
KEMENY_CAP = 16
BRUTE_FORCE_CAP = 8


@dataclass(frozen=True, eq=False)
class PairwiseMatrix:
    counts: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True, eq=False)
class WinnerResult:
    winner: int
    tied: bool
    per_candidate: np.ndarray

    @classmethod
    def from_scores(cls, scores) -> "WinnerResult":
        scores = np.asarray(scores)
        best = scores.max()
        top = np.flatnonzero(scores == best)
        return cls(int(top[0]), bool(top.size > 1), scores)


@dataclass(frozen=True, eq=False)
class KemenyResult:
    ranking: np.ndarray
    objective: int
    tied_winner: bool

    @property
    def winner(self) -> int:
        return int(self.ranking[0])


def plurality_scores(m: int) -> np.ndarray:
    s = np.zeros(m, dtype=np.int64)
    s[0] = 1
    return s


def borda_scores(m: int) -> np.ndarray:
    return np.arange(m - 1, -1, -1, dtype=np.int64)


def pairwise_matrix(profile: PreferenceProfile) -> PairwiseMatrix:
    counts = kernels.pairwise_counts(profile.rank_order[None])[0]
    return PairwiseMatrix(counts, profile.n)


def positional_scores(rank_order: np.ndarray, s) -> np.ndarray:
    """Sum of ``s[rank]`` per candidate; works on (n, m) or batched (B, n, m) ballots."""
    rank_order = np.asarray(rank_order)
    s = np.asarray(s)
    m = rank_order.shape[-1]
    if s.shape != (m,):
        raise InvalidParameterError(f"score vector has length {s.size}, profile has {m} candidates")
    out = np.zeros(rank_order.shape[:-2] + (m,), dtype=np.result_type(s.dtype, np.int64))
    # candidate at rank k collects s[k]
    contrib = np.broadcast_to(s, rank_order.shape)
    if rank_order.ndim == 2:
        np.add.at(out, rank_order.ravel(), contrib.ravel())
    else:
        B = rank_order.shape[0]
        rows = np.repeat(np.arange(B), rank_order.shape[1] * m)
        np.add.at(out, (rows, rank_order.ravel()), contrib.ravel())
    return out


def positional_winner(profile: PreferenceProfile, s) -> WinnerResult:
    return WinnerResult.from_scores(positional_scores(profile.rank_order, s))


def plurality_winner(profile: PreferenceProfile) -> WinnerResult:
    return positional_winner(profile, plurality_scores(profile.m))


def borda_winner(profile: PreferenceProfile) -> WinnerResult:
    return positional_winner(profile, borda_scores(profile.m))


def copeland_scores(counts: np.ndarray) -> np.ndarray:
    """Pairwise-majority victories, half a point per majority tie.

    Accepts (m, m) or batched (B, m, m) tallies.
    """
    counts = np.asarray(counts)
    against = np.swapaxes(counts, -1, -2)
    m = counts.shape[-1]
    off = ~np.eye(m, dtype=bool)
    wins = ((counts > against) & off).sum(axis=-1)
    draws = ((counts == against) & off).sum(axis=-1)
    return wins + 0.5 * draws


def maximin_scores(counts: np.ndarray) -> np.ndarray:
    """Negated worst pairwise defeat ``-max_j counts[j, i]``; batched like :func:`copeland_scores`."""
    counts = np.asarray(counts)
    m = counts.shape[-1]
    against = np.where(np.eye(m, dtype=bool), -1, np.swapaxes(counts, -1, -2))
    return -against.max(axis=-1)


def copeland_winner(pw: PairwiseMatrix) -> WinnerResult:
    return WinnerResult.from_scores(copeland_scores(pw.counts))


def maximin_winner(pw: PairwiseMatrix) -> WinnerResult:
    return WinnerResult.from_scores(maximin_scores(pw.counts))


def kemeny_exact(pw: PairwiseMatrix, cap: int = KEMENY_CAP) -> KemenyResult:
    if pw.m > cap:
        raise CapacityError(
            f"Kemeny DP is capped at {cap} candidates (got {pw.m}); raise the cap "
            f"or use kemeny_brute_force for m <= {BRUTE_FORCE_CAP}"
        )
    objective, ranking, tied = kernels.kemeny_dp(np.ascontiguousarray(pw.counts, dtype=np.int64))
    return KemenyResult(np.asarray(ranking, dtype=np.int64), int(objective), bool(tied))


def kemeny_brute_force(pw: PairwiseMatrix) -> KemenyResult:
    if pw.m > BRUTE_FORCE_CAP:
        raise CapacityError(f"brute-force Kemeny is limited to {BRUTE_FORCE_CAP} candidates (got {pw.m})")
    counts = np.ascontiguousarray(pw.counts, dtype=np.int64)
    objective, ranking = kernels.kemeny_brute(counts)
    ranking = np.asarray(ranking, dtype=np.int64)
    # tie detection by enumeration: best ranking headed by each other candidate
    tied = False
    for c in range(pw.m):
        if c != ranking[0]:
            rest = [x for x in range(pw.m) if x != c]
            sub = counts[np.ix_(rest, rest)]
            sub_obj, _ = kernels.kemeny_brute(np.ascontiguousarray(sub))
            if int(counts[c, rest].sum()) + int(sub_obj) == objective:
                tied = True
                break
    return KemenyResult(ranking, int(objective), tied)


def kemeny_objective(counts: np.ndarray, ranking) -> int:
    ranking = np.asarray(ranking)
    hi, lo = np.triu_indices(ranking.size, k=1)
    return int(np.asarray(counts)[ranking[hi], ranking[lo]].sum())


def rule_winner(rule: str, profile: PreferenceProfile) -> WinnerResult:
    """Dispatch by rule name. Kemeny's ``per_candidate`` is the best objective with that candidate on top."""
    if rule == "plurality":
        return plurality_winner(profile)
    if rule == "borda":
        return borda_winner(profile)
    if rule not in RULES:
        raise InvalidParameterError(f"unknown rule {rule!r}; expected one of {RULES}")
    pw = pairwise_matrix(profile)
    if rule == "copeland":
        return copeland_winner(pw)
    if rule == "maximin":
        return maximin_winner(pw)
    res = kemeny_exact(pw)
    per = np.array([_best_with_top(pw.counts, c) for c in range(pw.m)], dtype=np.int64)
    return WinnerResult(res.winner, res.tied_winner, per)


def _best_with_top(counts: np.ndarray, c: int) -> int:
    m = counts.shape[0]
    rest = [x for x in range(m) if x != c]
    sub = np.ascontiguousarray(counts[np.ix_(rest, rest)], dtype=np.int64)
    obj, _, _ = kernels.kemeny_dp(sub)
    return int(counts[c, rest].sum()) + int(obj)


def rule_winners_batch(rule: str, rank_order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Winners and tie flags for B same-shape elections, ``rank_order`` of shape (B, n, m)."""
    rank_order = np.ascontiguousarray(rank_order, dtype=np.int64)
    m = rank_order.shape[-1]
    if rule == "plurality":
        scores = positional_scores(rank_order, plurality_scores(m))
    elif rule == "borda":
        scores = positional_scores(rank_order, borda_scores(m))
    elif rule in ("copeland", "maximin", "kemeny"):
        counts = kernels.pairwise_counts(rank_order)
        if rule == "kemeny":
            if m > KEMENY_CAP:
                raise CapacityError(f"Kemeny DP is capped at {KEMENY_CAP} candidates (got {m})")
            winners, tied = kernels.kemeny_winners(counts)
            return np.asarray(winners, dtype=np.int64), np.asarray(tied, dtype=bool)
        scores = copeland_scores(counts) if rule == "copeland" else maximin_scores(counts)
    else:
        raise InvalidParameterError(f"unknown rule {rule!r}; expected one of {RULES}")
    return argmax_with_ties(scores)


def argmax_with_ties(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise lowest-index argmax and a flag for non-unique maxima."""
    best = scores.max(axis=-1, keepdims=True)
    winners = np.argmax(scores, axis=-1)
    tied = (scores == best).sum(axis=-1) > 1
    return winners.astype(np.int64), tied


def has_condorcet_winner(pw: PairwiseMatrix):
    """Index of the Condorcet winner, or None."""
    m = pw.m
    for i in range(m):
        if all(2 * pw.counts[i, j] > pw.n for j in range(m) if j != i):
            return i
    return None
