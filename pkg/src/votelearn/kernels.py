"""Hot integer kernels: pairwise tallies and exact Kemeny search.

Each kernel exists twice: a numba ``@njit`` loop (``*_nb``) and a
vectorised numpy version (``*_np``). The public names at the bottom of the
module are bound to one of the two according to :data:`_accel.BACKEND`.
Both variants are importable regardless of the flag so tests and the
benchmark can run them side by side.
"""
from itertools import permutations
from math import factorial

import numpy as np

from ._accel import BACKEND, njit

NEG = np.iinfo(np.int64).min // 4


# ---------------------------------------------------------------------------
# pairwise counts
# ---------------------------------------------------------------------------

@njit
def pairwise_counts_nb(rank_order):
    """Batched pairwise tallies; ``rank_order`` has shape (B, n, m)."""
    B, n, m = rank_order.shape
    out = np.zeros((B, m, m), dtype=np.int64)
    for b in range(B):
        for v in range(n):
            row = rank_order[b, v]
            for hi in range(m):
                a = row[hi]
                for lo in range(hi + 1, m):
                    out[b, a, row[lo]] += 1
    return out


def pairwise_counts_np(rank_order):
    rank_order = np.asarray(rank_order)
    B, n, m = rank_order.shape
    pos = np.empty_like(rank_order)
    np.put_along_axis(pos, rank_order, np.broadcast_to(np.arange(m), rank_order.shape), axis=2)
    beats = pos[:, :, :, None] < pos[:, :, None, :]
    return beats.sum(axis=1, dtype=np.int64)


# ---------------------------------------------------------------------------
# Kemeny: subset dynamic program
# ---------------------------------------------------------------------------
#
# f(S) = max_{c in S} gain(c, S \ {c}) + f(S \ {c}) where gain(c, T) is the
# number of agreeing pairwise tallies when c sits above every member of T.
# Ties in the max go to the lowest candidate index, which makes the greedy
# reconstruction from the full set return the lexicographically smallest
# optimal ranking.

@njit
def _kemeny_table_nb(counts):
    m = counts.shape[0]
    full = (1 << m) - 1
    gain = np.zeros((m, full + 1), dtype=np.int64)
    for c in range(m):
        for T in range(1, full + 1):
            low = T & -T
            j = 0
            while (1 << j) != low:
                j += 1
            gain[c, T] = gain[c, T ^ low] + counts[c, j]
    f = np.full(full + 1, NEG, dtype=np.int64)
    f[0] = 0
    for S in range(1, full + 1):
        best = NEG
        for c in range(m):
            bit = 1 << c
            if S & bit:
                rest = S ^ bit
                val = gain[c, rest] + f[rest]
                if val > best:
                    best = val
        f[S] = best
    return f, gain


@njit
def kemeny_dp_nb(counts):
    """Return (objective, ranking, tied_winner) for one (m, m) tally matrix."""
    m = counts.shape[0]
    f, gain = _kemeny_table_nb(counts)
    full = (1 << m) - 1
    ranking = np.empty(m, dtype=np.int64)
    S = full
    for pos in range(m):
        target = f[S]
        for c in range(m):
            bit = 1 << c
            if S & bit:
                rest = S ^ bit
                if gain[c, rest] + f[rest] == target:
                    ranking[pos] = c
                    S = rest
                    break
    winner = ranking[0]
    tied = False
    for c in range(m):
        if c != winner:
            rest = full ^ (1 << c)
            if gain[c, rest] + f[rest] == f[full]:
                tied = True
                break
    return f[full], ranking, tied


@njit
def kemeny_winners_nb(counts):
    """Kemeny winner and tie flag for a (B, m, m) stack of tallies."""
    B = counts.shape[0]
    winners = np.empty(B, dtype=np.int64)
    tied = np.empty(B, dtype=np.bool_)
    for b in range(B):
        _, ranking, t = kemeny_dp_nb(counts[b])
        winners[b] = ranking[0]
        tied[b] = t
    return winners, tied


def _kemeny_table_np(counts):
    counts = np.asarray(counts, dtype=np.int64)
    m = counts.shape[0]
    size = 1 << m
    subsets = np.arange(size)
    member = ((subsets[None, :] >> np.arange(m)[:, None]) & 1).astype(np.int64)  # (m, 2^m)
    gain = counts @ member  # gain[c, T] = sum_{j in T} counts[c, j]
    popcount = member.sum(axis=0)
    f = np.full(size, NEG, dtype=np.int64)
    f[0] = 0
    for k in range(1, m + 1):
        S = subsets[popcount == k]
        best = np.full(S.shape, NEG, dtype=np.int64)
        for c in range(m):
            inside = (S >> c) & 1 == 1
            rest = S[inside] ^ (1 << c)
            val = gain[c, rest] + f[rest]
            cur = best[inside]
            best[inside] = np.maximum(cur, val)
        f[S] = best
    return f, gain


def kemeny_dp_np(counts):
    counts = np.asarray(counts, dtype=np.int64)
    m = counts.shape[0]
    f, gain = _kemeny_table_np(counts)
    full = (1 << m) - 1
    ranking = np.empty(m, dtype=np.int64)
    S = full
    for pos in range(m):
        for c in range(m):
            bit = 1 << c
            if S & bit and gain[c, S ^ bit] + f[S ^ bit] == f[S]:
                ranking[pos] = c
                S ^= bit
                break
    winner = ranking[0]
    tops = np.array([gain[c, full ^ (1 << c)] + f[full ^ (1 << c)] for c in range(m)])
    tied = bool(np.count_nonzero(tops == f[full]) > 1)
    assert tops[winner] == f[full]
    return int(f[full]), ranking, tied


def kemeny_winners_np(counts):
    counts = np.asarray(counts, dtype=np.int64)
    B = counts.shape[0]
    winners = np.empty(B, dtype=np.int64)
    tied = np.empty(B, dtype=bool)
    for b in range(B):
        _, ranking, t = kemeny_dp_np(counts[b])
        winners[b] = ranking[0]
        tied[b] = t
    return winners, tied


# ---------------------------------------------------------------------------
# Kemeny: exhaustive enumeration (test oracle)
# ---------------------------------------------------------------------------

@njit
def kemeny_brute_nb(counts):
    """Scan all m! rankings in lexicographic order; first strict maximum wins."""
    m = counts.shape[0]
    perm = np.arange(m)
    best = NEG
    best_perm = perm.copy()
    while True:
        score = 0
        for i in range(m):
            for j in range(i + 1, m):
                score += counts[perm[i], perm[j]]
        if score > best:
            best = score
            best_perm[:] = perm
        # next lexicographic permutation
        i = m - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            break
        j = m - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        perm[i + 1:] = perm[i + 1:][::-1].copy()
    return best, best_perm


def kemeny_brute_np(counts):
    counts = np.asarray(counts, dtype=np.int64)
    m = counts.shape[0]
    perms = np.array(list(permutations(range(m))), dtype=np.int64).reshape(factorial(m), m)
    hi, lo = np.triu_indices(m, k=1)
    scores = counts[perms[:, hi], perms[:, lo]].sum(axis=1)
    k = int(np.argmax(scores))  # first max == lexicographically smallest
    return int(scores[k]), perms[k].copy()


if BACKEND == "numba":
    pairwise_counts = pairwise_counts_nb
    kemeny_dp = kemeny_dp_nb
    kemeny_winners = kemeny_winners_nb
    kemeny_brute = kemeny_brute_nb
else:
    pairwise_counts = pairwise_counts_np
    kemeny_dp = kemeny_dp_np
    kemeny_winners = kemeny_winners_np
    kemeny_brute = kemeny_brute_np
