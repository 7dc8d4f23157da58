"""Social welfare functions, utility oracles and the optimal scoring rule estimate."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .elections import DirichletParams, UtilityProfile, make_rng, sample_utilities
from .errors import DegenerateWelfareError, InvalidParameterError, ParseError
from .rules import WinnerResult, argmax_with_ties

KINDS = ("utilitarian", "rawlsian", "egalitarian")


@dataclass(frozen=True)
class WelfareFunction:
    kind: str = "utilitarian"
    lam: float = -1.0  # egalitarian only; negative values penalise inequality

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown welfare kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.lam):
            raise InvalidParameterError("lambda must be finite")

    def describe(self) -> str:
        return f"egalitarian(lambda={self.lam:g})" if self.kind == "egalitarian" else self.kind


def welfare_scores(u, w: WelfareFunction) -> np.ndarray:
    """Welfare of every candidate. ``u`` is (n, m) or batched (B, n, m); voters on axis -2."""
    u = np.asarray(u.values if isinstance(u, UtilityProfile) else u, dtype=np.float64)
    if w.kind == "utilitarian":
        return u.sum(axis=-2)
    low = u.min(axis=-2)
    if w.kind == "rawlsian":
        return low
    total = u.sum(axis=-2)
    n = u.shape[-2]
    return total + w.lam * (total - n * low)


def social_welfare(a: int, u: UtilityProfile, w: WelfareFunction) -> float:
    if not 0 <= a < u.m:
        raise InvalidParameterError(f"candidate {a} out of range for m={u.m}")
    col = u.values[:, a]
    if w.kind == "utilitarian":
        return float(col.sum())
    if w.kind == "rawlsian":
        return float(col.min())
    return float(col.sum() + w.lam * (col - col.min()).sum())


def oracle_winner(u: UtilityProfile, w: WelfareFunction) -> WinnerResult:
    return WinnerResult.from_scores(welfare_scores(u, w))


def oracle_winners_batch(u: np.ndarray, w: WelfareFunction):
    return argmax_with_ties(welfare_scores(u, w))


def welfare_ratio(chosen, u, w: WelfareFunction):
    """sw(chosen) / max_a sw(a). Scalar for one election, vector for a batch."""
    scores = welfare_scores(u, w)
    best = scores.max(axis=-1)
    if np.any(best <= 0):
        raise DegenerateWelfareError("maximum welfare is non-positive; the ratio is undefined")
    chosen = np.asarray(chosen)
    got = np.take_along_axis(scores, chosen[..., None], axis=-1)[..., 0] if scores.ndim > 1 else scores[chosen]
    # exact 1.0 for the optimum, avoiding x/x rounding surprises
    return np.where(got == best, 1.0, got / best)[()]


def estimate_optimal_score_vector(params: DirichletParams, m: int, n_samples: int, rng,
                                  chunk: int = 200_000) -> np.ndarray:
    """Monte-Carlo mean utility of the candidate at each rank position.

    Draws are processed in fixed-size chunks and summed in chunk order, so the
    estimate does not depend on memory limits.
    """
    if n_samples < 1:
        raise InvalidParameterError("n_samples must be >= 1")
    if params.m != m:
        raise InvalidParameterError(f"alpha has length {params.m}, expected {m}")
    total = np.zeros(m)
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        u = sample_utilities(params.alpha, (k,), rng)
        total += -np.sort(-u, axis=1).sum(axis=0)
        done += k
    return total / n_samples


def expected_uniform_order_stats(m: int) -> np.ndarray:
    """Closed form E[X_(k)] = (1/m) sum_{i=k}^{m} 1/i for the uniform simplex."""
    inv = 1.0 / np.arange(1, m + 1)
    return np.cumsum(inv[::-1])[::-1] / m


class ScoreVectorCache:
    """Disk cache of estimated optimal score vectors keyed by (alpha0, m).

    File layout (text, one record per line)::

        votelearn-score-cache 1
        <alpha0> <m> <n_samples> <seed> <s_1> ... <s_m>

    Reals are written with ``float.hex`` so a reload is bit-exact.
    """

    MAGIC = "votelearn-score-cache 1"

    def __init__(self, path=None):
        self.path = path
        self.records: dict[tuple[float, int], tuple[int, int, np.ndarray]] = {}
        if path is not None and os.path.exists(path):
            self._load()

    def _load(self):
        with open(self.path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].strip() != self.MAGIC:
            raise ParseError(f"{self.path}: not a score cache (bad header)", 1)
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            try:
                alpha0 = float.fromhex(parts[0])
                m, n_samples, seed = int(parts[1]), int(parts[2]), int(parts[3])
                vec = np.array([float.fromhex(x) for x in parts[4:]])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"malformed cache record: {exc}", lineno) from None
            if vec.size != m:
                raise ParseError(f"record has {vec.size} scores for m={m}", lineno)
            self.records[(alpha0, m)] = (n_samples, seed, vec)

    def save(self):
        lines = [self.MAGIC]
        for (alpha0, m), (n_samples, seed, vec) in sorted(self.records.items()):
            lines.append(" ".join([float(alpha0).hex(), str(m), str(n_samples), str(seed)]
                                  + [float(x).hex() for x in vec]))
        tmp = f"{self.path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, self.path)

    def get(self, alpha0: float, m: int, n_samples: int = 1_000_000, seed: int = 0) -> np.ndarray:
        key = (float(alpha0), int(m))
        hit = self.records.get(key)
        if hit is not None and hit[0] >= n_samples:
            return hit[2].copy()
        vec = estimate_optimal_score_vector(DirichletParams.symmetric(alpha0, m), m, n_samples,
                                            make_rng(seed, 7, int(m)))
        self.records[key] = (n_samples, seed, vec)
        if self.path is not None:
            self.save()
        return vec.copy()
