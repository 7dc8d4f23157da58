"""Profile -> network input encoding and logit -> winner decoding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .elections import PreferenceProfile
from .errors import CapacityError, InvalidParameterError

SCHEMES = ("one_hot", "integer")


@dataclass(frozen=True)
class EncodingConfig:
    m_max: int = 5
    scheme: str = "one_hot"
    n_max: int = 20
    n_c: int = 0  # 0 -> default for the scheme (m_max for one-hot, 1 for integer)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown encoding scheme {self.scheme!r}")
        if self.m_max < 2 or self.n_max < 1:
            raise InvalidParameterError("m_max must be >= 2 and n_max >= 1")
        if self.n_c == 0:
            object.__setattr__(self, "n_c", self.m_max if self.scheme == "one_hot" else 1)
        if self.scheme == "one_hot" and self.n_c < self.m_max:
            raise InvalidParameterError("one-hot ids need n_c >= m_max")
        if self.scheme == "integer" and self.n_c != 1:
            raise InvalidParameterError("integer ids need n_c == 1")

    @property
    def row_width(self) -> int:
        return self.m_max * self.n_c


@dataclass(eq=False)
class EncodedElection:
    rows: np.ndarray
    voter_mask: np.ndarray
    candidate_mask: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.rows.shape[0]


def encode_rank_orders(rank_order: np.ndarray, cfg: EncodingConfig, dtype=np.float64) -> np.ndarray:
    """Vectorised encoder for (..., n, m) ballots -> (..., n, m_max * n_c)."""
    rank_order = np.asarray(rank_order)
    m = rank_order.shape[-1]
    if m > cfg.m_max:
        raise CapacityError(f"{m} candidates exceed the encoder capacity m_max={cfg.m_max}")
    out = np.zeros(rank_order.shape[:-1] + (cfg.m_max, cfg.n_c), dtype=dtype)
    if cfg.scheme == "one_hot":
        np.put_along_axis(out[..., :m, :], rank_order[..., None], 1.0, axis=-1)
    else:
        out[..., :m, 0] = rank_order
    return out.reshape(rank_order.shape[:-1] + (cfg.row_width,))


def candidate_mask(m: int, m_max: int) -> np.ndarray:
    mask = np.zeros(m_max, dtype=bool)
    mask[:m] = True
    return mask


def encode_profile(profile: PreferenceProfile, cfg: EncodingConfig, dtype=np.float64) -> EncodedElection:
    rows = encode_rank_orders(profile.rank_order, cfg, dtype)
    return EncodedElection(rows, np.ones(profile.n, dtype=bool), candidate_mask(profile.m, cfg.m_max))


def decode_rows(rows: np.ndarray, m: int, cfg: EncodingConfig) -> np.ndarray:
    """Inverse of the encoder for unpadded voter rows."""
    blocks = np.asarray(rows).reshape(rows.shape[:-1] + (cfg.m_max, cfg.n_c))[..., :m, :]
    if cfg.scheme == "one_hot":
        return blocks.argmax(axis=-1)
    return np.rint(blocks[..., 0]).astype(np.int64)


def pad_voter_dimension(enc: EncodedElection, cfg: EncodingConfig) -> EncodedElection:
    n = enc.rows.shape[0]
    if n > cfg.n_max:
        raise CapacityError(f"{n} voters exceed the fixed input size n_max={cfg.n_max}")
    pad = cfg.n_max - n
    rows = np.concatenate([enc.rows, np.zeros((pad, enc.rows.shape[1]), enc.rows.dtype)])
    mask = np.concatenate([enc.voter_mask, np.zeros(pad, dtype=bool)])
    return EncodedElection(rows, mask, enc.candidate_mask)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over unmasked slots; masked slots get probability exactly 0."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not np.all(mask.any(axis=-1)):
        raise InvalidParameterError("candidate mask has no valid slot")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def decode_winner(logits, mask) -> tuple[np.ndarray, int]:
    """Winner probabilities over the valid candidates and the lowest-index argmax."""
    mask = np.asarray(mask, dtype=bool)
    p = masked_softmax(logits, mask)
    probs = p[mask]
    return probs, int(np.flatnonzero(mask)[np.argmax(probs)])
