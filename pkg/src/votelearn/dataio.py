"""Strict-order ballot files, election datasets and sub-election sampling.

Strict-order complete ballot grammar (one item per line)::

    file      := line*
    line      := blank | comment | data
    comment   := '#' text                      metadata or free text
    data      := mult ':' id (',' id)*         whitespace around tokens is ignored
    mult      := [1-9][0-9]*
    id        := [1-9][0-9]*                   1-based candidate id

Recognised metadata comments (case-sensitive keys)::

    # NUMBER ALTERNATIVES: <m>                 required before the first data line
    # ALTERNATIVE NAME <id>: <label>
    # NUMBER VOTERS: <total>                   checked against the data when present
    # NUMBER UNIQUE ORDERS: <count>            checked against the data when present

Every data line must rank all m candidates exactly once.

Election dataset grammar (text, newline terminated)::

    votelearn-elections 1
    <key>=<value> ...                          file header; always has count=<K>
    then K blocks:
    election index=<i> n=<n> m=<m> [alpha0=<a>] [seed=<s>] [utilities=1]
    <n lines of m comma-separated 0-based candidate indices>
    [<n lines of m comma-separated utilities>  only when utilities=1]

Utilities are written with ``repr`` so a reload reproduces every bit.
"""
from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .elections import ElectionSpec, PreferenceProfile, make_rng, rank_order_from_utilities, regime, sample_utilities
from .errors import InvalidParameterError, ParseError

_INT = re.compile(r"[1-9][0-9]*\Z")
_META = re.compile(r"#\s*([A-Z][A-Z ]*?)\s*(\d+)?\s*:\s*(.*)\Z")


@dataclass(frozen=True)
class WeightedProfile:
    m: int
    ballots: tuple  # ((multiplicity, ranking tuple), ...)
    names: tuple = ()

    def __post_init__(self):
        if self.m < 2:
            raise InvalidParameterError(f"need at least 2 candidates, got {self.m}")
        for mult, ranking in self.ballots:
            if mult < 1:
                raise InvalidParameterError(f"multiplicity must be >= 1, got {mult}")
            if sorted(ranking) != list(range(self.m)):
                raise InvalidParameterError(f"ranking {ranking} is not a permutation of 0..{self.m - 1}")
        if self.names and len(self.names) != self.m:
            raise InvalidParameterError(f"{len(self.names)} names for {self.m} candidates")

    @property
    def n_voters(self) -> int:
        return sum(mult for mult, _ in self.ballots)

    def expand(self) -> np.ndarray:
        """All voters' rankings as an (n, m) array, in ballot order."""
        rows = [r for mult, r in self.ballots for _ in range(mult)]
        return np.array(rows, dtype=np.int64).reshape(len(rows), self.m)


def parse_strict_order(text: str) -> WeightedProfile:
    m = None
    names: dict[int, str] = {}
    declared_voters = declared_unique = None
    ballots = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            meta = _META.match(line)
            if meta is None:
                continue
            key, num, value = meta.group(1), meta.group(2), meta.group(3).strip()
            if key == "NUMBER ALTERNATIVES" and num is None:
                if ballots:
                    raise ParseError("alternatives count declared after data lines", lineno)
                if not _INT.match(value) or int(value) < 2:
                    raise ParseError(f"bad alternatives count {value!r}", lineno)
                m = int(value)
            elif key == "ALTERNATIVE NAME" and num is not None:
                names[int(num)] = value
            elif key == "NUMBER VOTERS" and num is None:
                if not _INT.match(value):
                    raise ParseError(f"bad voter count {value!r}", lineno)
                declared_voters = int(value)
            elif key == "NUMBER UNIQUE ORDERS" and num is None:
                if not _INT.match(value):
                    raise ParseError(f"bad unique-order count {value!r}", lineno)
                declared_unique = int(value)
            continue
        if m is None:
            raise ParseError("data line before '# NUMBER ALTERNATIVES:' declaration", lineno)
        head, sep, body = line.partition(":")
        if not sep:
            raise ParseError("data line lacks 'multiplicity:' prefix", lineno)
        head = head.strip()
        if not _INT.match(head):
            raise ParseError(f"malformed multiplicity {head!r}", lineno)
        ranking = []
        for tok in body.split(","):
            tok = tok.strip()
            if not _INT.match(tok):
                if "{" in tok or "}" in tok:
                    raise ParseError("tied ranks are not supported (strict orders only)", lineno)
                raise ParseError(f"malformed candidate id {tok!r}", lineno)
            cid = int(tok)
            if cid > m:
                raise ParseError(f"unknown candidate id {cid} (m={m})", lineno)
            if cid - 1 in ranking:
                raise ParseError(f"duplicate candidate {cid} in ranking", lineno)
            ranking.append(cid - 1)
        if len(ranking) != m:
            raise ParseError(f"incomplete ranking: {len(ranking)} of {m} candidates", lineno)
        ballots.append((int(head), tuple(ranking)))
    if m is None:
        raise ParseError("missing '# NUMBER ALTERNATIVES:' declaration", 1)
    for cid in names:
        if not 1 <= cid <= m:
            raise ParseError(f"name given for unknown candidate id {cid}", 1)
    wp = WeightedProfile(m, tuple(ballots), tuple(names.get(i + 1, str(i + 1)) for i in range(m)) if names else ())
    if declared_voters is not None and declared_voters != wp.n_voters:
        raise ParseError(f"header declares {declared_voters} voters, data has {wp.n_voters}", 1)
    if declared_unique is not None and declared_unique != len(wp.ballots):
        raise ParseError(f"header declares {declared_unique} unique orders, data has {len(wp.ballots)}", 1)
    return wp


def serialize_strict_order(wp: WeightedProfile) -> str:
    lines = [f"# NUMBER ALTERNATIVES: {wp.m}"]
    lines += [f"# ALTERNATIVE NAME {i + 1}: {name}" for i, name in enumerate(wp.names)]
    lines.append(f"# NUMBER VOTERS: {wp.n_voters}")
    lines.append(f"# NUMBER UNIQUE ORDERS: {len(wp.ballots)}")
    lines += [f"{mult}: " + ",".join(str(c + 1) for c in ranking) for mult, ranking in wp.ballots]
    return "\n".join(lines) + "\n"


def read_strict_order(path) -> WeightedProfile:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_strict_order(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc.detail}", exc.lineno) from None


def subsample_election(wp: WeightedProfile, n_voters: int, rng: np.random.Generator) -> PreferenceProfile:
    """Uniform sample of ``n_voters`` distinct voters from the ballot multiset."""
    total = wp.n_voters
    if not 1 <= n_voters <= total:
        raise InvalidParameterError(f"n_voters must be in [1, {total}], got {n_voters}")
    # draw voter slots, then map slot -> ballot through cumulative multiplicities
    slots = np.sort(rng.choice(total, size=n_voters, replace=False))
    bounds = np.cumsum([mult for mult, _ in wp.ballots])
    which = np.searchsorted(bounds, slots, side="right")
    table = np.array([r for _, r in wp.ballots], dtype=np.int64)
    return PreferenceProfile(table[which])


# ---------------------------------------------------------------- datasets

MAGIC = "votelearn-elections 1"


@dataclass
class Election:
    rank_order: np.ndarray
    utilities: np.ndarray | None = None
    alpha0: float | None = None
    seed: int | None = None


@dataclass
class ElectionDataset:
    elections: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.elections)

    @property
    def rank_orders(self) -> list:
        return [e.rank_order for e in self.elections]


def _fmt_meta(meta: dict) -> str:
    for k, v in meta.items():
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", k) or re.search(r"[\s=]", str(v)) or str(v) == "":
            raise InvalidParameterError(f"header entry {k}={v!r} is not a bare token")
    return " ".join(f"{k}={v}" for k, v in meta.items())


def _parse_kv(tokens, lineno) -> dict:
    out = {}
    for tok in tokens:
        k, sep, v = tok.partition("=")
        if not sep or not k or not v:
            raise ParseError(f"expected key=value, got {tok!r}", lineno)
        out[k] = v
    return out


def dumps_dataset(ds: ElectionDataset) -> str:
    out = io.StringIO()
    out.write(MAGIC + "\n")
    out.write(_fmt_meta({"count": len(ds.elections), **{k: v for k, v in ds.meta.items() if k != "count"}}) + "\n")
    for i, e in enumerate(ds.elections):
        r = np.asarray(e.rank_order)
        head = {"index": i, "n": r.shape[0], "m": r.shape[1]}
        if e.alpha0 is not None:
            head["alpha0"] = repr(float(e.alpha0))
        if e.seed is not None:
            head["seed"] = int(e.seed)
        if e.utilities is not None:
            head["utilities"] = 1
        out.write("election " + _fmt_meta(head) + "\n")
        for row in r:
            out.write(",".join(str(int(c)) for c in row) + "\n")
        if e.utilities is not None:
            for row in np.asarray(e.utilities, dtype=np.float64):
                out.write(",".join(repr(float(x)) for x in row) + "\n")
    return out.getvalue()


def loads_dataset(text: str) -> ElectionDataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != MAGIC:
        raise ParseError("not a votelearn election dataset (bad first line)", 1)
    if len(lines) < 2:
        raise ParseError("missing file header", 2)
    meta = _parse_kv(lines[1].split(), 2)
    try:
        count = int(meta.get("count", ""))
    except ValueError:
        raise ParseError("file header lacks an integer count", 2) from None
    pos = 2
    elections = []

    def take(k, what):
        nonlocal pos
        if pos + k > len(lines):
            raise ParseError(f"file ends inside {what}", len(lines))
        block = lines[pos:pos + k]
        pos += k
        return block

    for i in range(count):
        (head,) = take(1, f"election {i} header")
        lineno = pos
        toks = head.split()
        if not toks or toks[0] != "election":
            raise ParseError(f"expected 'election' header, got {head[:40]!r}", lineno)
        h = _parse_kv(toks[1:], lineno)
        try:
            n, m = int(h["n"]), int(h["m"])
            if int(h["index"]) != i:
                raise ParseError(f"election index {h['index']} out of sequence (expected {i})", lineno)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad election header ({exc})", lineno) from None
        if n < 1 or m < 2:
            raise ParseError(f"invalid election size n={n} m={m}", lineno)
        rows = []
        for j, line in enumerate(take(n, f"election {i} rank rows")):
            try:
                row = [int(t) for t in line.split(",")]
            except ValueError:
                raise ParseError(f"non-integer rank row {line[:40]!r}", lineno + 1 + j) from None
            if sorted(row) != list(range(m)):
                raise ParseError(f"rank row is not a permutation of 0..{m - 1}", lineno + 1 + j)
            rows.append(row)
        util = None
        if h.get("utilities") == "1":
            base = pos + 1
            vals = []
            for j, line in enumerate(take(n, f"election {i} utilities")):
                try:
                    row = [float(t) for t in line.split(",")]
                except ValueError:
                    raise ParseError(f"non-numeric utility row {line[:40]!r}", base + j) from None
                if len(row) != m:
                    raise ParseError(f"utility row has {len(row)} entries, expected {m}", base + j)
                vals.append(row)
            util = np.array(vals, dtype=np.float64)
        alpha0 = float(h["alpha0"]) if "alpha0" in h else None
        seed = int(h["seed"]) if "seed" in h else None
        elections.append(Election(np.array(rows, dtype=np.int64), util, alpha0, seed))
    if pos != len(lines):
        raise ParseError(f"{len(lines) - pos} unexpected trailing lines", pos + 1)
    meta.pop("count")
    return ElectionDataset(elections, meta)


def write_dataset(path, ds: ElectionDataset):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_dataset(ds))
    os.replace(tmp, path)


def read_dataset(path) -> ElectionDataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads_dataset(fh.read())


def generate_dataset(spec: ElectionSpec, count: int, with_utilities: bool = True) -> ElectionDataset:
    """``count`` synthetic elections; election i uses its own stream ``make_rng(spec.seed, 3, i)``."""
    elections = []
    for i in range(count):
        rng = make_rng(spec.seed, 3, i)
        n = int(rng.integers(spec.n_min, spec.n_max + 1))
        m = int(rng.integers(spec.m_min, spec.m_max + 1))
        u = sample_utilities(np.full(m, spec.alpha0), (n,), rng)
        elections.append(Election(rank_order_from_utilities(u), u if with_utilities else None, spec.alpha0, spec.seed))
    meta = {"source": "synthetic", "n": f"{spec.n_min}:{spec.n_max}", "m": f"{spec.m_min}:{spec.m_max}",
            "alpha0": repr(float(spec.alpha0)), "regime": regime(spec.alpha0), "seed": spec.seed}
    return ElectionDataset(elections, meta)


def build_eval_dataset(wp: WeightedProfile, count: int, n_range: tuple[int, int], rng: np.random.Generator,
                       sink=None, source: str = "real") -> ElectionDataset:
    """``count`` sub-elections with n uniform on ``n_range``; written to ``sink`` (a path) when given."""
    lo, hi = n_range
    if not 1 <= lo <= hi <= wp.n_voters:
        raise InvalidParameterError(f"n_range {lo}:{hi} must lie within [1, {wp.n_voters}]")
    elections = []
    for _ in range(count):
        n = int(rng.integers(lo, hi + 1))
        elections.append(Election(subsample_election(wp, n, rng).rank_order))
    ds = ElectionDataset(elections, {"source": source, "n": f"{lo}:{hi}", "m": str(wp.m)})
    if sink is not None:
        write_dataset(sink, ds)
    return ds


FIXTURES = ("sushi_like.soc", "mturk_like.soc", "netflix_like.soc")


def fixture_path(name: str) -> str:
    """Path of a bundled strict-order fixture file."""
    if name not in FIXTURES:
        raise InvalidParameterError(f"unknown fixture {name!r}; have {FIXTURES}")
    return os.path.join(os.path.dirname(__file__), "fixtures", name)
