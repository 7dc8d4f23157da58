"""Held-out evaluation: mimicking tables, voter-count buckets, welfare accuracy and ratio histograms.

A *predictor* is any callable mapping an :class:`EvalSet` to an int array of
chosen candidates. Helpers build predictors from networks, classical rules,
score vectors and welfare oracles so they can all be scored on one set.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataio import Election, ElectionDataset
from .elections import ElectionSpec, make_rng, rank_order_from_utilities, sample_utilities
from .encoding import EncodingConfig, decode_rows
from .errors import CapacityError, DistributionDegeneracyError, InvalidParameterError
from .rules import RULES, argmax_with_ties, positional_scores, rule_winners_batch
from .training import EVAL_STREAM, Batch, Target, encode_batch, label, masked_argmax
from .welfare import ScoreVectorCache, WelfareFunction, welfare_ratio, welfare_scores

N_BINS = 50


@dataclass
class EvalSet:
    rank_orders: list
    utilities: list | None
    targets: np.ndarray
    tied: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rank_orders)

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self.rank_orders:
            h.update(np.asarray(r.shape, dtype="<i8").tobytes())
            h.update(np.ascontiguousarray(r, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    def groups(self):
        """Indices grouped by (n, m) shape, in sorted shape order."""
        by: dict[tuple, list[int]] = {}
        for i, r in enumerate(self.rank_orders):
            by.setdefault(r.shape, []).append(i)
        return sorted(by.items())

    def to_dataset(self) -> ElectionDataset:
        utils = self.utilities or [None] * len(self)
        meta = {k: v for k, v in self.meta.items() if isinstance(v, (int, str))}
        return ElectionDataset([Election(r, u) for r, u in zip(self.rank_orders, utils)], meta)


def make_eval_set(spec: ElectionSpec, target: Target, count: int, seed: int = 0,
                  drop_ties: bool | None = None) -> EvalSet:
    """``count`` fresh elections with n and m drawn uniformly per election.

    The stream ``make_rng(seed, EVAL_STREAM, n_min, n_max, m_min, m_max)`` is
    disjoint from every training stream. Tied targets are redrawn when the
    target drops ties in training.
    """
    drop = target.drops_ties if drop_ties is None else drop_ties
    rng = make_rng(seed, EVAL_STREAM, spec.n_min, spec.n_max, spec.m_min, spec.m_max)
    ranks, utils, targets, tied = [], [], [], []
    attempts = 0
    while len(ranks) < count:
        need = count - len(ranks)
        if attempts > 100 * max(count, 1):
            raise DistributionDegeneracyError(f"could not collect {count} untied elections in {attempts} draws")
        attempts += need
        ns = rng.integers(spec.n_min, spec.n_max + 1, size=need)
        ms = rng.integers(spec.m_min, spec.m_max + 1, size=need)
        r_rank, r_util = [None] * need, [None] * need
        r_win = np.zeros(need, dtype=np.int64)
        r_tied = np.zeros(need, dtype=bool)
        for n, m in sorted(set(zip(ns.tolist(), ms.tolist()))):
            idx = np.flatnonzero((ns == n) & (ms == m))
            u = sample_utilities(np.full(m, spec.alpha0), (idx.size, n), rng)
            r = rank_order_from_utilities(u)
            r_win[idx], r_tied[idx] = label(target, u, r)
            for j, i in enumerate(idx):
                r_rank[i], r_util[i] = r[j], u[j]
        for i in range(need):
            if drop and r_tied[i]:
                continue
            ranks.append(r_rank[i])
            utils.append(r_util[i])
            targets.append(r_win[i])
            tied.append(r_tied[i])
    meta = {"target": target.describe(), "seed": seed, "count": count,
            "spec": f"n={spec.n_min}:{spec.n_max} m={spec.m_min}:{spec.m_max} alpha0={spec.alpha0!r}",
            "draws": attempts}
    return EvalSet(ranks, utils, np.asarray(targets, dtype=np.int64), np.asarray(tied, dtype=bool), meta)


def eval_set_from_dataset(ds: ElectionDataset, target: Target, drop_ties: bool | None = None) -> EvalSet:
    """Label file-loaded elections; welfare targets need the utility block."""
    drop = target.drops_ties if drop_ties is None else drop_ties
    if target.kind == "welfare" and any(e.utilities is None for e in ds.elections):
        raise InvalidParameterError("welfare targets need utilities, but the dataset has none")
    es = EvalSet([np.asarray(e.rank_order) for e in ds.elections],
                 [e.utilities for e in ds.elections] if target.kind == "welfare" else None,
                 np.zeros(len(ds), dtype=np.int64), np.zeros(len(ds), dtype=bool),
                 {"target": target.describe(), **{k: str(v) for k, v in ds.meta.items()}})
    for shape, idx in es.groups():
        r = np.stack([es.rank_orders[i] for i in idx])
        u = np.stack([es.utilities[i] for i in idx]) if es.utilities is not None else None
        es.targets[idx], es.tied[idx] = label(target, u, r)
    if drop and es.tied.any():
        keep = np.flatnonzero(~es.tied)
        es = EvalSet([es.rank_orders[i] for i in keep],
                     [es.utilities[i] for i in keep] if es.utilities is not None else None,
                     es.targets[keep], es.tied[keep], {**es.meta, "dropped_ties": int(len(ds) - keep.size)})
    es.meta["dataset"] = es.digest()
    return es


# ------------------------------------------------------------ predictors

def from_model(model, enc: EncodingConfig, chunk: int = 512):
    """Network predictor; elections are batched by voter count."""
    dtype = getattr(getattr(model, "config", None), "dtype", np.float64)

    def predict(es: EvalSet) -> np.ndarray:
        out = np.empty(len(es), dtype=np.int64)
        by_n: dict[int, list[int]] = {}
        for i, r in enumerate(es.rank_orders):
            by_n.setdefault(r.shape[0], []).append(i)
        for _, idx in sorted(by_n.items()):
            for s in range(0, len(idx), chunk):
                part = idx[s:s + chunk]
                b = Batch([es.rank_orders[i] for i in part], [], np.zeros(0), np.zeros(0))
                x, mask = encode_batch(b, enc, dtype)
                out[part] = masked_argmax(model.logits(x), mask)
        return out

    return predict


def from_rule(rule: str):
    def predict(es: EvalSet) -> np.ndarray:
        out = np.empty(len(es), dtype=np.int64)
        for _, idx in es.groups():
            out[idx] = rule_winners_batch(rule, np.stack([es.rank_orders[i] for i in idx]))[0]
        return out

    return predict


def from_score_vectors(vectors: dict):
    """Positional rule with one score vector per candidate count."""
    def predict(es: EvalSet) -> np.ndarray:
        out = np.empty(len(es), dtype=np.int64)
        for (_, m), idx in es.groups():
            scores = positional_scores(np.stack([es.rank_orders[i] for i in idx]), vectors[m])
            out[idx] = argmax_with_ties(scores)[0]
        return out

    return predict


def from_oracle(w: WelfareFunction):
    def predict(es: EvalSet) -> np.ndarray:
        if es.utilities is None:
            raise InvalidParameterError("oracle predictor needs utilities")
        return np.array([int(np.argmax(welfare_scores(u, w))) for u in es.utilities], dtype=np.int64)

    return predict


class PerfectStub:
    """Stand-in network whose logits are the one-hot of a rule's winner.

    It decodes its own (one-hot) input back into ballots, so it exercises the
    whole encode -> forward -> decode path.
    """

    def __init__(self, rule: str, enc: EncodingConfig):
        if rule not in RULES:
            raise InvalidParameterError(f"unknown rule {rule!r}")
        self.rule = rule
        self.enc = enc

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x)
        blocks = x.reshape(x.shape[:-1] + (self.enc.m_max, self.enc.n_c))
        # a candidate slot is live when its one-hot block is non-zero
        ms = blocks[:, 0].any(axis=-1).sum(axis=-1)
        out = np.full((x.shape[0], self.enc.m_max), -1e9)
        for m in np.unique(ms):
            idx = np.flatnonzero(ms == m)
            winners, _ = rule_winners_batch(self.rule, decode_rows(x[idx], int(m), self.enc))
            out[idx, winners] = 1e9
        return out

    def predictor(self):
        def predict(es: EvalSet) -> np.ndarray:
            out = np.empty(len(es), dtype=np.int64)
            for (_, m), idx in es.groups():
                b = Batch([es.rank_orders[i] for i in idx], [], np.zeros(0), np.zeros(0))
                x, mask = encode_batch(b, self.enc)
                out[idx] = masked_argmax(self.logits(x), mask)
            return out

        return predict


class RandomLogits:
    """Chance-level model: i.i.d. normal logits from a seeded stream."""

    def __init__(self, m_max: int, seed: int = 0):
        self.m_max = m_max
        self.rng = make_rng(seed, 99)

    def logits(self, x) -> np.ndarray:
        return self.rng.standard_normal((np.asarray(x).shape[0], self.m_max))


# ------------------------------------------------------------ reports

def wilson_interval(hits: int, total: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if total == 0:
        return (float("nan"), float("nan"))
    p = hits / total
    denom = 1 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def ratio_histogram(ratios: np.ndarray, bins: int = N_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Normalised counts over the bins (e_k, e_k+1] partitioning (0, 1]; a ratio of exactly 0 joins the first bin."""
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.size == 0:
        raise InvalidParameterError("no ratios to histogram")
    if np.any((ratios < 0) | (ratios > 1)):
        raise InvalidParameterError("welfare ratios must lie in [0, 1]")
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip(np.ceil(ratios * bins).astype(np.int64) - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return edges, counts / counts.sum()


def _row(hits: int, total: int, **extra) -> dict:
    lo, hi = wilson_interval(hits, total)
    return {"hits": int(hits), "total": int(total), "accuracy": hits / total if total else float("nan"),
            "ci_low": lo, "ci_high": hi, **extra}


@dataclass
class EvalReport:
    task: str
    rows: dict = field(default_factory=dict)
    buckets: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def accuracy(self, name: str) -> float:
        return self.rows[name]["accuracy"]

    def to_records(self) -> list[dict]:
        recs = [{"kind": "meta", "task": self.task, **self.meta}]
        recs += [{"kind": "accuracy", "name": k, **v} for k, v in self.rows.items()]
        recs += [{"kind": "bucket", "bucket": k, **v} for k, v in self.buckets.items()]
        for name, (edges, masses) in self.histograms.items():
            recs.append({"kind": "histogram", "name": name,
                         "bins": [[float(e), float(p)] for e, p in zip(edges[:-1], masses)]})
        return recs

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    def render(self) -> str:
        lines = [self.task]
        if self.rows:
            width = max(len(k) for k in self.rows)
            lines.append(f"{'':{width}}  accuracy   95% CI            n" + ("   mean ratio" if any(
                "mean_ratio" in v for v in self.rows.values()) else ""))
            for k, v in self.rows.items():
                line = f"{k:{width}}  {v['accuracy']:.4f}   [{v['ci_low']:.4f}, {v['ci_high']:.4f}]  {v['total']:6d}"
                if "mean_ratio" in v:
                    line += f"   {v['mean_ratio']:.4f}"
                lines.append(line)
        for k, v in self.buckets.items():
            if "unavailable" in v:
                lines.append(f"voters {k}: N/A ({v['unavailable']})")
            else:
                lines.append(f"voters {k}: {v['accuracy']:.4f} ({v['hits']}/{v['total']})")
        return "\n".join(lines) + "\n"

    def save(self, prefix: str):
        with open(prefix + ".jsonl", "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())
        with open(prefix + ".txt", "w", encoding="utf-8") as fh:
            fh.write(self.render())


def score(pred: np.ndarray, es: EvalSet) -> dict:
    pred = np.asarray(pred)
    return _row(int((pred == es.targets).sum()), len(es))


def mimic_table(models: dict, spec: ElectionSpec, count: int = 10_000, seed: int = 0,
                eval_spec_for=None) -> EvalReport:
    """Accuracy of each ``(architecture, rule) -> predictor`` entry.

    All entries for one rule share the same evaluation set. ``eval_spec_for``
    optionally maps a rule to its own spec (Kemeny uses m >= 3).
    """
    report = EvalReport("mimic accuracy", meta={"seed": seed, "count": count})
    sets: dict[str, EvalSet] = {}
    for (arch, rule), predict in models.items():
        if rule not in sets:
            rspec = eval_spec_for(rule) if eval_spec_for else spec
            sets[rule] = make_eval_set(rspec, Target("mimic", rule), count, seed)
            report.meta[f"dataset/{rule}"] = sets[rule].digest()
        report.rows[f"{arch}/{rule}"] = score(predict(sets[rule]), sets[rule])
    return report


def voter_bucket_accuracy(predict, target: Target, buckets: list[tuple[int, int]], spec: ElectionSpec,
                          count: int = 10_000, seed: int = 0) -> EvalReport:
    """Accuracy per voter-count bucket with ``count`` elections each; capacity errors become N/A."""
    report = EvalReport(f"voter buckets, {target.describe()}", meta={"seed": seed, "count": count})
    for lo, hi in buckets:
        bspec = ElectionSpec(lo, hi, spec.m_min, spec.m_max, spec.alpha0, spec.seed)
        es = make_eval_set(bspec, target, count, seed)
        key = f"{lo}:{hi}"
        try:
            report.buckets[key] = score(predict(es), es)
        except CapacityError as exc:
            report.buckets[key] = {"unavailable": str(exc), "total": len(es)}
        report.meta[f"dataset/{key}"] = es.digest()
    return report


def welfare_eval(models: dict, welfare: WelfareFunction, spec: ElectionSpec, count: int = 10_000, seed: int = 0,
                 baselines=("plurality", "borda", "copeland", "maximin"), optimal: bool = True,
                 score_cache: ScoreVectorCache | None = None, score_samples: int = 1_000_000,
                 bins: int = N_BINS, eval_set: EvalSet | None = None) -> EvalReport:
    """Accuracy against the welfare oracle plus mean ratio and ratio histogram for every entry.

    ``models`` maps a display name to a predictor; the classical baselines and
    (optionally) the estimated optimal scoring rule are added automatically.
    """
    target = Target("welfare", welfare=welfare)
    es = eval_set if eval_set is not None else make_eval_set(spec, target, count, seed)
    entries = dict(models)
    for rule in baselines:
        entries[rule] = from_rule(rule)
    if optimal:
        cache = score_cache or ScoreVectorCache()
        ms = sorted({r.shape[1] for r in es.rank_orders})
        entries["optimal"] = from_score_vectors({m: cache.get(spec.alpha0, m, score_samples) for m in ms})
    report = EvalReport(f"welfare {welfare.describe()} alpha0={spec.alpha0!r}",
                        meta={"seed": seed, "count": len(es), "dataset": es.digest(), **es.meta})
    for name, predict in entries.items():
        pred = np.asarray(predict(es))
        ratios = np.empty(len(es))
        for _, idx in es.groups():
            u = np.stack([es.utilities[i] for i in idx])
            ratios[idx] = welfare_ratio(pred[idx], u, welfare)
        row = score(pred, es)
        row["mean_ratio"] = float(ratios.mean())
        report.rows[name] = row
        report.histograms[name] = ratio_histogram(ratios, bins)
    return report


def real_data_eval(predict, rule: str, ds: ElectionDataset, m_max: int) -> EvalReport:
    """Mimicking accuracy on file-loaded sub-elections."""
    too_big = [e.rank_order.shape[1] for e in ds.elections if e.rank_order.shape[1] > m_max]
    if too_big:
        raise CapacityError(f"dataset has {max(too_big)} candidates, model handles at most {m_max}")
    es = eval_set_from_dataset(ds, Target("mimic", rule))
    report = EvalReport(f"real data, mimic:{rule}", meta={"dataset": es.digest(), **es.meta})
    report.rows[rule] = score(predict(es), es)
    return report
