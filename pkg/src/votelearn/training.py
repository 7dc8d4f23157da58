"""Supervised learning of voting rules from synthetic elections.

Each step samples a batch of elections that share one voter count, labels
them with either a classical rule (mimicking) or a utility oracle (welfare
maximisation), and takes one clipped optimizer step on the masked
cross-entropy between the network's candidate logits and the labels.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .elections import ElectionSpec, make_rng, rank_order_from_utilities, sample_utilities
from .encoding import EncodingConfig, encode_rank_orders
from .errors import DistributionDegeneracyError, InvalidParameterError, NonFiniteError
from .nn import checkpoint as ckpt
from .nn.models import Model, ModelConfig, build_model
from .nn.optim import clip_grad_norm, cosine_warmup_lr, make_optimizer
from .nn.tensor import cross_entropy
from .rules import KEMENY_CAP, RULES, rule_winners_batch
from .welfare import WelfareFunction, oracle_winners_batch

# spawn keys of the seeded sub-streams
DATA_STREAM, EVAL_STREAM = 1, 2


@dataclass(frozen=True)
class Target:
    """What the network is trained to predict: a rule's winner or a welfare oracle's winner."""

    kind: str = "mimic"  # "mimic" | "welfare"
    rule: str = "plurality"
    welfare: WelfareFunction = field(default_factory=WelfareFunction)

    def __post_init__(self):
        if self.kind not in ("mimic", "welfare"):
            raise InvalidParameterError(f"target kind must be mimic or welfare, got {self.kind!r}")
        if self.kind == "mimic" and self.rule not in RULES:
            raise InvalidParameterError(f"unknown rule {self.rule!r}")

    @classmethod
    def parse(cls, text: str) -> "Target":
        """``mimic:borda``, ``welfare:utilitarian``, ``welfare:egalitarian:-1``, or a bare rule name."""
        parts = text.split(":")
        if len(parts) == 1 and parts[0] in RULES:
            return cls("mimic", parts[0])
        if parts[0] == "mimic" and len(parts) == 2:
            return cls("mimic", parts[1])
        if parts[0] == "welfare" and len(parts) in (2, 3):
            lam = float(parts[2]) if len(parts) == 3 else -1.0
            return cls("welfare", welfare=WelfareFunction(parts[1], lam))
        raise InvalidParameterError(f"cannot parse target {text!r}")

    def describe(self) -> str:
        if self.kind == "mimic":
            return f"mimic:{self.rule}"
        if self.welfare.kind == "egalitarian":
            return f"welfare:egalitarian:{self.welfare.lam:g}"
        return f"welfare:{self.welfare.kind}"

    @property
    def drops_ties(self) -> bool:
        # Kemeny ties are kept: the solver's lowest-index tie-break is the label
        return not (self.kind == "mimic" and self.rule == "kemeny")


def label(target: Target, utilities: np.ndarray, rank_order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Winners and tie flags for a stack of same-shape elections (B, n, m)."""
    if target.kind == "mimic":
        return rule_winners_batch(target.rule, rank_order)
    return oracle_winners_batch(utilities, target.welfare)


def make_target(target, u, profile):
    """Label for one election, or ``None`` when the election must be skipped as tied.

    ``target`` is a :class:`Target` or a :class:`TrainingTask`.
    """
    target = getattr(target, "target", target)
    winners, tied = label(target, u.values[None], profile.rank_order[None])
    if tied[0] and target.drops_ties:
        return None
    return int(winners[0])


@dataclass
class Batch:
    rank_orders: list  # one (n, m_b) array per election
    utilities: list
    targets: np.ndarray
    tied: np.ndarray

    @property
    def n(self) -> int:
        return self.rank_orders[0].shape[0]

    def __len__(self):
        return len(self.rank_orders)


def sample_labelled(spec: ElectionSpec, target: Target, n: int, count: int, rng: np.random.Generator,
                    max_attempts: int | None = None) -> Batch:
    """``count`` labelled elections with ``n`` voters each; tied ones are redrawn when the target drops ties.

    Elections are drawn in rounds: each round samples one candidate count per
    missing slot, labels the round grouped by candidate count, and keeps the
    usable elections in draw order.
    """
    max_attempts = 100 * count if max_attempts is None else max_attempts
    ranks, utils, targets, tied = [], [], [], []
    attempts = 0
    while len(ranks) < count:
        need = count - len(ranks)
        if attempts + need > max_attempts and attempts > 0:
            raise DistributionDegeneracyError(
                f"only {len(ranks)} of {count} untied elections after {attempts} draws; "
                f"the target {target.describe()} ties too often for this election spec")
        attempts += need
        ms = rng.integers(spec.m_min, spec.m_max + 1, size=need)
        round_rank = [None] * need
        round_util = [None] * need
        round_win = np.zeros(need, dtype=np.int64)
        round_tied = np.zeros(need, dtype=bool)
        for m in np.unique(ms):
            idx = np.flatnonzero(ms == m)
            u = sample_utilities(np.full(int(m), spec.alpha0), (idx.size, n), rng)
            r = rank_order_from_utilities(u)
            w, t = label(target, u, r)
            round_win[idx], round_tied[idx] = w, t
            for j, i in enumerate(idx):
                round_rank[i], round_util[i] = r[j], u[j]
        for i in range(need):
            if round_tied[i] and target.drops_ties:
                continue
            ranks.append(round_rank[i])
            utils.append(round_util[i])
            targets.append(round_win[i])
            tied.append(round_tied[i])
    return Batch(ranks, utils, np.asarray(targets, dtype=np.int64), np.asarray(tied, dtype=bool))


def encode_batch(batch: Batch, enc: EncodingConfig, dtype=np.float64) -> tuple[np.ndarray, np.ndarray]:
    """Stack a same-n batch into network input (B, n, D) and a candidate mask (B, m_max)."""
    B = len(batch)
    x = np.zeros((B, batch.n, enc.row_width), dtype=dtype)
    mask = np.zeros((B, enc.m_max), dtype=bool)
    by_m: dict[int, list[int]] = {}
    for i, r in enumerate(batch.rank_orders):
        by_m.setdefault(r.shape[1], []).append(i)
    for m, idx in by_m.items():
        x[idx] = encode_rank_orders(np.stack([batch.rank_orders[i] for i in idx]), enc, dtype)
        mask[idx, :m] = True
    return x, mask


def masked_argmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.argmax(np.where(mask, logits, -np.inf), axis=-1)


@dataclass(frozen=True)
class TrainingTask:
    target: Target = field(default_factory=Target)
    spec: ElectionSpec = field(default_factory=ElectionSpec)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    steps: int = 20_000
    batch_size: int = 64
    optimizer: str = "lookahead"
    lr: float = 1e-3
    warmup: int = 160
    clip: float = 1.0
    log_every: int = 200
    checkpoint_every: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidParameterError("steps must be >= 1")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")
        if self.target.kind == "mimic" and self.target.rule == "kemeny" and self.spec.m_max > KEMENY_CAP:
            raise InvalidParameterError(f"Kemeny targets need m_max <= {KEMENY_CAP}")
        if self.spec.m_max > self.encoding.m_max:
            raise InvalidParameterError("election spec allows more candidates than the encoding holds")
        if self.model.input_dim != self.encoding.row_width or self.model.output_dim != self.encoding.m_max:
            raise InvalidParameterError("model input/output dims do not match the encoding")
        if self.model.architecture == "mlp" and self.model.n_max < self.spec.n_max:
            raise InvalidParameterError("MLP n_max is smaller than the largest training election")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target"] = self.target.describe()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingTask":
        return cls(
            target=Target.parse(d["target"]),
            spec=ElectionSpec(**d["spec"]),
            encoding=EncodingConfig(**d["encoding"]),
            model=ModelConfig.from_dict(d["model"]),
            **{k: d[k] for k in ("steps", "batch_size", "optimizer", "lr", "warmup", "clip", "log_every",
                                "checkpoint_every", "seed")
               if k in d},
        )

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def default_task(target: str | Target, architecture: str = "deepsets", **overrides) -> TrainingTask:
    """Desk-scale task: voters 2-20, candidates 2-5 (3-5 for Kemeny), one-hot ids."""
    target = Target.parse(target) if isinstance(target, str) else target
    spec = overrides.pop("spec", None) or ElectionSpec(
        n_min=2, n_max=20, m_min=3 if target.kind == "mimic" and target.rule == "kemeny" else 2, m_max=5)
    enc = overrides.pop("encoding", None) or EncodingConfig(m_max=spec.m_max, n_max=spec.n_max)
    model_kw = overrides.pop("model_kw", {})
    width = {"deepsets": 112, "gin": 128, "set_transformer": 96, "mlp": 128}[architecture]
    model = overrides.pop("model", None) or ModelConfig(
        architecture=architecture, input_dim=enc.row_width, output_dim=enc.m_max,
        hidden_width=model_kw.pop("hidden_width", width), n_max=enc.n_max,
        precision=model_kw.pop("precision", "float32"), **model_kw)
    optimizer = overrides.pop("optimizer", "lookahead" if architecture == "deepsets" else "adam")
    # the MLP baseline learns more slowly and gets three times the step budget
    steps = overrides.pop("steps", 60_000 if architecture == "mlp" else 20_000)
    return TrainingTask(target=target, spec=spec, encoding=enc, model=model, optimizer=optimizer,
                        steps=steps, **overrides)


@dataclass
class TrainResult:
    model: Model
    log: list
    final_step: int
    checkpoint: str | None = None


def train(task: TrainingTask, out_dir: str | None = None, resume: str | None = None,
          stop_at: int | None = None, on_log=None) -> TrainResult:
    """Run the training loop.

    ``out_dir`` receives ``model.ckpt``, ``train_log.jsonl`` and ``task.json``.
    ``resume`` continues from a checkpoint written by this function (step
    counter, optimizer slots, learning-rate schedule and data stream are all
    restored, so a resumed run matches an uninterrupted one). ``stop_at``
    ends the run early at that step while keeping the full-length schedule.
    """
    model = build_model(task.model, seed=task.seed)
    opt = make_optimizer(task.optimizer, model.params, task.lr)
    rng = make_rng(task.seed, DATA_STREAM)
    start = 0
    if resume is not None:
        loaded, opt_state, meta = ckpt.load_checkpoint(resume)
        if meta.get("task_fingerprint") != task.fingerprint():
            raise InvalidParameterError("checkpoint was written by a different training task")
        for k, p in model.params.items():
            p.data = loaded.params[k].data
        if opt_state:
            opt.load_state(opt_state)
        rng.bit_generator.state = meta["rng_state"]
        start = int(meta["step"])

    end = task.steps if stop_at is None else min(stop_at, task.steps)
    ckpt_path = None
    log_fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt_path = os.path.join(out_dir, "model.ckpt")
        with open(os.path.join(out_dir, "task.json"), "w", encoding="utf-8") as fh:
            json.dump(task.to_dict(), fh, indent=2, sort_keys=True)
        log_fh = open(os.path.join(out_dir, "train_log.jsonl"), "a" if resume else "w", encoding="utf-8")

    def save(step):
        if ckpt_path is None:
            return
        bad = [k for k, p in model.params.items() if not np.all(np.isfinite(p.data))]
        if bad:
            # never overwrite the last good checkpoint with a poisoned one
            raise NonFiniteError(f"non-finite parameters at step {step}: {bad[:5]}")
        meta = {"step": step, "rng_state": rng.bit_generator.state,
                "task_fingerprint": task.fingerprint(), "task": task.to_dict()}
        ckpt.save_checkpoint(ckpt_path, model, opt, meta)

    log = []
    t0 = time.perf_counter()
    loss_sum, hits, seen, steps_in = 0.0, 0, 0, 0
    dtype = task.model.dtype
    try:
        for step in range(start, end):
            lr = cosine_warmup_lr(step, task.lr, task.warmup, task.steps)
            n = int(rng.integers(task.spec.n_min, task.spec.n_max + 1))
            batch = sample_labelled(task.spec, task.target, n, task.batch_size, rng)
            x, mask = encode_batch(batch, task.encoding, dtype)
            model.zero_grad()
            logits = model.forward(x)
            loss = cross_entropy(logits, batch.targets, mask)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NonFiniteError(f"loss became {value} at step {step}")
            loss.backward()
            clip_grad_norm(model.params, task.clip)
            opt.step(lr)
            loss_sum += value
            steps_in += 1
            hits += int((masked_argmax(logits.data, mask) == batch.targets).sum())
            seen += len(batch)
            done = step + 1
            if done % task.log_every == 0 or done == end:
                rec = {"step": done, "loss": loss_sum / steps_in,
                       "acc": hits / max(1, seen), "lr": lr, "wall": time.perf_counter() - t0}
                log.append(rec)
                if log_fh is not None:
                    log_fh.write(json.dumps(rec) + "\n")
                    log_fh.flush()
                if on_log is not None:
                    on_log(rec)
                loss_sum, hits, seen, steps_in = 0.0, 0, 0, 0
            if task.checkpoint_every and done % task.checkpoint_every == 0 and done != end:
                save(done)
        save(end)
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model, log, end, ckpt_path)


def evaluate_checkpoint(model, task: TrainingTask, n_eval: int, seed: int | None = None,
                        spec: ElectionSpec | None = None, dataset=None) -> float:
    """Accuracy on ``n_eval`` fresh elections from a stream disjoint from training, or on ``dataset``."""
    from .evaluation import eval_set_from_dataset, from_model, make_eval_set

    if dataset is not None:
        es = eval_set_from_dataset(dataset, task.target)
    else:
        es = make_eval_set(spec or task.spec, task.target, n_eval, task.seed if seed is None else seed)
    return float((from_model(model, task.encoding)(es) == es.targets).mean())


def with_steps(task: TrainingTask, steps: int) -> TrainingTask:
    return replace(task, steps=steps)


def train_cached(task: TrainingTask, cache_root: str, force: bool = False, on_log=None) -> tuple[Model, list]:
    """Train once per task fingerprint and reuse the checkpoint afterwards.

    Training is deterministic for a given task, so a cached checkpoint is the
    model a fresh run would produce. ``force`` retrains and overwrites.
    """
    out = os.path.join(cache_root, f"{task.target.describe().replace(':', '-')}-{task.fingerprint()}")
    path = os.path.join(out, "model.ckpt")
    if not force and os.path.exists(path):
        model, _, meta = ckpt.load_checkpoint(path)
        if meta.get("task_fingerprint") == task.fingerprint() and int(meta.get("step", -1)) == task.steps:
            log_path = os.path.join(out, "train_log.jsonl")
            log = []
            if os.path.exists(log_path):
                with open(log_path, encoding="utf-8") as fh:
                    log = [json.loads(line) for line in fh if line.strip()]
            return model, log
    res = train(task, out_dir=out, on_log=on_log)
    return res.model, res.log
