"""Command-line entry point: ``votelearn {gen,solve,train,eval,optimal-score,bench}``.

Every subcommand writes into ``<out-dir>/<name>/`` (``--out-dir`` defaults to
``$VOTELEARN_OUT`` or ``./runs``) and records its fully resolved settings in
``config.txt`` there. Settings may also come from a flat ``key = value`` file
given with ``--config``; command-line flags win over the file.

Exit codes: 0 success, 1 usage or parameter error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import InvalidParameterError, ParseError, VoteLearnError

OUT_ENV = "VOTELEARN_OUT"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *a, **kw):
        # a typo must not silently select a longer flag (--n vs --name)
        kw.setdefault("allow_abbrev", False)
        super().__init__(*a, **kw)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def int_range(text: str) -> tuple[int, int]:
    lo, sep, hi = str(text).partition(":")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None


def bucket_list(text: str) -> list[tuple[int, int]]:
    return [int_range(t) for t in str(text).split(",") if t]


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys use flag spelling (dashes or underscores)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ParseError(f"{path}: expected key = value", lineno)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _common(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--out-dir", default=None, help=f"output root (default ${OUT_ENV} or ./runs)")
    p.add_argument("--name", default=None, help="run directory name under the output root")
    p.add_argument("--workers", type=int, default=1, help="worker threads (1 is the determinism reference)")


def _spec_flags(p, n="2:20", m="2:5"):
    p.add_argument("--n", type=int_range, default=n, help="voter count range lo:hi")
    p.add_argument("--m", type=int_range, default=m, help="candidate count range lo:hi")
    p.add_argument("--alpha", type=float, default=1.0, help="symmetric Dirichlet parameter alpha0")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="votelearn", description="Learn and evaluate voting rules.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="generate an election dataset")
    _common(p)
    _spec_flags(p)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--no-utilities", action="store_true", help="omit the utility block")
    p.add_argument("--from-soc", default=None, help="sample sub-elections from a strict-order ballot file instead")
    p.add_argument("--output", default="elections.txt")

    p = sub.add_parser("solve", help="apply a voting rule to every election in a file")
    _common(p)
    p.add_argument("--rule", default=None)
    p.add_argument("--input", default=None, help="election dataset or strict-order ballot file")
    p.add_argument("--output", default="winners.jsonl")
    p.add_argument("--n", type=int_range, default="2:20", help="sub-election voter range for ballot files")
    p.add_argument("--count", type=int, default=1000, help="sub-elections drawn from a ballot file")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a network on a mimicking or welfare target")
    _common(p)
    _spec_flags(p, m=None)
    p.add_argument("--target", default=None,
                   help="mimic:<rule> | welfare:utilitarian | welfare:rawlsian | welfare:egalitarian[:lambda]")
    p.add_argument("--arch", default="deepsets", choices=["deepsets", "gin", "set_transformer", "mlp"])
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", default=None, choices=["adam", "lookahead"])
    p.add_argument("--warmup", type=int, default=160)
    p.add_argument("--clip", type=float, default=1.0)
    p.add_argument("--log-every", type=int, default=200)
    p.add_argument("--checkpoint-every", type=int, default=2000)
    p.add_argument("--width", type=int, default=None, help="hidden width")
    p.add_argument("--precision", default="float32", choices=["float32", "float64"])
    p.add_argument("--scheme", default="one_hot", choices=["one_hot", "integer"])
    p.add_argument("--m-max", type=int, default=None, help="encoder candidate capacity (default: top of --m)")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--stop-at", type=int, default=None, help="halt at this step, keeping the full schedule")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _common(p)
    _spec_flags(p, m=None)
    p.add_argument("--checkpoint", default=None, help="model.ckpt path, or stub:<rule> for a perfect stub")
    p.add_argument("--target", default=None, help="defaults to the checkpoint's training target")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--buckets", type=bucket_list, default=None, help="voter buckets, e.g. 2:20,21:40")
    p.add_argument("--dataset", default=None, help="election dataset or strict-order ballot file")
    p.add_argument("--subsample", type=int, default=1000, help="sub-elections drawn from a ballot file")
    p.add_argument("--score-samples", type=int, default=1_000_000)

    p = sub.add_parser("optimal-score", help="Monte-Carlo optimal score vector")
    _common(p)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="throughput of rule solvers and forward passes")
    _common(p)
    p.add_argument("--batch", type=int, default=2000)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    return ap


def parse(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        raise UsageError("votelearn: a subcommand is required (gen, solve, train, eval, optimal-score, bench)")
    if args.config:
        cfg = read_config_file(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known - {"config"})
        if unknown:
            raise UsageError(f"unknown key(s) in {args.config}: {', '.join(unknown)}")
        sub.set_defaults(**{k: v for k, v in cfg.items() if k != "config"})
        args = ap.parse_args(argv)
        # store_true flags arrive as text from a file
        for k, v in vars(args).items():
            if isinstance(v, str) and v.lower() in ("true", "false") and k in cfg:
                setattr(args, k, v.lower() == "true")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if getattr(args, "output", None):
        _inside("", args.output)  # reject escaping paths before anything is created
    return args


def run_dir(args) -> str:
    root = args.out_dir or os.environ.get(OUT_ENV) or "runs"
    name = args.name or f"{args.command}-{getattr(args, 'seed', 0)}"
    if os.path.isabs(name) or ".." in name.replace("\\", "/").split("/"):
        raise UsageError("--name must be a relative path inside the output root")
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    return path


def _inside(base: str, rel: str) -> str:
    if os.path.isabs(rel) or ".." in rel.replace("\\", "/").split("/"):
        raise UsageError(f"output file {rel!r} must stay inside the run directory")
    return os.path.join(base, rel)


def write_resolved(path: str, args, extra: dict | None = None):
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}
    items.update(extra or {})
    with open(os.path.join(path, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"# votelearn {__version__} resolved settings for '{args.command}'\n")
        for k, v in items.items():
            if isinstance(v, tuple):
                v = f"{v[0]}:{v[1]}"
            elif isinstance(v, list):
                v = ",".join(f"{a}:{b}" for a, b in v)
            fh.write(f"{k} = {v}\n")


def _spec(args, m_default=(2, 5)):
    from .elections import ElectionSpec

    m = args.m or m_default
    return ElectionSpec(args.n[0], args.n[1], m[0], m[1], args.alpha, args.seed)


def _load_elections(path: str, args):
    """An election dataset, or sub-elections drawn from a strict-order ballot file."""
    from .dataio import MAGIC, build_eval_dataset, read_dataset, read_strict_order
    from .elections import make_rng

    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if first == MAGIC:
        return read_dataset(path)
    wp = read_strict_order(path)
    n_lo, n_hi = getattr(args, "n", (2, 20))
    count = getattr(args, "subsample", None) or getattr(args, "count", 1000)
    n_hi = min(n_hi, wp.n_voters)
    return build_eval_dataset(wp, count, (min(n_lo, n_hi), n_hi), make_rng(args.seed, 4), source=os.path.basename(path))


def cmd_gen(args) -> int:
    from .dataio import ElectionDataset, generate_dataset, write_dataset
    from .elections import ElectionSpec

    out = run_dir(args)
    if args.count < 0:
        raise InvalidParameterError("--count must be >= 0")
    target = _inside(out, args.output)
    if args.from_soc:
        ds = _load_elections(args.from_soc, args)
    else:
        spec = _spec(args)
        if args.workers == 1:
            ds = generate_dataset(spec, args.count, not args.no_utilities)
        else:
            # each election owns its stream, so the chunked result is identical
            bounds = np.linspace(0, args.count, args.workers + 1).astype(int)
            with ThreadPoolExecutor(args.workers) as pool:
                parts = list(pool.map(lambda ab: _gen_range(spec, *ab, not args.no_utilities),
                                      zip(bounds[:-1], bounds[1:])))
            ds = ElectionDataset([e for p in parts for e in p], generate_dataset(spec, 0).meta)
    write_dataset(target, ds)
    write_resolved(out, args)
    print(f"wrote {len(ds)} elections to {target}")
    return EXIT_OK


def _gen_range(spec, a, b, with_utilities):
    from .dataio import Election
    from .elections import make_rng, rank_order_from_utilities, sample_utilities

    out = []
    for i in range(a, b):
        rng = make_rng(spec.seed, 3, i)
        n = int(rng.integers(spec.n_min, spec.n_max + 1))
        m = int(rng.integers(spec.m_min, spec.m_max + 1))
        u = sample_utilities(np.full(m, spec.alpha0), (n,), rng)
        out.append(Election(rank_order_from_utilities(u), u if with_utilities else None, spec.alpha0, spec.seed))
    return out


def cmd_solve(args) -> int:
    from .elections import PreferenceProfile
    from .rules import RULES, kemeny_exact, pairwise_matrix, rule_winner

    if not args.rule or not args.input:
        raise UsageError("solve needs --rule and --input")
    if args.rule not in RULES:
        raise UsageError(f"--rule must be one of {', '.join(RULES)}")
    ds = _load_elections(args.input, args)
    out = run_dir(args)
    lines = []
    for i, e in enumerate(ds.elections):
        profile = PreferenceProfile(e.rank_order)
        res = rule_winner(args.rule, profile)
        rec = {"index": i, "n": profile.n, "m": profile.m, "winner": res.winner, "tied": bool(res.tied)}
        if args.rule == "kemeny":
            k = kemeny_exact(pairwise_matrix(profile))
            rec["objective"] = k.objective
            rec["ranking"] = [int(c) for c in k.ranking]
        else:
            rec["scores"] = [float(s) for s in res.per_candidate]
        lines.append(json.dumps(rec))
    with open(_inside(out, args.output), "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    write_resolved(out, args)
    sys.stdout.write("".join(line + "\n" for line in lines))
    return EXIT_OK


def _task_from_args(args):
    from .encoding import EncodingConfig
    from .training import Target, default_task

    target = Target.parse(args.target)
    kemeny = target.kind == "mimic" and target.rule == "kemeny"
    spec = _spec(args, (3, 5) if kemeny else (2, 5))
    enc = EncodingConfig(m_max=args.m_max or spec.m_max, scheme=args.scheme, n_max=spec.n_max)
    kw = {"precision": args.precision}
    if args.width:
        kw["hidden_width"] = args.width
    overrides = dict(model_kw=kw, batch_size=args.batch_size, lr=args.lr, warmup=args.warmup, clip=args.clip,
                     log_every=args.log_every, checkpoint_every=args.checkpoint_every, seed=args.seed)
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.optimizer:
        overrides["optimizer"] = args.optimizer
    return default_task(target, args.arch, spec=spec, encoding=enc, **overrides)


def cmd_train(args) -> int:
    from .training import train

    if not args.target:
        raise UsageError("train needs --target (e.g. --target mimic:plurality)")
    task = _task_from_args(args)
    out = run_dir(args)
    write_resolved(out, args, {"resolved_task": json.dumps(task.to_dict(), sort_keys=True)})

    def echo(rec):
        print(f"step {rec['step']:6d}  loss {rec['loss']:.4f}  acc {rec['acc']:.4f}  lr {rec['lr']:.2e}", flush=True)

    res = train(task, out_dir=out, resume=args.resume, stop_at=args.stop_at, on_log=echo)
    print(f"checkpoint: {res.checkpoint} (step {res.final_step})")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .elections import ElectionSpec
    from .encoding import EncodingConfig
    from .evaluation import (PerfectStub, eval_set_from_dataset, from_model, make_eval_set, real_data_eval, score,
                             EvalReport, voter_bucket_accuracy, welfare_eval)
    from .nn.checkpoint import load_checkpoint
    from .training import Target, TrainingTask
    from .welfare import ScoreVectorCache

    if not args.checkpoint:
        raise UsageError("eval needs --checkpoint (a model.ckpt path or stub:<rule>)")
    out = run_dir(args)
    ckpt_id = args.checkpoint
    if args.checkpoint.startswith("stub:"):
        rule = args.checkpoint[5:]
        m = args.m or (2, 5)
        enc = EncodingConfig(m_max=m[1], n_max=args.n[1])
        predict = PerfectStub(rule, enc).predictor()
        target = Target.parse(args.target or f"mimic:{rule}")
        spec = _spec(args)
    else:
        import hashlib

        model, _, meta = load_checkpoint(args.checkpoint)
        with open(args.checkpoint, "rb") as fh:
            ckpt_id = hashlib.sha256(fh.read()).hexdigest()[:16]
        task = TrainingTask.from_dict(meta["task"])
        enc = task.encoding
        predict = from_model(model, enc)
        target = Target.parse(args.target) if args.target else task.target
        m = args.m or (task.spec.m_min, task.spec.m_max)
        spec = ElectionSpec(args.n[0], args.n[1], m[0], m[1], args.alpha, args.seed)
    reports = []
    if args.dataset:
        ds = _load_elections(args.dataset, args)
        if target.kind == "mimic":
            reports.append(real_data_eval(predict, target.rule, ds, enc.m_max))
        else:
            es = eval_set_from_dataset(ds, target)
            reports.append(welfare_eval({"model": predict}, target.welfare, spec, eval_set=es,
                                        score_cache=ScoreVectorCache(os.path.join(out, "score_cache.txt")),
                                        score_samples=args.score_samples))
    elif args.buckets:
        reports.append(voter_bucket_accuracy(predict, target, args.buckets, spec, args.count, args.seed))
    elif target.kind == "welfare":
        reports.append(welfare_eval({"model": predict}, target.welfare, spec, args.count, args.seed,
                                    score_cache=ScoreVectorCache(os.path.join(out, "score_cache.txt")),
                                    score_samples=args.score_samples))
    else:
        es = make_eval_set(spec, target, args.count, args.seed)
        rep = EvalReport(f"mimic accuracy, {target.describe()}", meta={"seed": args.seed, **es.meta,
                                                                      "dataset": es.digest()})
        rep.rows["model"] = score(predict(es), es)
        reports.append(rep)
    for rep in reports:
        rep.meta["checkpoint"] = ckpt_id
        rep.save(os.path.join(out, "report"))
        sys.stdout.write(rep.render())
    write_resolved(out, args)
    return EXIT_OK


def cmd_optimal_score(args) -> int:
    from .welfare import ScoreVectorCache, expected_uniform_order_stats

    if args.m < 2 or args.samples < 1:
        raise InvalidParameterError("--m must be >= 2 and --samples >= 1")
    out = run_dir(args)
    cache = ScoreVectorCache(os.path.join(out, "score_cache.txt"))
    vec = cache.get(args.alpha, args.m, args.samples, args.seed)
    print("estimate:    " + " ".join(f"{x:.6f}" for x in vec))
    if args.alpha == 1.0:
        print("closed form: " + " ".join(f"{x:.6f}" for x in expected_uniform_order_stats(args.m)))
    write_resolved(out, args)
    return EXIT_OK


def cmd_bench(args) -> int:
    from . import _accel
    from .elections import make_rng, rank_order_from_utilities, sample_utilities
    from .nn.models import ModelConfig, build_model
    from .rules import RULES, rule_winners_batch

    out = run_dir(args)
    rng = make_rng(args.seed, 5)
    ranks = rank_order_from_utilities(sample_utilities(np.ones(args.m), (args.batch, args.n), rng))
    rows = []
    for rule in RULES:
        rule_winners_batch(rule, ranks[:2])  # compile / warm up
        best = min(_timed(lambda: rule_winners_batch(rule, ranks)) for _ in range(args.repeat))
        rows.append({"what": f"rule/{rule}", "backend": _accel.BACKEND, "seconds": best,
                     "per_second": args.batch / best})
    x = np.zeros((256, args.n, args.m * args.m))
    x[..., ::args.m + 1] = 1.0
    for arch in ("deepsets", "gin", "set_transformer", "mlp"):
        model = build_model(ModelConfig(architecture=arch, input_dim=args.m * args.m, output_dim=args.m,
                                        hidden_width=64, n_max=max(20, args.n)))
        best = min(_timed(lambda: model.logits(x)) for _ in range(args.repeat))
        rows.append({"what": f"forward/{arch}", "backend": "numpy", "seconds": best, "per_second": 256 / best})
    with open(os.path.join(out, "bench.jsonl"), "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    for r in rows:
        print(f"{r['what']:26s} {r['backend']:6s} {r['per_second']:12.0f} elections/s")
    write_resolved(out, args)
    return EXIT_OK


def _timed(fn) -> float:
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "train": cmd_train, "eval": cmd_eval,
            "optimal-score": cmd_optimal_score, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VoteLearnError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
