"""Command-line interface.

Subcommands: embed-check, train, query, eval, sweep, repl.  Exit codes:
0 on success, 1 for domain or runtime failures, 2 for usage and query
parse errors.  The environment variable SETCSE_SEED, when set, overrides
any --seed flag.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .errors import QueryParseError, SetCseError, ValidationError
from .evaluation import (
    EvalConfig,
    EvalReport,
    eval_difference,
    eval_intersection,
    eval_serial_difference,
    eval_serial_intersection,
    eval_serial_mixed,
    report_to_dict,
    reports_to_table,
    sweep_n_sample,
    sweep_to_csv,
)
from .geometry import apply_adapter
from .operations import RankedResult
from .query import evaluate_query, parse_query
from .store import (
    AdapterCheckpoint,
    Corpus,
    EmbeddingMatrix,
    load_adapter,
    load_corpus,
    load_sets,
    read_embeddings,
    save_adapter,
)
from .training import TrainConfig, train_adapter

TEXT_LIMIT = 120


def _seed_from_env(flag_value: int) -> int:
    env = os.environ.get("SETCSE_SEED")
    if env is None:
        return flag_value
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"SETCSE_SEED must be an integer, got {env!r}") from None


def _max_negatives(raw: str) -> int | str:
    if raw == "all":
        return "all"
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError('expected a positive integer or "all"') from None
    if value < 1:
        raise argparse.ArgumentTypeError('expected a positive integer or "all"')
    return value


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float, default=0.05, help="loss temperature (default 0.05)")
    p.add_argument("--epochs", type=int, default=60, help="training epochs (default 60)")
    p.add_argument("--lr", type=float, default=0.003, help="learning rate (default 0.003)")
    p.add_argument("--momentum", type=float, default=0.9, help="momentum in [0,1) (default 0.9)")
    p.add_argument(
        "--max-negatives",
        type=_max_negatives,
        default="all",
        help='negatives sampled per anchor per epoch, or "all" (default)',
    )
    p.add_argument("--seed", type=int, default=0, help="RNG seed (SETCSE_SEED overrides)")


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        tau=args.tau,
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=_seed_from_env(args.seed),
        max_negatives_per_anchor=args.max_negatives,
        momentum=args.momentum,
    )


def _truncate(text: str) -> str:
    if len(text) <= TEXT_LIMIT:
        return text
    return text[: TEXT_LIMIT - 1] + "…"


def _print_ranked(
    result: RankedResult, corpus: Corpus, fmt: str, out: TextIO
) -> None:
    if fmt == "json":
        payload = [
            {
                "id": e.id,
                "score": e.score,
                "rank": rank,
                "text": corpus.by_id(e.id).text,
            }
            for rank, e in enumerate(result.entries, start=1)
        ]
        out.write(json.dumps(payload) + "\n")
    else:
        for e in result.entries:
            out.write(f"{e.id}\t{e.score:.6f}\t{_truncate(corpus.by_id(e.id).text)}\n")


def cmd_embed_check(args: argparse.Namespace) -> int:
    matrix = read_embeddings(args.embeddings)
    print(f"ok: {len(matrix)} rows, dim {matrix.dim}")
    if args.corpus:
        corpus = load_corpus(args.corpus)
        corpus_ids = [s.id for s in corpus]
        if corpus_ids != list(matrix.ids):
            raise ValidationError(
                f"embedding ids do not match corpus order "
                f"({len(matrix)} rows vs {len(corpus)} sentences)"
            )
        print("ok: ids aligned with corpus order")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = read_embeddings(args.embeddings)
    sets = load_sets(args.sets, corpus)
    cfg = _train_config(args)
    report = train_adapter(embeddings, list(sets.values()), cfg)
    save_adapter(args.adapter_out, report.final_adapter)
    history_path = args.history_out or str(args.adapter_out) + ".history.json"
    with open(history_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "loss_history": list(report.loss_history),
                "pair_count": report.pair_count,
                "config": {
                    "tau": cfg.tau,
                    "epochs": cfg.epochs,
                    "learning_rate": cfg.learning_rate,
                    "seed": cfg.seed,
                    "momentum": cfg.momentum,
                    "max_negatives_per_anchor": cfg.max_negatives_per_anchor,
                },
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"final loss: {report.loss_history[-1]:.6f}")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = read_embeddings(args.embeddings)
    sets = load_sets(args.sets, corpus)
    expr = parse_query(args.query)
    adapter = load_adapter(args.adapter) if args.adapter else None
    train_cfg = _train_config(args) if args.train else None
    train_sets = None
    if args.train_sets:
        names = [n for n in args.train_sets.split(",") if n]
        missing = [n for n in names if n not in sets]
        if missing:
            raise ValidationError(f"--train-sets names unknown sets: {missing}")
        train_sets = [sets[n] for n in names]
    result = evaluate_query(
        expr,
        corpus,
        sets,
        embeddings,
        adapter=adapter,
        top_k=args.top_k,
        train_cfg=train_cfg,
        train_sets=train_sets,
    )
    _print_ranked(result, corpus, args.format, sys.stdout)
    return 0


_PROTOCOLS = {
    "intersection": eval_intersection,
    "difference": eval_difference,
    "serial-intersection": eval_serial_intersection,
    "serial-difference": eval_serial_difference,
    "serial-mixed": eval_serial_mixed,
}


def _eval_config(args: argparse.Namespace, train: bool) -> EvalConfig:
    return EvalConfig(
        n_sample=args.n_sample,
        tau=args.tau,
        epochs=args.epochs,
        repeats=args.repeats,
        seed=_seed_from_env(args.seed),
        train=train,
        learning_rate=args.lr,
        momentum=args.momentum,
        max_negatives_per_anchor=args.max_negatives,
    )


def _run_protocol(
    args: argparse.Namespace, corpus: Corpus, embeddings: EmbeddingMatrix, train: bool
) -> EvalReport:
    fn = _PROTOCOLS[args.protocol]
    cfg = _eval_config(args, train)
    if args.protocol.startswith("serial-"):
        if not args.classes or len(args.classes.split(",")) != 2:
            raise ValidationError("serial protocols need --classes LABEL1,LABEL2")
        first, second = args.classes.split(",")
        return fn(corpus, embeddings, (first, second), cfg)
    return fn(corpus, embeddings, cfg)


def _improvement(frozen: float, trained: float) -> str:
    if frozen == 0.0:
        return "n/a"
    return f"{(trained - frozen) / frozen * 100.0:+.1f}%"


def cmd_eval(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = read_embeddings(args.embeddings)
    reports: list[EvalReport] = []
    if args.arm in ("frozen", "both"):
        reports.append(_run_protocol(args, corpus, embeddings, train=False))
    if args.arm in ("setcse", "both"):
        reports.append(_run_protocol(args, corpus, embeddings, train=True))
    print(reports_to_table(reports))
    payload: dict[str, object] = {"reports": [report_to_dict(r) for r in reports]}
    if args.arm == "both":
        frozen, trained = reports[0], reports[1]
        acc_imp = _improvement(frozen.accuracy, trained.accuracy)
        f1_imp = _improvement(frozen.f1, trained.f1)
        print(f"improvement: accuracy {acc_imp}, f1 {f1_imp}")
        payload["improvement"] = {"accuracy": acc_imp, "f1": f1_imp}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = read_embeddings(args.embeddings)
    cfg = _eval_config(args, train=(args.arm == "setcse"))
    rows = sweep_n_sample(corpus, embeddings, args.values, cfg)
    text = sweep_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_repl(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = read_embeddings(args.embeddings)
    sets = load_sets(args.sets, corpus)
    adapter: AdapterCheckpoint | None = load_adapter(args.adapter) if args.adapter else None
    top_n = args.top_k
    interactive = sys.stdin.isatty()

    while True:
        if interactive:
            sys.stdout.write("setcse> ")
            sys.stdout.flush()
        raw = sys.stdin.readline()
        if raw == "":
            break
        line = raw.strip()
        if not line:
            continue
        try:
            if line.startswith(":"):
                parts = line.split()
                directive = parts[0]
                if directive in (":quit", ":q"):
                    break
                elif directive == ":top":
                    if len(parts) != 2 or not parts[1].isdigit():
                        print("error: usage is :top N")
                    else:
                        top_n = int(parts[1])
                elif directive == ":train":
                    cfg = _train_config(args)
                    report = train_adapter(embeddings, list(sets.values()), cfg)
                    adapter = report.final_adapter
                    print(f"trained: final loss {report.loss_history[-1]:.6f}")
                elif directive == ":load-adapter":
                    if len(parts) != 2:
                        print("error: usage is :load-adapter PATH")
                    else:
                        adapter = load_adapter(parts[1])
                        print(f"loaded adapter (dim {adapter.dim})")
                else:
                    print(f"error: unknown directive {directive!r}")
                continue
            expr = parse_query(line)
            result = evaluate_query(
                expr, corpus, sets, embeddings, adapter=adapter, top_k=top_n
            )
            _print_ranked(result, corpus, "text", sys.stdout)
        except SetCseError as exc:
            print(f"error: {exc}")
        except OSError as exc:
            print(f"error: {exc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setcse",
        description="Set-operation semantic queries over sentence embeddings.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("embed-check", help="validate an embedding file")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--corpus", help="also check id alignment against this corpus")
    p.set_defaults(func=cmd_embed_check)

    p = sub.add_parser("train", help="train the adapter on semantic sets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--sets", required=True)
    p.add_argument("--adapter-out", required=True)
    p.add_argument("--history-out", help="loss history JSON (default: <adapter-out>.history.json)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("query", help="run one query")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--sets", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--format", choices=("text", "json"), default="text")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--adapter", help="score with this adapter checkpoint")
    group.add_argument(
        "--train", action="store_true", help="train a fresh adapter before scoring"
    )
    p.add_argument(
        "--train-sets",
        help="comma-separated set names to train on (default: the query's operand sets)",
    )
    _add_train_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--protocol", choices=sorted(_PROTOCOLS), required=True)
    p.add_argument("--classes", help="LABEL1,LABEL2 for serial protocols")
    p.add_argument("--arm", choices=("frozen", "setcse", "both"), default="both")
    p.add_argument("--n-sample", type=int, default=20)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="write the JSON report here")
    _add_train_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep n_sample over a list of values")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--values", type=_int_list, required=True, help="e.g. 1,5,20")
    p.add_argument("--arm", choices=("frozen", "setcse"), default="setcse")
    p.add_argument("--n-sample", type=int, default=20)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", help="also write the CSV here")
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("repl", help="interactive query loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--sets", required=True)
    p.add_argument("--adapter", help="start with this adapter checkpoint")
    p.add_argument("--top-k", type=int, default=10)
    _add_train_flags(p)
    p.set_defaults(func=cmd_repl)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QueryParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SetCseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
