"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible threshold.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from . import assignment as asg
from . import evaluation as ev
from . import fileio as io
from . import labeling
from . import predictor as pred
from . import synthworld as sw
from .errors import (
    DataError,
    InfeasibleError,
    InvalidConfigError,
    RouterError,
    SizeBudgetExceededError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1 here
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="toolrouter", description=__doc__)
    parser.add_argument(
        "--log-level",
        default=os.environ.get("TOOLROUTER_LOG_LEVEL", "WARNING"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic world dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-queries", type=int, default=1000)
    p.add_argument("--n-topics", type=int, default=8)
    p.add_argument("--n-tools", type=int, default=4)
    p.add_argument("--complementarity", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--vocab-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--split", type=float, default=None, metavar="TRAIN_FRACTION",
                   help="also write labels.train.jsonl / labels.test.jsonl")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("label", help="score responses against gold answers")
    p.add_argument("--queries", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="token_f1", choices=list(labeling.MATCH_MODES))
    p.add_argument("--no-cjk-char-tokens", action="store_true")
    p.add_argument("--drop-missing", action="store_true",
                   help="drop queries lacking a response for some tool instead of labeling 0")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("train", help="fit the score predictor")
    p.add_argument("--labels", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--report-out")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--dev-fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dimension", type=int, default=2 ** 18)
    p.add_argument("--hash-seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="score queries with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("route", help="assign queries to tools")
    p.add_argument("--predictions", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--strategy", required=True,
                   choices=["fixed", "best_performance", "cost_saving"])
    p.add_argument("--tool", help="tool id for the fixed strategy")
    p.add_argument("--p-min", type=float, help="threshold for cost_saving")
    p.add_argument("--solver", default="auto", choices=["auto", "exact", "parametric"])
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics-out")
    p.set_defaults(func=_cmd_route)

    p = sub.add_parser("evaluate", help="score an assignment against true labels")
    p.add_argument("--assignment", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("curve", help="cost-accuracy curve over thresholds")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="comma-separated thresholds; default: auto")
    p.add_argument("--plot", help="optional image path")
    p.set_defaults(func=_cmd_curve)

    p = sub.add_parser("compare", help="run all strategies and tabulate")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--p-min", type=float, action="append", default=[],
                   help="cost_saving threshold; repeatable")
    p.add_argument("--out", help="optional JSON output path")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("serve", help="run the batch routing service")
    p.add_argument("--model", required=True)
    p.add_argument("--tools", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=_cmd_serve)

    return parser


def _cmd_simulate(args) -> None:
    config = sw.WorldConfig(
        n_topics=args.n_topics,
        n_tools=args.n_tools,
        complementarity=args.complementarity,
        noise=args.noise,
        n_queries=args.n_queries,
        seed=args.seed,
        vocab_size=args.vocab_size,
    )
    registry, queries, topics = sw.generate(config)
    os.makedirs(args.out_dir, exist_ok=True)
    io.save_tools(registry, os.path.join(args.out_dir, "tools.json"))
    io.save_labeled_queries(queries, os.path.join(args.out_dir, "labels.jsonl"))
    io.save_world_meta(
        sw.quality_table(config),
        registry.ids,
        {q.id: t for q, t in zip(queries, topics)},
        os.path.join(args.out_dir, "world_meta.json"),
    )
    if args.split is not None:
        train, test = sw.split(queries, args.split, args.seed)
        io.save_labeled_queries(train, os.path.join(args.out_dir, "labels.train.jsonl"))
        io.save_labeled_queries(test, os.path.join(args.out_dir, "labels.test.jsonl"))
    print(f"wrote {len(queries)} queries for {len(registry)} tools to {args.out_dir}")


def _cmd_label(args) -> None:
    registry = io.load_tools(args.tools)
    queries = io.load_query_triples(args.queries)
    responses = io.load_responses(args.responses)
    config = labeling.MatchConfig(mode=args.mode, cjk_char_tokens=not args.no_cjk_char_tokens)
    labeled = labeling.build_labels(
        queries, responses, registry, config, drop_missing=args.drop_missing
    )
    io.save_labeled_queries(labeled, args.out)
    print(f"labeled {len(labeled)} queries -> {args.out}")


def _cmd_train(args) -> None:
    registry = io.load_tools(args.tools)
    dataset = io.load_labeled_queries(args.labels, registry)
    fc = pred.FeatureConfig(dimension=args.dimension, hash_seed=args.hash_seed)
    tc = pred.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        dev_fraction=args.dev_fraction,
    )
    model, report = pred.train(dataset, registry, fc, tc)
    pred.save_model(model, args.model_out)
    if args.report_out:
        import json

        with open(args.report_out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, ensure_ascii=False, indent=2)
            fh.write("\n")
    dev = report.epochs[-1].dev_mse if report.epochs else None
    dev_txt = f", dev mse {dev:.5f}" if dev is not None else ""
    print(
        f"trained on {report.n_train} queries ({report.n_dev} dev): "
        f"train mse {report.initial_train_mse:.5f} -> {report.final_train_mse:.5f}{dev_txt}"
    )


def _cmd_predict(args) -> None:
    model = pred.load_model(args.model)
    triples = io.load_query_triples(args.queries)
    matrix = pred.score_matrix(model, [(qid, qtext) for qid, qtext, _ in triples])
    io.save_predictions(matrix, args.out)
    print(f"scored {matrix.n_queries} queries -> {args.out}")


def _strategy_from_args(args) -> asg.Strategy:
    if args.strategy == "fixed":
        if not args.tool:
            raise UsageError("--tool is required for the fixed strategy")
        return asg.Strategy.fixed(args.tool)
    if args.strategy == "cost_saving":
        if args.p_min is None:
            raise UsageError("--p-min is required for the cost_saving strategy")
        return asg.Strategy.cost_saving(args.p_min)
    return asg.Strategy.best_performance()


def _cmd_route(args) -> None:
    registry = io.load_tools(args.tools)
    scores = io.load_predictions(args.predictions)
    strategy = _strategy_from_args(args)
    if strategy.kind == "cost_saving" and args.solver != "auto":
        req = asg.CostSavingRequest(scores, registry, strategy.p_min, args.solver)
        result, diag = asg.cost_saving(req)
    else:
        result, diag = asg.route(scores, registry, strategy)
    io.save_assignment(result, scores, args.out)
    if args.diagnostics_out:
        io.save_diagnostics(diag, args.diagnostics_out)
    print(
        f"{strategy.describe()}: mean predicted {result.mean_predicted_score:.4f}, "
        f"average cost {result.average_cost:.4f} -> {args.out}"
    )


def _cmd_evaluate(args) -> None:
    registry = io.load_tools(args.tools)
    truth = io.load_labeled_queries(args.labels)
    result = io.load_assignment(args.assignment, registry)
    report = ev.evaluate(result, truth, registry)
    io.save_report(report, args.out)
    print(f"accuracy {report.accuracy:.4f}, average cost {report.average_cost:.4f} -> {args.out}")


def _cmd_curve(args) -> None:
    registry = io.load_tools(args.tools)
    truth = io.load_labeled_queries(args.labels)
    scores = io.load_predictions(args.predictions)
    grid = None
    if args.grid:
        try:
            grid = [float(x) for x in args.grid.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad --grid value {args.grid!r}") from None
    points = ev.cost_accuracy_curve(scores, truth, registry, grid)
    io.save_curve_csv(points, args.out)
    if args.plot:
        ev.plot_curve(points, args.plot)
    feasible = sum(1 for p in points if p.feasible)
    print(f"{len(points)} curve points ({feasible} feasible) -> {args.out}")


def _cmd_compare(args) -> None:
    registry = io.load_tools(args.tools)
    truth = io.load_labeled_queries(args.labels)
    scores = io.load_predictions(args.predictions)
    strategies = [asg.Strategy.fixed(tid) for tid in scores.tool_ids]
    strategies.append(asg.Strategy.best_performance())
    strategies.extend(asg.Strategy.cost_saving(p) for p in args.p_min)
    rows = ev.compare_methods(scores, truth, registry, strategies)
    width = max((len(r.strategy) for r in rows), default=8)
    print(f"{'strategy'.ljust(width)}  accuracy  avg_cost")
    for r in rows:
        print(f"{r.strategy.ljust(width)}  {r.accuracy:8.4f}  {r.average_cost:8.4f}")
    if args.out:
        import json

        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(
                [
                    {"strategy": r.strategy, "accuracy": r.accuracy, "average_cost": r.average_cost}
                    for r in rows
                ],
                fh,
                ensure_ascii=False,
                indent=2,
            )
            fh.write("\n")


def _cmd_serve(args) -> None:
    import uvicorn

    from .service import create_app

    model = pred.load_model(args.model)
    registry = io.load_tools(args.tools)
    app = create_app(model, registry)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # -h/--help
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, stream=sys.stderr)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InvalidConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleError as exc:
        print(
            f"infeasible: {exc} (max achievable mean predicted score: "
            f"{exc.max_achievable_mean:.6f})",
            file=sys.stderr,
        )
        return 3
    except (DataError, SizeBudgetExceededError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except RouterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
