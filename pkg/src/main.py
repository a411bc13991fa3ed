"""
src/main.py

Command-line entry point. Every subcommand loads the flat key=value configuration (--config) with
repeatable --set overrides, configures logging, and dispatches to the library.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 on runtime failures (including a
failing gradient check or self-test, and grids with failed cells).

Top-level declarations:
- UsageError: Raised by the argument parser instead of exiting
- build_parser: argparse parser with all subcommands
- cli_main: Parse argv, run one subcommand, return the exit code
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from src.config import AppConfig, ConfigError, Method, load_config
from src.data import DomainDataset, build_domains, make_splits, save_dataset, split_spec_from_config
from src.evaluation import (
    ExperimentCoordinator,
    TargetHandle,
    evaluate_accuracy,
    export_embeddings,
    gradient_suite,
    kn_sweep,
    leave_one_domain_out,
    run_selftest,
    select_hyperparameters,
    select_sources,
)
from src.nets import load_weights, save_weights
from src.tensor import set_precision
from src.train import pretrain_critic, pretrain_task_classifier, run_training

logger = logging.getLogger(__name__)


def _setup_logging(level: str) -> None:
    # Format includes optional cell context from LoggerAdapter for grid runs

    class CellFormatter(logging.Formatter):
        def format(self, record: logging.LogRecord) -> str:
            if hasattr(record, "cell"):
                record.msg = f"[cell={record.cell}] {record.msg}"
            return super().format(record)

    handler = logging.StreamHandler()
    handler.setFormatter(CellFormatter("%(asctime)s %(name)s: %(message)s"))
    logging.basicConfig(level=getattr(logging, level.upper()), handlers=[handler], force=True)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


Splits = Tuple[int, List[DomainDataset], List[DomainDataset], List[DomainDataset]]


def _source_splits(cfg: AppConfig) -> Splits:
    # (target index, all domains, source train splits, source val splits)
    coordinator = ExperimentCoordinator(cfg)
    target = coordinator.default_target()
    sources = select_sources(coordinator.domains, target, cfg.eval.num_sources)
    spec = split_spec_from_config(cfg.data)
    splits = [make_splits(src, spec) for src in sources]
    return target, coordinator.domains, [t for t, _ in splits], [v for _, v in splits]


def _out_dir(cfg: AppConfig, args: argparse.Namespace) -> Path:
    return Path(args.out or cfg.eval.out_dir)


def cmd_make_data(cfg: AppConfig, args: argparse.Namespace) -> int:
    cache = Path(args.out or cfg.data.cache_dir)
    for ds in build_domains(cfg):
        path = save_dataset(ds, cache / f"{ds.index:02d}_{ds.name}.l2aw")
        print(f"{ds.name}: {len(ds)} samples -> {path}")
    return 0


def cmd_pretrain(cfg: AppConfig, args: argparse.Namespace) -> int:
    _, _, train, val = _source_splits(cfg)
    out = _out_dir(cfg, args) / "pretrain"
    yhat = pretrain_task_classifier(cfg, train, val)
    critic = pretrain_critic(cfg, train, val)
    save_weights(yhat.weights, out / "classifier.l2aw")
    save_weights(critic.weights, out / "critic.l2aw")
    print(f"classifier source-val {yhat.val_accuracy:.2f}%, critic source-val {critic.val_accuracy:.2f}%")
    return 0


def cmd_train(cfg: AppConfig, args: argparse.Namespace) -> int:
    _, _, train, val = _source_splits(cfg)
    out = _out_dir(cfg, args) / "train"
    yhat = pretrain_task_classifier(cfg, train, val)
    critic = pretrain_critic(cfg, train, val)
    save_weights(yhat.weights, out / "yhat.l2aw")
    save_weights(critic.weights, out / "critic.l2aw")
    _, classifier, log = run_training(cfg, train, yhat.weights, critic.weights, out)
    accs = [evaluate_accuracy(classifier, v) for v in val]
    print(f"trained {len(log.records)} iterations; source-val accuracy per domain: {', '.join(f'{a:.2f}' for a in accs)}")
    return 0


def cmd_eval(cfg: AppConfig, args: argparse.Namespace) -> int:
    weights_path = Path(args.weights) if args.weights else _out_dir(cfg, args) / "train" / "classifier.l2aw"
    classifier = load_weights(weights_path)
    if classifier.kind != "classifier":
        raise ValueError(f"{weights_path} holds {classifier.kind} weights, expected a classifier")
    target, domains, _, _ = _source_splits(cfg)
    handle = TargetHandle(domains[target])
    accuracy = evaluate_accuracy(classifier, handle.open("evaluation"))
    print(f"{handle.name}: {accuracy:.2f}%")
    return 0


def cmd_lodo(cfg: AppConfig, args: argparse.Namespace) -> int:
    method = Method(args.method) if args.method else None
    report = leave_one_domain_out(cfg, method, out_dir=_out_dir(cfg, args))
    for summary in report.summaries():
        print(f"{summary.target_domain}: {summary.mean:.2f} +/- {summary.std:.2f}")
    print(f"mean: {report.mean_accuracy:.2f}")
    return 2 if report.failed else 0


def cmd_kn_sweep(cfg: AppConfig, args: argparse.Namespace) -> int:
    rows = kn_sweep(cfg, out_dir=_out_dir(cfg, args))
    for row in rows:
        print(f"K_n={row.kn}: {row.mean_acc:.2f} +/- {row.std_acc:.2f}")
    return 0


def cmd_export_embeddings(cfg: AppConfig, args: argparse.Namespace) -> int:
    run = Path(args.run) if args.run else _out_dir(cfg, args) / "train"
    target, domains, _, val = _source_splits(cfg)
    dump = export_embeddings(
        load_weights(run / "critic.l2aw"),
        load_weights(run / "generator.l2aw"),
        val,
        target=domains[target],
        samples=cfg.eval.embedding_samples,
        out_path=_out_dir(cfg, args) / "embeddings.csv",
    )
    print(f"{len(dump.tags)} embedded samples")
    return 0


def cmd_gradcheck(cfg: AppConfig, args: argparse.Namespace) -> int:
    reports = gradient_suite(seed=args.seed)
    for name, report in reports.items():
        print(f"{'PASS' if report.passed else 'FAIL'} {name}: max error {report.max_error:.2e}")
    return 0 if all(r.passed for r in reports.values()) else 2


def cmd_selftest(cfg: AppConfig, args: argparse.Namespace) -> int:
    passed, lines = run_selftest(seed=args.seed)
    for line in lines:
        print(line)
    print("selftest passed" if passed else "selftest FAILED")
    return 0 if passed else 2


def cmd_select(cfg: AppConfig, args: argparse.Namespace) -> int:
    # selection splits the sources itself, so it receives whole source datasets
    coordinator = ExperimentCoordinator(cfg)
    sources = select_sources(coordinator.domains, coordinator.default_target(), cfg.eval.num_sources)
    result = select_hyperparameters(cfg, sources, out_dir=_out_dir(cfg, args))
    best = result.best
    print(f"best: lambda_domain={best.lambda_domain} lambda_cycle={best.lambda_cycle} lambda_ce={best.lambda_ce}")
    return 0


COMMANDS: Dict[str, Tuple[Callable[[AppConfig, argparse.Namespace], int], str]] = {
    "make-data": (cmd_make_data, "Build every configured domain and cache it"),
    "pretrain": (cmd_pretrain, "Pretrain Y-hat and the critic on the source domains"),
    "train": (cmd_train, "Pretrain, then run the alternating generator/classifier loop"),
    "eval": (cmd_eval, "Evaluate saved classifier weights on the held-out domain"),
    "lodo": (cmd_lodo, "Leave-one-domain-out grid for one method"),
    "kn-sweep": (cmd_kn_sweep, "Sweep the number of novel domains"),
    "export-embeddings": (cmd_export_embeddings, "Write critic embeddings with a 2-D PCA projection"),
    "gradcheck": (cmd_gradcheck, "Finite-difference gradient suite"),
    "selftest": (cmd_selftest, "All invariant suites"),
    "select": (cmd_select, "Pick loss weights by source-validation accuracy"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    common.add_argument("--out", help="output directory (default: eval.out_dir)")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = _Parser(prog="l2a-ot", description="Learning to augment novel domains with optimal transport")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parsers = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}
    parsers["eval"].add_argument("--weights", help="classifier weights (default: <out>/train/classifier.l2aw)")
    parsers["lodo"].add_argument("--method", choices=[m.value for m in Method])
    parsers["export-embeddings"].add_argument("--run", help="training run directory (default: <out>/train)")
    for name in ("gradcheck", "selftest"):
        parsers[name].add_argument("--seed", type=int, default=0)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        cfg = load_config(args.config, args.set)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 1
    except ConfigError as e:
        print(f"{parser.prog}: config error: {e}", file=sys.stderr)
        return 1

    _setup_logging("DEBUG" if args.verbose or cfg.dev_mode else cfg.log.log_level)
    set_precision(cfg.tensor.dtype)
    handler, _ = COMMANDS[args.command]
    try:
        return handler(cfg, args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 1
    except Exception as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}", exc_info=True)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
