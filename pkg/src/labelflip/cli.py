"""Command-line interface: fetch, attack, defend, experiment, plot.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Every subcommand accepts ``--config FILE`` holding ``key=value``
lines named after the long flags; flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .attack import AttackResult, brute_force_attack, budget_from_fraction, lfa_greedy, random_flip
from .dataset import apply_standardizer, fit_standardizer, load_csv, save_csv, subsample
from .defence import DefenceConfig, sanitize
from .errors import ConfigError, DataError, InvariantError
from .experiments import (
    DATASET_NOTES,
    DEFAULT_FRACTIONS,
    DEFAULT_K_GRID,
    REFERENCE_DEGRADATION,
    ExperimentConfig,
    ResultsTable,
    aggregate,
    degradation_ratio,
    run_poison_sweep,
    sensitivity_sweep,
    summary_to_csv_text,
)
from .io import atomic_write_text
from .linear_model import TrainConfig
from .plotting import render_svg
from .sources import DATA_DIR_ENV, DATASETS, fetch, resolve_dataset

log = logging.getLogger("labelflip")

FIXPOINT_PASSES = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_train_flags(p):
    g = p.add_argument_group("learner")
    g.add_argument("--lr", type=float, default=0.01, help="SGD learning rate (reference setting 0.01)")
    g.add_argument("--epochs", type=int, default=100, help="SGD epochs (reference setting 100)")
    g.add_argument("--no-bias", action="store_true", help="train w only, without an intercept")
    g.add_argument("--no-shuffle", action="store_true", help="visit examples in file order every epoch")


def _train_config(args, seed: int) -> TrainConfig:
    return TrainConfig(args.lr, args.epochs, seed, not args.no_shuffle, not args.no_bias)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="labelflip", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fetch", help="build canonical CSVs for the benchmark datasets", formatter_class=fmt)
    p.add_argument("dataset", choices=sorted(DATASETS))
    p.add_argument("--source", help="local raw file or directory instead of downloading")
    p.add_argument("--data-dir", help=f"output directory (default ${DATA_DIR_ENV} or ~/.cache/labelflip)")

    p = sub.add_parser("attack", help="poison a training CSV by flipping labels", formatter_class=fmt)
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--train", required=True, help="canonical training CSV")
    p.add_argument("--val", help="canonical validation CSV (attacker objective; greedy/bruteforce)")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("-p", "--budget", type=int, help="number of labels to flip")
    budget.add_argument("--fraction", type=float, help="fraction of labels to flip, rounded half up")
    p.add_argument("--strategy", choices=("greedy", "random", "bruteforce"), default="greedy")
    p.add_argument("--seed", type=int, default=0, help="SGD shuffle seed; random-flip seed")
    p.add_argument("--cap", type=int, default=10_000, help="max subsets for --strategy bruteforce")
    p.add_argument("--standardize", action="store_true", help="standardize on train before attacking")
    p.add_argument("--out-dir", default=".", help="where poisoned.csv, flips.txt and trace.csv go")
    _add_train_flags(p)

    p = sub.add_parser("defend", help="relabel a training CSV with kNN sanitization", formatter_class=fmt)
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--train", required=True, help="canonical training CSV")
    p.add_argument("-k", "--k", type=int, default=10, help="number of neighbours")
    p.add_argument("--eta", type=float, default=0.5, help="confidence threshold in [0.5, 1] (reference setting 0.5)")
    p.add_argument("--max-passes", type=int, default=1, help="upper bound on relabelling passes")
    p.add_argument("--fixpoint", action="store_true", help=f"repeat passes until nothing changes (max {FIXPOINT_PASSES})")
    p.add_argument("--standardize", action="store_true", help="standardize features before the neighbour search")
    p.add_argument("--out-dir", default=".", help="where sanitized.csv and report.csv go")

    p = sub.add_parser("experiment", help="run the attack/defence evaluation", formatter_class=fmt)
    p.add_argument("--config", help="key=value file with flag defaults")
    p.add_argument("--dataset", required=True, help="dataset id (see fetch) or a canonical CSV path")
    p.add_argument("--data-dir", help=f"directory of fetched CSVs (default ${DATA_DIR_ENV} or ~/.cache/labelflip)")
    p.add_argument("--fractions", type=_floats, default=DEFAULT_FRACTIONS, help="poison fractions, comma-separated")
    p.add_argument("--repetitions", type=int, default=10, help="number of random splits")
    p.add_argument("--n-train", type=int, default=100, help="training points per split")
    p.add_argument("--n-val", type=int, default=100, help="trusted validation points per split")
    p.add_argument("--eta", type=float, default=0.5, help="defence confidence threshold (reference setting 0.5)")
    p.add_argument("--k-grid", type=_ints, default=DEFAULT_K_GRID, help="candidate k values chosen on validation")
    p.add_argument("--max-passes", type=int, default=1, help="relabelling passes per defence")
    p.add_argument("--fixpoint", action="store_true", help="iterate the defence until nothing changes")
    p.add_argument("--master-seed", type=int, default=0, help="root of all randomness")
    p.add_argument("--budget", type=int, help="seeded row subsample of the dataset for desk-scale runs")
    p.add_argument("--sensitivity", choices=("k", "eta"), help="sweep a fixed defence parameter instead of selecting k")
    p.add_argument("--values", type=_floats, help="values for --sensitivity")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes over splits")
    p.add_argument("--out-dir", default=".", help="where results.csv, summary.csv and metadata.json go")
    _add_train_flags(p)

    p = sub.add_parser("plot", help="render SVG charts from a results CSV", formatter_class=fmt)
    p.add_argument("results", help="results CSV written by `experiment`")
    p.add_argument("--out-dir", default=".", help="one <dataset>.svg per dataset is written here")
    return parser


def _expand_config(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """Splice ``--config`` file entries in front of the explicit flags."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if command is None or not path:
        return argv
    sub = choices[command]
    flags = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                flags[opt[2:]] = action
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    extra: list[str] = []
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        action = flags.get(key)
        if action is None or key == "config":
            raise UsageError(f"{path}:{n}: unknown option {key!r}")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"{path}:{n}: {key} expects true/false")
        else:
            extra.append(f"--{key}={value}")
    i = argv.index(command) + 1
    return argv[:i] + extra + argv[i:]


# ---------------------------------------------------------------------------
# subcommands


def cmd_fetch(args) -> int:
    from .sources import default_data_dir

    out_dir = Path(args.data_dir) if args.data_dir else default_data_dir()
    path, written = fetch(args.dataset, out_dir, args.source)
    print(f"{args.dataset}: {'wrote ' + str(path) if written else 'up to date (' + str(path) + ')'}")
    return 0


def _trace_csv(result: AttackResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("step", "flipped_index", "validation_loss"))
    for s in result.trace:
        w.writerow((s.step, s.index, repr(s.validation_loss)))
    return buf.getvalue()


def cmd_attack(args) -> int:
    train_raw = load_csv(args.train)
    if args.budget is None and args.fraction is None:
        raise UsageError("one of -p/--budget or --fraction is required")
    p = args.budget if args.budget is not None else budget_from_fraction(args.fraction, train_raw.m)
    if not 0 <= p <= train_raw.m:
        raise UsageError(f"budget {p} outside [0, {train_raw.m}]")
    config = _train_config(args, args.seed)

    train = train_raw
    if args.strategy == "random":
        result = random_flip(train, p, args.seed)
    else:
        if not args.val:
            raise UsageError(f"--strategy {args.strategy} needs --val")
        val = load_csv(args.val)
        if val.dim != train.dim:
            raise DataError(f"validation has {val.dim} features, training has {train.dim}")
        if args.standardize:
            std = fit_standardizer(train)
            train, val = apply_standardizer(std, train), apply_standardizer(std, val)
        if args.strategy == "greedy":
            result = lfa_greedy(train, val, p, config)
        else:
            result = brute_force_attack(train, val, p, config, cap=args.cap)

    poisoned = train_raw.with_labels(result.poisoned.y)
    if not (poisoned.y != train_raw.y).sum() == p:
        raise InvariantError("poisoned labels differ from the source at an unexpected number of rows")
    out = Path(args.out_dir)
    save_csv(poisoned, out / "poisoned.csv")
    atomic_write_text(out / "flips.txt", "".join(f"{i}\n" for i in result.order))
    atomic_write_text(out / "trace.csv", _trace_csv(result))
    msg = f"flipped {p} of {train_raw.m} labels ({args.strategy})"
    if result.validation_loss is not None:
        msg += f"; validation hinge loss {result.validation_loss:.6f}"
    print(msg)
    return 0


def cmd_defend(args) -> int:
    passes = FIXPOINT_PASSES if args.fixpoint else args.max_passes
    config = DefenceConfig(args.k, args.eta, passes)
    data = load_csv(args.train)
    if not args.k <= data.m - 1:
        raise DataError(f"k={args.k} needs at least {args.k + 1} training rows, got {data.m}")
    view = apply_standardizer(fit_standardizer(data), data) if args.standardize else data
    cleaned, report = sanitize(view, config)
    out = Path(args.out_dir)
    save_csv(data.with_labels(cleaned.y), out / "sanitized.csv")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("pass", "index", "old_label", "new_label"))
    w.writerows(report.changes)
    atomic_write_text(out / "report.csv", buf.getvalue())
    print(
        f"relabelled {report.n_relabeled} of {data.m} points in {report.passes_run} pass(es); "
        f"converged={str(report.converged).lower()}"
    )
    return 0


def cmd_experiment(args) -> int:
    if args.sensitivity and not args.values:
        raise UsageError("--sensitivity needs --values")
    if args.values and not args.sensitivity:
        raise UsageError("--values only applies with --sensitivity")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    train_config = _train_config(args, args.master_seed)
    name, data = resolve_dataset(args.dataset, args.data_dir)
    config = ExperimentConfig(
        dataset=name,
        poison_fractions=args.fractions,
        repetitions=args.repetitions,
        n_train=args.n_train,
        n_val=args.n_val,
        train_config=train_config,
        eta=args.eta,
        k_grid=args.k_grid,
        master_seed=args.master_seed,
        max_passes=FIXPOINT_PASSES if args.fixpoint else args.max_passes,
        subsample=args.budget,
    )
    if args.sensitivity:
        table = sensitivity_sweep(config, data, args.sensitivity, args.values, jobs=args.jobs)
    else:
        table = run_poison_sweep(config, data, jobs=args.jobs)
    summary = aggregate(table)

    out = Path(args.out_dir)
    atomic_write_text(out / "results.csv", table.to_csv_text())
    atomic_write_text(out / "summary.csv", summary_to_csv_text(summary))
    meta = {
        "dataset": name,
        "rows": data.m if args.budget is None else min(args.budget, data.m),
        "features": data.dim,
        "fractions": list(config.poison_fractions),
        "repetitions": config.repetitions,
        "n_train": config.n_train,
        "n_val": config.n_val,
        "learning_rate": train_config.learning_rate,
        "epochs": train_config.epochs,
        "fit_bias": train_config.fit_bias,
        "eta": config.eta,
        "k_grid": list(config.k_grid),
        "max_passes": config.max_passes,
        "master_seed": config.master_seed,
        "sensitivity": args.sensitivity,
        "values": list(args.values) if args.values else None,
    }
    if name in DATASET_NOTES:
        meta["note"] = DATASET_NOTES[name]
    if 0.2 in config.poison_fractions:
        ratio = degradation_ratio(table, 0.2)
        meta["degradation_ratio_at_20pct"] = ratio
        meta["reference_degradation_ratio"] = REFERENCE_DEGRADATION.get(name)
        ref = REFERENCE_DEGRADATION.get(name)
        print(f"{name}: undefended/clean error at 20% = {ratio:.2f}" + (f" (reference {ref})" if ref else ""))
    atomic_write_text(out / "metadata.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(table.rows)} rows to {out / 'results.csv'}")
    return 0


def cmd_plot(args) -> int:
    try:
        text = Path(args.results).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {args.results}: {exc}") from None
    table = ResultsTable.from_csv_text(text)
    summary = aggregate(table)
    out = Path(args.out_dir)
    for name in sorted({r.dataset for r in summary}):
        path = out / f"{name}.svg"
        atomic_write_text(path, render_svg([r for r in summary if r.dataset == name], title=name))
        print(f"wrote {path}")
    return 0


COMMANDS = {
    "fetch": cmd_fetch,
    "attack": cmd_attack,
    "defend": cmd_defend,
    "experiment": cmd_experiment,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv, parser)
    except UsageError as exc:
        print(f"labelflip: error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"labelflip: error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"labelflip: data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"labelflip: internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
