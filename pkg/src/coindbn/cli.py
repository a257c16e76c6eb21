"""Command-line entry point: train, backtest, whatif, serve.

Configuration comes from an optional flat key=value file, overridden by
flags; DBN_SEED is the seed fallback when neither source sets one. Exit
codes: 0 success, 2 data or configuration problems, 3 numeric
non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import backtest as bt
from . import dbn
from .errors import ConvergenceError, DataError, PipelineError
from .ingest import DOWN, UP, STATE_NAMES

DEFAULT_OUT = "out"
DEFAULT_PORT = 8000
DEFAULT_UI_DIR = "frontend/dist"
SEED_ENV_VAR = "DBN_SEED"

CONFIG_KEYS = {
    "coin", "ohlcv", "macro", "tweets", "groups", "seed", "out",
    "t_slices", "train_fraction", "max_parents", "alpha", "port",
    "model", "evidence", "arima_grid", "svr_grid", "ui_dir",
}


@dataclass(frozen=True)
class RunConfig:
    coin: str | None = None
    ohlcv: str | None = None
    macro: tuple[str, ...] = ()
    tweets: str | None = None
    groups: tuple[int, ...] = (1, 2, 3, 4)
    t_slices: int = dbn.DEFAULT_T
    train_fraction: float = bt.DEFAULT_TRAIN_FRACTION
    seed: int = 0
    max_parents: int = 3
    alpha: float = 1.0
    out: str = DEFAULT_OUT
    port: int = DEFAULT_PORT
    model: str | None = None
    evidence: str = ""
    arima_grids: tuple | None = None
    svr_grids: tuple | None = None
    ui_dir: str = DEFAULT_UI_DIR

    def validate(self, *, need_data: bool = False, need_model: bool = False):
        if self.t_slices < 2:
            raise DataError(f"t_slices must be >= 2, got {self.t_slices}")
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must be strictly between 0 and 1")
        if self.max_parents < 1:
            raise DataError("max_parents must be >= 1")
        if self.alpha <= 0.0:
            raise DataError("alpha must be positive")
        if not set(self.groups) <= set(bt.FEATURE_GROUPS):
            raise DataError(f"groups must be within 1..4, got {self.groups}")
        if not 0 < self.port < 65536:
            raise DataError(f"port out of range: {self.port}")
        if need_data:
            if not self.coin:
                raise DataError("a coin name is required (--coin)")
            if not self.ohlcv:
                raise DataError("an OHLCV CSV is required (--ohlcv)")
            for path in (self.ohlcv, self.tweets, *self.macro):
                if path is not None and not Path(path).exists():
                    raise DataError(f"input file not found: {path}")
        if need_model:
            if not self.model:
                raise DataError("a model file is required (--model)")
            if not Path(self.model).exists():
                raise DataError(f"model file not found: {self.model}")
        return self


def parse_config_file(path) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; unknown keys are fatal."""
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{line_no}: expected key=value")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise DataError(f"{path}:{line_no}: unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def parse_groups(text: str) -> tuple[int, ...]:
    try:
        groups = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise DataError(f"bad groups spec {text!r}") from exc
    if not groups:
        raise DataError("groups spec selects nothing")
    return groups


def parse_arima_grid(text: str) -> tuple:
    """Three ;-separated comma lists: p values; d values; q values."""
    parts = text.split(";")
    if len(parts) != 3:
        raise DataError("arima grid needs three ;-separated lists (p;d;q)")
    try:
        return tuple(tuple(int(v) for v in part.split(",") if v.strip())
                     for part in parts)
    except ValueError as exc:
        raise DataError(f"bad arima grid {text!r}") from exc


def parse_svr_grid(text: str) -> tuple:
    """Three ;-separated comma lists: c values; epsilon values; gamma values."""
    parts = text.split(";")
    if len(parts) != 3:
        raise DataError("svr grid needs three ;-separated lists (c;eps;gamma)")
    try:
        return tuple(tuple(float(v) for v in part.split(",") if v.strip())
                     for part in parts)
    except ValueError as exc:
        raise DataError(f"bad svr grid {text!r}") from exc


def parse_evidence(text: str) -> dict[tuple[int, str], int]:
    """Comma-separated slice:variable=Up|Down assignments."""
    states: dict[tuple[int, str], int] = {}
    if not text.strip():
        return states
    for token in text.split(","):
        token = token.strip()
        if ":" not in token or "=" not in token:
            raise DataError(f"bad evidence token {token!r}, "
                            "expected slice:variable=Up|Down")
        slice_part, rest = token.split(":", 1)
        variable, state_name = rest.rsplit("=", 1)
        try:
            slice_index = int(slice_part)
        except ValueError as exc:
            raise DataError(f"bad slice in evidence token {token!r}") from exc
        if state_name not in STATE_NAMES:
            raise DataError(f"bad state {state_name!r}, expected Up or Down")
        key = (slice_index, variable.strip())
        if key in states:
            raise DataError(f"duplicate evidence for {token!r}")
        states[key] = UP if state_name == "Up" else DOWN
    return states


def _add_common_flags(sub):
    sub.add_argument("--config", help="flat key=value configuration file")
    sub.add_argument("--seed", type=int, help="random seed "
                     f"(fallback: ${SEED_ENV_VAR}, then 0)")
    sub.add_argument("--out", help=f"output directory (default {DEFAULT_OUT})")
    sub.add_argument("--t-slices", type=int, dest="t_slices",
                     help="window length T (default 5)")
    sub.add_argument("--train-fraction", type=float, dest="train_fraction",
                     help="chronological training share (default 0.67)")
    sub.add_argument("--max-parents", type=int, dest="max_parents",
                     help="parent cap per node (default 3)")
    sub.add_argument("--alpha", type=float, help="smoothing weight (default 1)")


def _add_data_flags(sub):
    sub.add_argument("--coin", help="coin name used in reports")
    sub.add_argument("--ohlcv", help="daily candles CSV")
    sub.add_argument("--macro", action="append", default=None,
                     help="macro asset CSV (repeatable)")
    sub.add_argument("--tweets", help="daily tweet-count CSV")
    sub.add_argument("--groups", help="comma list of feature groups, e.g. 1,3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coindbn", allow_abbrev=False,
        description="Next-day price-direction models over daily coin data.")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser(
        "train", allow_abbrev=False,
        help="learn one feature group's network and write its JSON")
    _add_data_flags(train)
    _add_common_flags(train)
    train.add_argument("--group", type=int, required=True,
                       help="feature group to train (1..4)")

    back = commands.add_parser(
        "backtest", allow_abbrev=False,
        help="evaluate feature groups and baselines, write reports")
    _add_data_flags(back)
    _add_common_flags(back)
    back.add_argument("--arima-grid", dest="arima_grid",
                      help="override p;d;q lists, e.g. 0,1;0,1;0,1")
    back.add_argument("--svr-grid", dest="svr_grid",
                      help="override c;epsilon;gamma lists")

    whatif = commands.add_parser(
        "whatif", allow_abbrev=False,
        help="query a trained model with partial evidence")
    whatif.add_argument("--model", help="model JSON path")
    whatif.add_argument("--evidence", default=None,
                        help="comma list of slice:variable=Up|Down")
    _add_common_flags(whatif)

    serve = commands.add_parser(
        "serve", allow_abbrev=False,
        help="serve the what-if API and UI for one model")
    serve.add_argument("--model", help="model JSON path")
    serve.add_argument("--port", type=int,
                       help=f"listen port (default {DEFAULT_PORT})")
    serve.add_argument("--ui-dir", dest="ui_dir",
                       help=f"built UI assets (default {DEFAULT_UI_DIR})")
    _add_common_flags(serve)
    return parser


def config_from_args(args) -> RunConfig:
    raw = parse_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(name, cast, default):
        value = getattr(args, name, None)
        if value is not None:
            return value
        if name in raw:
            return cast(raw[name])
        return default

    seed = getattr(args, "seed", None)
    if seed is None:
        if "seed" in raw:
            seed = int(raw["seed"])
        elif os.environ.get(SEED_ENV_VAR):
            try:
                seed = int(os.environ[SEED_ENV_VAR])
            except ValueError as exc:
                raise DataError(f"${SEED_ENV_VAR} is not an integer") from exc
        else:
            seed = 0

    macro = getattr(args, "macro", None)
    if macro is None:
        macro = tuple(p for p in raw.get("macro", "").split(",") if p.strip())
    else:
        macro = tuple(macro)

    groups_text = pick("groups", str, None)
    groups = parse_groups(groups_text) if groups_text else (1, 2, 3, 4)

    arima_text = pick("arima_grid", str, None)
    svr_text = pick("svr_grid", str, None)

    return RunConfig(
        coin=pick("coin", str, None),
        ohlcv=pick("ohlcv", str, None),
        macro=macro,
        tweets=pick("tweets", str, None),
        groups=groups,
        t_slices=pick("t_slices", int, dbn.DEFAULT_T),
        train_fraction=pick("train_fraction", float, bt.DEFAULT_TRAIN_FRACTION),
        seed=seed,
        max_parents=pick("max_parents", int, 3),
        alpha=pick("alpha", float, 1.0),
        out=pick("out", str, DEFAULT_OUT),
        port=pick("port", int, DEFAULT_PORT),
        model=pick("model", str, None),
        evidence=pick("evidence", str, ""),
        arima_grids=parse_arima_grid(arima_text) if arima_text else None,
        svr_grids=parse_svr_grid(svr_text) if svr_text else None,
        ui_dir=pick("ui_dir", str, DEFAULT_UI_DIR),
    )


def _dataset_for(config: RunConfig, group_ids) -> bt.CoinDataset:
    needs_indicators = any(bt.FEATURE_GROUPS[g].include_indicators
                           for g in group_ids)
    return bt.assemble_dataset(config.coin, config.ohlcv, config.macro,
                               config.tweets, with_indicators=needs_indicators)


def _print_model_summary(model: dbn.TwoSliceBn):
    names = model.variable_names
    print(f"variables ({len(names)}): " + ", ".join(names))
    intra = [f"{p} -> {c}" for p, c in model.prior.dag.edge_names()]
    print("initial-slice arcs: " + ("; ".join(intra) if intra else "(none)"))
    inter = []
    trans = model.transition.dag
    offset = len(names)
    print("transition parents:")
    for j, name in enumerate(names):
        parents = trans.parent_sets[offset + j]
        labels = []
        for parent in parents:
            parent_name = trans.nodes[parent]
            labels.append(parent_name)
            if parent_name.startswith(dbn.PREV_PREFIX):
                inter.append(
                    f"{parent_name[len(dbn.PREV_PREFIX):]} -> {name}")
        print(f"  {name} <- " + (", ".join(labels) if labels else "(none)"))
    print("inter-slice arcs: " + ("; ".join(inter) if inter else "(none)"))


def cmd_train(config: RunConfig, group: int) -> int:
    config.validate(need_data=True)
    if group not in bt.FEATURE_GROUPS:
        raise DataError(f"unknown feature group {group}")
    dataset = _dataset_for(config, (group,))
    if not dataset.tweets_available and bt.FEATURE_GROUPS[group].include_external:
        print("warning: tweet counts unavailable, tweet column excluded",
              file=sys.stderr)
    matrix = bt.group_matrix(dataset, bt.FEATURE_GROUPS[group])
    train, _test = bt.split(matrix, config.train_fraction)
    model = dbn.learn_2tbn(train, feature_group=group,
                           t_slices=config.t_slices,
                           max_parents=config.max_parents,
                           seed=config.seed, alpha=config.alpha)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"model_g{group}.json"
    path.write_text(dbn.model_dumps(model), encoding="utf-8")
    print(f"coin: {config.coin}  group: {group}  rows: {len(matrix)}  "
          f"train: {len(train)}")
    _print_model_summary(model)
    print(f"model written: {path}")
    return 0


def cmd_backtest(config: RunConfig) -> int:
    config.validate(need_data=True)
    dataset = _dataset_for(config, sorted(set(config.groups)))
    report = bt.run_backtest(dataset, config.groups,
                             t_slices=config.t_slices,
                             train_fraction=config.train_fraction,
                             seed=config.seed,
                             max_parents=config.max_parents,
                             alpha=config.alpha,
                             arima_grids=config.arima_grids,
                             svr_grids=config.svr_grids)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    for result in report.groups:
        (out_dir / result.model_path).write_text(
            dbn.model_dumps(result.model), encoding="utf-8")
    sys.stdout.write(report.to_text())
    print(f"report written: {out_dir / 'report.json'}")
    return 0


def cmd_whatif(config: RunConfig) -> int:
    config.validate(need_model=True)
    model = dbn.model_loads(Path(config.model).read_text(encoding="utf-8"))
    states = parse_evidence(config.evidence)
    query = (model.t_slices - 1, model.target_name)
    evidence = dbn.Evidence.build(states, query)
    network = dbn.unroll(model)
    result = dbn.posterior(network, evidence)
    target = model.target_name
    day = model.t_slices
    print(f"P({target} = Down at day {day}) = {result.down:.4f}")
    print(f"P({target} = Up   at day {day}) = {result.up:.4f}")
    print(f"argmax: {STATE_NAMES[result.argmax]}")
    return 0


def cmd_serve(config: RunConfig) -> int:
    config.validate(need_model=True)
    from . import serve as serve_module

    return serve_module.run(config.model, port=config.port,
                            ui_dir=config.ui_dir)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        if args.command == "train":
            return cmd_train(config, args.group)
        if args.command == "backtest":
            return cmd_backtest(config)
        if args.command == "whatif":
            return cmd_whatif(config)
        if args.command == "serve":
            return cmd_serve(config)
        raise AssertionError(f"unhandled command {args.command}")
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
