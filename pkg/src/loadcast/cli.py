"""Command-line interface; every pipeline stage is independently invokable.

Exit codes: 0 success, 1 validation/config error, 2 runtime error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import load_config
from .errors import ConfigError, LoadcastError, ValidationError, exit_code_for
from .gateway import ForecastCache, GatewayServer, MeasurementStore, push_forecast
from .lstm import TrainConfig
from .pipeline import evaluate, issue_forecast, train_point_model
from .quality import QcPolicy, sigma_filter
from .registry import ModelRegistry
from .runtime import RealClock, RunLog, SimulatedClock, grid_search, run_loop
from .series import (
    AlignedTable,
    PointId,
    align,
    format_ts,
    parse_ts,
    read_dataset,
    write_dataset,
)
from .synth import SynthConfig, generate_synthetic_campus
from .windows import (
    FEATURE_MODES,
    FEATURE_MODE_WEATHER,
    SplitSpec,
    build_windows,
    chronological_split,
)


def _load_table(data_dir: str):
    load, weather = read_dataset(data_dir)
    return load.point, align(load, weather)


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config).train
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, epochs=args.epochs)
    return cfg


def _split_and_mode(args) -> tuple[SplitSpec, str]:
    split, mode = SplitSpec(), FEATURE_MODE_WEATHER
    if getattr(args, "config", None):
        sys_cfg = load_config(args.config)
        split, mode = sys_cfg.split, sys_cfg.feature_mode
    if getattr(args, "mode", None):  # explicit flag beats the config file
        mode = args.mode
    return split, mode


def cmd_simulate(args) -> int:
    cfg = SynthConfig()
    weather, load = generate_synthetic_campus(args.seed, args.days, cfg)
    write_dataset(args.out, load, weather)
    print(f"wrote {args.days} days x 7 hourly series (seed {args.seed}) to {args.out}")
    return 0


def cmd_qc(args) -> int:
    load, weather = read_dataset(args.data)
    policy = QcPolicy(
        sigma_threshold=args.sigma,
        window_hours=args.window if args.window > 0 else None,
        min_window_count=args.min_count,
    )
    targets = [load, *weather]
    if args.point:
        targets = [s for s in targets if s.point.id == args.point]
        if not targets:
            raise ValidationError(f"point {args.point!r} not in dataset")
    reports = []
    print(f"{'point':<28} {'examined':>9} {'removed':>8} {'unscreened':>11}")
    for series in targets:
        _, report = sigma_filter(series, policy)
        reports.append(report)
        print(
            f"{report.point.id:<28} {report.examined:>9} {report.removed:>8} "
            f"{report.unscreened:>11}"
        )
    if args.json:
        with open(args.json, "w") as fh:
            for r in reports:
                fh.write(r.to_json() + "\n")
    return 0


def cmd_train(args) -> int:
    point, table = _load_table(args.data)
    cfg = _train_config(args)
    split, mode = _split_and_mode(args)
    record, curve = train_point_model(point, table, cfg, split, feature_mode=mode)
    registry = ModelRegistry(args.registry)
    version = registry.put(record)
    if args.curve:
        Path(args.curve).write_text(curve.to_csv())
    final = curve.final()
    print(
        f"{point}: version {version}, {cfg.epochs} epochs, "
        f"final train/test MSE (scaled) {final[1]:.6f}/{final[2]:.6f}"
    )
    return 0


def cmd_evaluate(args) -> int:
    point, table = _load_table(args.data)
    registry = ModelRegistry(args.registry)
    if args.version:
        record = registry.get_version(point, args.version)
    else:
        record = registry.get_latest(point)
    windows = build_windows(
        table, record.train_config.lookback, record.head.horizon, record.feature_mode
    )
    split = chronological_split(
        windows, record.split, span=(int(table.ts[0]), int(table.ts[-1]))
    )
    metrics = evaluate(record, split.test)
    print(json.dumps(metrics.to_dict(), indent=2))
    if args.csv:
        Path(args.csv).write_text(metrics.to_csv())
    return 0


def cmd_forecast(args) -> int:
    point, table = _load_table(args.data)
    registry = ModelRegistry(args.registry)
    record = registry.get_latest(point)
    issued_at = parse_ts(args.at) if args.at else int(table.ts[-1])
    lookback = record.train_config.lookback
    mask = table.ts <= issued_at
    if mask.sum() < lookback:
        raise ValidationError(f"not enough history before {format_ts(issued_at)}")
    idx = int(mask.sum())
    latest = AlignedTable(
        table.point,
        table.ts[idx - lookback : idx],
        table.features[idx - lookback : idx],
        table.load[idx - lookback : idx],
    )
    grid = issue_forecast(record, latest, issued_at)
    print(grid.to_json())
    if args.push:
        accepted, stale = push_forecast(args.push, grid)
        print(f"pushed to {args.push}: accepted={accepted} stale={stale}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    host, _, port = args.bind.rpartition(":")
    if not port.isdigit():
        raise ValidationError(f"--bind must be host:port, got {args.bind!r}")
    store = MeasurementStore.from_directory(args.data)
    cache = ForecastCache(args.cache_log or Path(args.data) / "forecast_cache.log")
    registry = ModelRegistry(args.registry) if args.registry else None
    server = GatewayServer((host, int(port)), store, cache, registry)
    print(f"gateway listening on {server.url} ({len(store.points())} points)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def cmd_run(args) -> int:
    sys_cfg = load_config(args.config)
    if sys_cfg.schedule is None:
        raise ConfigError(f"{args.config}: run requires a 'schedule' section")
    store = MeasurementStore.from_directory(sys_cfg.data_dir)
    cache_log = sys_cfg.cache_log or sys_cfg.data_dir / "forecast_cache.log"
    cache = ForecastCache(cache_log)
    registry = ModelRegistry(sys_cfg.registry_dir)
    if args.virtual_start:
        clock = SimulatedClock(parse_ts(args.virtual_start))
        if not args.until:
            raise ValidationError("--virtual-start requires --until")
    else:
        clock = RealClock()
    server = GatewayServer(sys_cfg.gateway_bind, store, cache, registry, clock_now=clock.now)
    server.start()
    try:
        log = run_loop(
            sys_cfg,
            registry,
            clock,
            until=parse_ts(args.until) if args.until else None,
            log=RunLog(sys_cfg.run_log or sys_cfg.data_dir / "runlog.jsonl"),
        )
    finally:
        server.stop()
    ok = sum(1 for r in log.records if r.outcome == "ok")
    failed = len(log.records) - ok
    print(f"run complete: {ok} actions ok, {failed} failed, log at {sys_cfg.run_log or sys_cfg.data_dir / 'runlog.jsonl'}")
    return 0


def cmd_grid_search(args) -> int:
    point, table = _load_table(args.data)
    base = _train_config(args)
    split, mode = _split_and_mode(args)
    overrides = json.loads(Path(args.grid).read_text())
    if not isinstance(overrides, list) or not overrides:
        raise ValidationError(f"{args.grid}: expected a non-empty JSON array of variants")
    key_map = {
        "epochs": "epochs",
        "learningRate": "learning_rate",
        "optimizer": "optimizer",
        "batchSize": "batch_size",
        "lookback": "lookback",
        "hiddenDim": "hidden_dim",
        "gradClipNorm": "grad_clip_norm",
        "seed": "seed",
    }
    variants = []
    for entry in overrides:
        unknown = set(entry) - set(key_map)
        if unknown:
            raise ValidationError(f"{args.grid}: unknown variant keys {sorted(unknown)}")
        variants.append(replace(base, **{key_map[k]: v for k, v in entry.items()}))
    report = grid_search(point, table, variants, split, mode)
    Path(args.out).write_text(report.to_csv())
    print(report.to_csv(), end="")
    if report.all_failed:
        print("all variants diverged", file=sys.stderr)
        return 3
    return 0


def cmd_registry(args) -> int:
    registry = ModelRegistry(args.registry)
    point = PointId(args.point)
    if args.registry_cmd == "list":
        infos = registry.list_versions(point)
        if not infos:
            print(f"{point}: no versions")
            return 0
        print(f"{'version':>7} {'created_at':<22} {'overall_mse':>14}")
        for info in infos:
            mse = "" if info.headline_mse is None else f"{info.headline_mse:.3f}"
            print(f"{info.version:>7} {format_ts(info.created_at):<22} {mse:>14}")
        return 0
    removed = registry.prune(point, args.keep)
    print(f"{point}: pruned versions {removed or 'none'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic campus dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=365)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("qc", help="sigma-screen dataset series and report")
    p.add_argument("--data", required=True)
    p.add_argument("--point")
    p.add_argument("--sigma", type=float, default=3.0)
    p.add_argument("--window", type=int, default=720, help="rolling hours; 0 = global")
    p.add_argument("--min-count", type=int, default=24)
    p.add_argument("--json")
    p.set_defaults(func=cmd_qc)

    p = sub.add_parser("train", help="train a model for the dataset's load point")
    p.add_argument("--data", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--mode", choices=FEATURE_MODES)
    p.add_argument("--curve", help="write the per-epoch loss curve CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a stored model on its test split")
    p.add_argument("--data", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--version", type=int)
    p.add_argument("--csv", help="write per-step MSE CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("forecast", help="issue an 18-hour grid from local data")
    p.add_argument("--data", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--at", help="issuance hour (ISO-8601), default last data hour")
    p.add_argument("--push", help="gateway URL to hisWrite the grid to")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("serve", help="serve the gateway over a dataset directory")
    p.add_argument("--bind", default="127.0.0.1:8421")
    p.add_argument("--data", required=True)
    p.add_argument("--registry")
    p.add_argument("--cache-log")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="gateway + scheduled forecast/retrain loop")
    p.add_argument("--config", required=True)
    p.add_argument("--until", help="stop once the clock passes this time")
    p.add_argument("--virtual-start", help="run against a simulated clock from this time")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid-search", help="train hyperparameter variants and rank them")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True, help="JSON array of train-config overrides")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=FEATURE_MODES)
    p.add_argument("--out", default="grid_search.csv")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("registry", help="inspect or prune stored model versions")
    p.add_argument("registry_cmd", choices=["list", "prune"])
    p.add_argument("--registry", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--keep", type=int, default=3, help="versions to keep when pruning")
    p.set_defaults(func=cmd_registry)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoadcastError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
