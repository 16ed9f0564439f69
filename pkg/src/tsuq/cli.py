"""Command-line entry point.

Subcommands::

    train     train and score one configuration (H=1, plus an H=12 sweep
              when experiment.horizon_mode = sweep)
    evaluate  re-score the checkpoints of a finished run
    sweep     run all 12 architecture x method variants with horizon
              sweeps, then rank them
    rank      rank the 12 completed runs of one dataset directory
    report    rank plus a summary table of raw metric values
    synth     write a synthetic series as CSV

Config files are INI with sections ``[experiment]``, ``[model]`` and
``[train]``; keys are the field names of ExperimentConfig, ModelConfig and
TrainConfig. ``--set section.key=value`` overrides a single key. The value
``none`` clears an optional key.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
import argparse
import configparser
import dataclasses
import glob
import os
import sys
import typing

from . import dataio, harness, metrics, uq
from .errors import ConfigurationError
from .ndcore import RngStream
from .neural import ModelConfig, TrainConfig, load_checkpoint

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

SECTIONS = {
    "experiment": harness.ExperimentConfig,
    "model": ModelConfig,
    "train": TrainConfig,
}
# Filled in by the harness, not by users.
_RESERVED = {"experiment": {"model", "train"}, "model": {"horizon", "n_features"}}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def config_keys():
    """``{section: {key: (type, optional)}}`` for every settable key."""
    out = {}
    for section, cls in SECTIONS.items():
        hints = typing.get_type_hints(cls)
        keys = {}
        for f in dataclasses.fields(cls):
            if f.name in _RESERVED.get(section, ()):
                continue
            tp = hints[f.name]
            args = [a for a in typing.get_args(tp) if a is not type(None)]
            optional = bool(typing.get_args(tp)) and len(args) == 1
            keys[f.name] = (args[0] if optional else tp, optional)
        out[section] = keys
    return out


def _convert(section, key, text):
    keys = config_keys()
    if section not in keys:
        raise UsageError(f"unknown config section {section!r}")
    if key not in keys[section]:
        raise UsageError(f"unknown config key {section}.{key}")
    tp, optional = keys[section][key]
    text = text.strip()
    if optional and text.lower() in ("none", ""):
        return None
    try:
        return tp(text)
    except ValueError:
        raise UsageError(f"bad value for {section}.{key}: {text!r}") from None


def load_config(path=None, overrides=(), out=None, seed=None):
    """Build an ExperimentConfig from an INI file plus overrides."""
    values = {s: {} for s in SECTIONS}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise UsageError(f"{path}: {exc}".replace("\n", " ")) from None
        for section in parser.sections():
            for key, text in parser.items(section):
                values.setdefault(section, {})[key] = _convert(section, key, text)
    for item in overrides:
        name, sep, text = item.partition("=")
        section, dot, key = name.partition(".")
        if not sep or not dot:
            raise UsageError(f"override must look like section.key=value: {item!r}")
        values[section][key] = _convert(section, key, text)
    if out is not None:
        values["experiment"]["out_dir"] = out
    if seed is not None:
        values["train"]["seed"] = seed
    return harness.ExperimentConfig(
        model=ModelConfig(**values["model"]),
        train=TrainConfig(**values["train"]),
        **values["experiment"],
    )


def _experiment(args):
    cfg = load_config(args.config, args.set, args.out, args.seed)
    if cfg.out_dir is None:
        cfg = dataclasses.replace(cfg, out_dir="runs")
    return cfg


def _show(args, text):
    if not args.quiet:
        print(text, flush=True)


def _summary(rep):
    b = rep.bundle
    line = (f"{rep.dataset}/{rep.name}: MAPE={b.mape:.4g} MSE={b.mse:.4g} R2={b.r2:.4g} "
            f"CE={b.ece:.4g} NLL={b.nll:.4g} conf={rep.conf_label}")
    if rep.horizon_label:
        line += f" horizon={rep.horizon_label}"
    return line


# ------------------------------------------------------------- commands

def cmd_train(args):
    cfg = _experiment(args)
    _show(args, f"training {cfg.dataset}/{cfg.run_name} ({cfg.train.epochs} epochs)")
    rep = harness.run_experiment(cfg)
    _show(args, _summary(rep))
    _show(args, f"wrote {cfg.run_dir}")


def _checkpoints(run_dir):
    ckpt = os.path.join(run_dir, "checkpoints")
    members = sorted(glob.glob(os.path.join(ckpt, "member_*.npz")))
    if members:
        return [load_checkpoint(p)[0] for p in members]
    single = os.path.join(ckpt, "model.npz")
    if not os.path.exists(single):
        raise FileNotFoundError(f"no checkpoints in {ckpt}")
    return load_checkpoint(single)[0]


def cmd_evaluate(args):
    old = harness.load_run(args.input)
    if not old.config:
        raise ConfigurationError(f"{args.input}: metrics.json has no embedded config")
    cfg = harness.ExperimentConfig(**old.config)
    fitted = _checkpoints(args.input)
    _, _, test_ws = harness._prepare(cfg, 1)
    rng = RngStream(cfg.train.seed)
    dist = uq.predict(fitted, test_ws.X, rng.split("predict"), cfg.model.mc_samples)
    rep = harness.evaluate(test_ws, dist, cfg.conf_steps)
    rep.dataset, rep.architecture, rep.method = old.dataset, old.architecture, old.method
    rep.per_step, rep.horizon_label, rep.config = old.per_step, old.horizon_label, old.config
    dest = args.out or args.input
    harness.write_run(rep, dest)
    _show(args, _summary(rep))
    _show(args, f"wrote {dest}")


def cmd_sweep(args):
    base = dataclasses.replace(_experiment(args), horizon_mode="sweep")
    configs = harness.grid_configs(base)
    _show(args, f"running {len(configs)} configurations on {base.dataset} with {args.jobs} job(s)")
    reports = harness.run_grid(configs, args.jobs)
    for rep in reports:
        _show(args, _summary(rep))
    ranking = harness.rank_directory(os.path.join(base.out_dir, base.dataset))
    _show(args, harness.format_ranking(ranking))


def cmd_rank(args):
    ranking = harness.rank_directory(args.input)
    _show(args, harness.format_ranking(ranking))
    _show(args, f"wrote {os.path.join(args.input, 'ranking.csv')}")


def cmd_report(args):
    ranking = harness.rank_directory(args.input)
    rows = []
    for arch, method in harness.ROW_ORDER:
        rep = harness.load_run(os.path.join(args.input, f"{arch}_{method}"))
        rows.append([rep.name] + [harness._f(getattr(rep.bundle, m)) for m in metrics.METRIC_NAMES]
                    + [rep.horizon_label or "", rep.conf_label or ""])
    header = ("model",) + metrics.METRIC_NAMES + ("horizon", "conf_error")
    harness._atomic_write_text(os.path.join(args.input, "summary.csv"), harness._csv_text(header, rows))
    _show(args, harness.format_ranking(ranking))
    for row in rows:
        _show(args, "  ".join([f"{row[0]:<18}"] + [f"{float(v):>10.4g}" for v in row[1:6]] + row[6:]))
    _show(args, f"wrote ranking.csv, ranking.txt and summary.csv in {args.input}")


def cmd_synth(args):
    frames = dataio.synth_series(args.kind, args.n, args.noise, args.seed or 0)
    dataio.write_frame_csv(frames, args.out)
    _show(args, f"wrote {len(frames)} rows of {args.kind} to {args.out}")


# --------------------------------------------------------------- parser

def build_parser():
    parser = _Parser(prog="tsuq", description="Uncertainty quantification benchmark for time-series forecasting.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def common(p, out_help):
        p.add_argument("--out", help=out_help)
        p.add_argument("--seed", type=int, help="master seed (overrides train.seed)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    def configurable(p):
        p.add_argument("--config", help="INI file with [experiment], [model], [train] sections")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config key (repeatable)")

    p = sub.add_parser("train", help="train and score one configuration")
    configurable(p)
    common(p, "output root (default: experiment.out_dir, else runs)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="re-score a finished run from its checkpoints")
    p.add_argument("--in", dest="input", required=True, help="run directory <out>/<dataset>/<arch>_<method>")
    p.add_argument("--out", help="write the re-scored files here instead of in place")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run all 12 variants with horizon sweeps and rank them")
    configurable(p)
    common(p, "output root (default: experiment.out_dir, else runs)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    p.set_defaults(func=cmd_sweep)

    for name, func, text in (("rank", cmd_rank, "rank the 12 runs of a dataset directory"),
                             ("report", cmd_report, "rank and summarise the 12 runs of a dataset directory")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--in", dest="input", required=True, help="dataset directory <out>/<dataset>")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a synthetic series as CSV")
    p.add_argument("--kind", choices=dataio.SYNTH_KINDS, default="sine", help="series shape (default: sine)")
    p.add_argument("--n", type=int, default=2000, help="number of rows (default: 2000)")
    p.add_argument("--noise", type=float, default=0.1, help="Gaussian noise std (default: 0.1)")
    common(p, "CSV path to write")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        if args.command == "synth" and not args.out:
            raise UsageError("synth: --out is required")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ArithmeticError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
