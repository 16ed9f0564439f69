"""Experiment orchestration: train/evaluate one configuration, sweep the
prediction horizon, label qualitative behaviour and rank the 12
architecture x method combinations."""
import csv
import io
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.stats import spearmanr

from . import dataio, metrics, uq
from .errors import ConfigurationError, InvalidArgumentError, TrainingDivergedError
from .ndcore import RngStream
from .neural import ModelConfig, TrainConfig, build_model, save_checkpoint, train
from .neural.model import ARCHITECTURES, DISPLAY_NAMES, METHODS

DATASETS = ("pm25", "jena") + dataio.SYNTH_KINDS
HORIZON_MODES = ("single", "sweep")
LABELS = ("Good", "Moderate", "Bad")
ROW_ORDER = tuple((a, m) for a in ARCHITECTURES for m in METHODS)


@dataclass
class ExperimentConfig:
    dataset: str = "sine"
    data_path: Optional[str] = None
    synth_n: int = 2000
    synth_noise: float = 0.1
    train_fraction: float = 0.8
    horizon_mode: str = "single"
    horizon_max: int = 12
    conf_steps: int = 20
    out_dir: Optional[str] = None
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        self.validate()

    def validate(self):
        if self.dataset not in DATASETS:
            raise ConfigurationError(f"unknown dataset {self.dataset!r}")
        if self.dataset in ("pm25", "jena") and not self.data_path:
            raise ConfigurationError(f"dataset {self.dataset!r} needs data_path")
        if self.horizon_mode not in HORIZON_MODES:
            raise ConfigurationError(f"unknown horizon_mode {self.horizon_mode!r}")
        if not 1 <= self.horizon_max <= 12:
            raise ConfigurationError("horizon_max must be in [1, 12]")
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError("train_fraction must be in (0, 1)")

    @property
    def run_name(self):
        return f"{self.model.architecture}_{self.model.uq_method}"

    @property
    def run_dir(self):
        if self.out_dir is None:
            return None
        return os.path.join(self.out_dir, self.dataset, self.run_name)

    def to_dict(self):
        return asdict(self)


@dataclass
class MetricReport:
    dataset: str
    architecture: str
    method: str
    bundle: metrics.MetricBundle
    reliability: metrics.ReliabilityCurve
    conf_error: metrics.ConfidenceErrorCurve
    per_step: Optional[List[metrics.MetricBundle]] = None
    horizon_label: Optional[str] = None
    conf_label: Optional[str] = None
    loss_history: list = field(default_factory=list)
    y_true: Optional[np.ndarray] = None
    prediction: Optional[uq.PredictiveDistribution] = None
    config: Optional[dict] = None

    @property
    def name(self):
        return f"{self.architecture}_{self.method}"


@dataclass
class RankingTable:
    rows: list  # (architecture, method) in fixed row order
    ranks: dict  # metric name -> int array aligned with rows
    horizon_labels: list
    conf_labels: list

    def row_label(self, k):
        a, m = self.rows[k]
        return f"{DISPLAY_NAMES[a]} {DISPLAY_NAMES[m]}"


# ------------------------------------------------------------- experiments

def load_dataset(cfg):
    if cfg.dataset == "pm25":
        return dataio.load_pm25(cfg.data_path)
    if cfg.dataset == "jena":
        return dataio.load_jena(cfg.data_path)
    if cfg.data_path:
        return dataio.read_frame_csv(cfg.data_path)
    return dataio.synth_series(cfg.dataset, cfg.synth_n, cfg.synth_noise, seed=cfg.train.seed)


def fit(model_cfg, train_ws, tcfg, rng, checkpoint_dir=None, context=""):
    """Train one model, or ``ensemble_size`` members for ensembles.

    Returns ``(model or list of members, loss histories)``.
    """
    count = model_cfg.ensemble_size if model_cfg.uq_method == "ensemble" else 1
    members, histories = [], []
    for k in range(count):
        member_rng = rng.split(("member", k))
        model = build_model(model_cfg, member_rng.split("init"))
        try:
            model, hist = train(model, train_ws, tcfg, member_rng.split("train"), context=context)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(exc.epoch, f"{context} member {k}".strip()) from None
        members.append(model)
        histories.append(hist)
        if checkpoint_dir is not None:
            fname = f"member_{k:02d}.npz" if count > 1 else "model.npz"
            save_checkpoint(model, os.path.join(checkpoint_dir, fname), seed=tcfg.seed)
    if model_cfg.uq_method == "ensemble":
        if count < 2:
            raise ConfigurationError("ensembles need ensemble_size >= 2")
        return members, histories
    return members[0], histories


def _context(cfg, horizon):
    return f"{cfg.dataset}/{cfg.run_name}/H={horizon}"


def _prepare(cfg, horizon):
    frames = load_dataset(cfg)
    train_ws, test_ws = dataio.split(frames, cfg.train_fraction, cfg.model.window, horizon)
    model_cfg = replace(cfg.model, horizon=horizon, n_features=frames.n_features)
    return model_cfg, train_ws, test_ws


def _labels_from_conf(curve):
    if len(curve.x) < 3:
        return "Bad"
    return classify_conf_error(curve)


def run_experiment(cfg):
    """Load, split, train, predict on the test split and score.

    Tables use an H=1 training. In sweep mode an additional H=12 training
    supplies per-step metrics and the horizon label. Writes the run
    directory when ``cfg.out_dir`` is set.
    """
    cfg.validate()
    rng = RngStream(cfg.train.seed)
    model_cfg, train_ws, test_ws = _prepare(cfg, 1)
    run_dir = cfg.run_dir
    ckpt = os.path.join(run_dir, "checkpoints") if run_dir else None
    if ckpt and os.path.isdir(ckpt):
        for name in os.listdir(ckpt):
            if name.endswith(".npz"):
                os.remove(os.path.join(ckpt, name))
    fitted, histories = fit(model_cfg, train_ws, cfg.train, rng.split("single"), ckpt, _context(cfg, 1))
    dist = uq.predict(fitted, test_ws.X, rng.split("predict"), model_cfg.mc_samples)
    report = evaluate(test_ws, dist, cfg.conf_steps)
    report.dataset = cfg.dataset
    report.architecture = cfg.model.architecture
    report.method = cfg.model.uq_method
    report.loss_history = histories
    report.config = {k: v for k, v in cfg.to_dict().items() if k != "out_dir"}
    if cfg.horizon_mode == "sweep":
        report.per_step = horizon_sweep(cfg, cfg.horizon_max)
        if len(report.per_step) >= 3:
            report.horizon_label = classify_horizon(report.per_step)
    if run_dir:
        write_run(report, run_dir)
    return report


def evaluate(test_ws, dist, conf_steps=20, step=0):
    """Score one horizon step of a predictive distribution."""
    y = test_ws.Y[:, step]
    mu = dist.mean[:, step]
    sd = dist.std[:, step]
    rel = metrics.reliability_curve(y, mu, sd)
    conf = metrics.error_vs_confidence(y, mu, sd, conf_steps)
    return MetricReport(
        dataset="",
        architecture="",
        method=dist.method,
        bundle=metrics.bundle(y, mu, sd, test_ws.target_scale),
        reliability=rel,
        conf_error=conf,
        conf_label=_labels_from_conf(conf),
        y_true=test_ws.Y,
        prediction=dist,
    )


def horizon_sweep(cfg, H_max=12):
    """One multi-step training; metrics computed separately per step."""
    rng = RngStream(cfg.train.seed).split("sweep")
    model_cfg, train_ws, test_ws = _prepare(cfg, H_max)
    ckpt = None
    if cfg.run_dir:
        ckpt = os.path.join(cfg.run_dir, "checkpoints", "sweep")
    fitted, _ = fit(model_cfg, train_ws, cfg.train, rng, ckpt, _context(cfg, H_max))
    dist = uq.predict(fitted, test_ws.X, rng.split("predict"), model_cfg.mc_samples)
    scale = test_ws.target_scale
    return [
        metrics.bundle(test_ws.Y[:, s], dist.mean[:, s], dist.std[:, s], scale)
        for s in range(H_max)
    ]


def _run_one(cfg):
    return run_experiment(cfg)


def run_grid(configs, jobs=1):
    """Run independent configurations, optionally in worker processes.

    Results come back in input order.
    """
    if jobs <= 1:
        return [run_experiment(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, configs))


def grid_configs(base):
    """The 12 architecture x method variants of ``base``."""
    return [
        replace(base, model=replace(base.model, architecture=a, uq_method=m, drop_prob=None))
        for a, m in ROW_ORDER
    ]


# ----------------------------------------------------------- qualitative

def _spearman(values):
    values = np.asarray(values, dtype=np.float64)
    if np.ptp(values) == 0:
        return 0.0
    rho = spearmanr(np.arange(len(values)), values).statistic
    return 0.0 if np.isnan(rho) else float(rho)


def _relative_spread(values):
    values = np.asarray(values, dtype=np.float64)
    return float(np.ptp(values) / max(abs(float(np.median(values))), 1e-9))


def _series(per_step, name):
    if isinstance(per_step, dict):
        return np.asarray(per_step[name], dtype=np.float64)
    return np.array([getattr(b, name) for b in per_step])


def horizon_checks(per_step, rho_min=0.5, spread_max=0.5):
    """The five horizon expectations as booleans keyed by metric."""
    mape = _series(per_step, "mape")
    if len(mape) < 3:
        raise InvalidArgumentError("need at least 3 horizon steps")
    return {
        "mape": _spearman(mape) >= rho_min,
        "mse": _spearman(_series(per_step, "mse")) >= rho_min,
        "r2": _spearman(_series(per_step, "r2")) <= -rho_min,
        "ece": _relative_spread(_series(per_step, "ece")) <= spread_max,
        "nll": _relative_spread(_series(per_step, "nll")) <= spread_max,
    }


def classify_horizon(per_step, rho_min=0.5, spread_max=0.5):
    """Good / Moderate / Bad from how many horizon expectations hold.

    ``per_step`` is a list of MetricBundle or a mapping metric -> values.
    """
    satisfied = sum(horizon_checks(per_step, rho_min, spread_max).values())
    if satisfied >= 3:
        return "Good"
    if satisfied == 2:
        return "Moderate"
    return "Bad"


def classify_conf_error(curve, good_frac=0.9, max_drop=0.1, moderate_frac=0.7):
    mae = np.asarray(curve.mae if hasattr(curve, "mae") else curve, dtype=np.float64)
    if mae.size < 3:
        raise InvalidArgumentError("need at least 3 curve points")
    steps = np.diff(mae)
    frac = float(np.mean(steps >= 0))
    span = float(np.ptp(mae))
    drop = float(max(0.0, -steps.min()) / span) if span > 0 else 0.0
    if frac >= good_frac and drop <= max_drop:
        return "Good"
    if frac >= moderate_frac:
        return "Moderate"
    return "Bad"


# ---------------------------------------------------------------- ranking

def _row_key(key):
    if isinstance(key, str):
        arch, method = key.split("_", 1)
        return arch.lower(), method.lower()
    arch, method = key
    return arch.lower(), method.lower()


def rank_models(bundles, horizon_labels=None, conf_labels=None):
    """Rank the 12 rows per metric (1 = best).

    ``bundles`` maps ``(architecture, method)`` or ``"arch_method"`` to a
    MetricBundle. R^2 ranks descending, all other metrics ascending. Ties
    keep the fixed row order.
    """
    table = {_row_key(k): v for k, v in bundles.items()}
    if len(table) != len(ROW_ORDER) or set(table) != set(ROW_ORDER):
        raise InvalidArgumentError(f"expected exactly the {len(ROW_ORDER)} architecture/method rows, got {len(table)}")
    ranks = {}
    for name in metrics.METRIC_NAMES:
        values = np.array([getattr(table[row], name) for row in ROW_ORDER])
        key = -values if name == "r2" else values
        order = np.argsort(key, kind="stable")
        r = np.empty(len(order), dtype=int)
        r[order] = np.arange(1, len(order) + 1)
        ranks[name] = r

    def labels(src):
        src = {_row_key(k): v for k, v in (src or {}).items()}
        return [src.get(row) for row in ROW_ORDER]

    return RankingTable(list(ROW_ORDER), ranks, labels(horizon_labels), labels(conf_labels))


RANK_COLUMNS = ("model",) + metrics.METRIC_NAMES + ("horizon", "conf_error")


def ranking_rows(ranking):
    out = []
    for k in range(len(ranking.rows)):
        out.append(
            [ranking.row_label(k)]
            + [str(ranking.ranks[m][k]) for m in metrics.METRIC_NAMES]
            + [ranking.horizon_labels[k] or "", ranking.conf_labels[k] or ""]
        )
    return out


def format_ranking(ranking):
    header = ["Model", "MAPE", "MSE", "R2", "Calib error", "NLL", "Horizon", "Conf vs Error"]
    body = ranking_rows(ranking)
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------- emission

def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise OSError(f"cannot write {path}: {exc}") from exc


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(v):
    return format(float(v), ".17g")


def write_run(report, run_dir):
    """Per-run files: metrics.json, per_horizon.csv, reliability.csv,
    conf_error.csv, predictions.csv, history.csv."""
    payload = {
        "dataset": report.dataset,
        "architecture": report.architecture,
        "method": report.method,
        "metrics": report.bundle.to_dict(),
        "horizon_label": report.horizon_label,
        "conf_label": report.conf_label,
        "per_step": [b.to_dict() for b in report.per_step] if report.per_step else None,
        "config": report.config,
    }
    _atomic_write_text(os.path.join(run_dir, "metrics.json"), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    per = report.per_step or []
    _atomic_write_text(
        os.path.join(run_dir, "per_horizon.csv"),
        _csv_text(("step",) + metrics.METRIC_NAMES,
                  [[s + 1] + [_f(getattr(b, m)) for m in metrics.METRIC_NAMES] for s, b in enumerate(per)]),
    )
    rel = report.reliability
    _atomic_write_text(
        os.path.join(run_dir, "reliability.csv"),
        _csv_text(("level", "coverage", "count"),
                  [[_f(p), _f(c), rel.count] for p, c in zip(rel.levels, rel.coverage)]),
    )
    ce = report.conf_error
    _atomic_write_text(
        os.path.join(run_dir, "conf_error.csv"),
        _csv_text(("x", "mae", "count"), [[_f(x), _f(e), int(k)] for x, e, k in zip(ce.x, ce.mae, ce.count)]),
    )
    if report.prediction is not None:
        d = report.prediction
        n, H = d.mean.shape
        rows = [[i, s + 1, _f(report.y_true[i, s]), _f(d.mean[i, s]), _f(d.std[i, s])]
                for i in range(n) for s in range(H)]
        _atomic_write_text(os.path.join(run_dir, "predictions.csv"), _csv_text(uq.PREDICTION_COLUMNS, rows))
    if report.loss_history:
        hist = report.loss_history
        rows = [[e + 1] + [_f(h[e]) for h in hist] for e in range(len(hist[0]))]
        header = ("epoch",) + tuple(f"member_{k}" for k in range(len(hist)))
        _atomic_write_text(os.path.join(run_dir, "history.csv"), _csv_text(header, rows))


def load_run(run_dir):
    """Read back the parts of a run directory needed for ranking."""
    with open(os.path.join(run_dir, "metrics.json")) as fh:
        payload = json.load(fh)
    per = payload.get("per_step")
    return MetricReport(
        dataset=payload["dataset"],
        architecture=payload["architecture"],
        method=payload["method"],
        bundle=metrics.MetricBundle.from_dict(payload["metrics"]),
        reliability=metrics.read_reliability_csv(os.path.join(run_dir, "reliability.csv")),
        conf_error=metrics.read_conf_error_csv(os.path.join(run_dir, "conf_error.csv")),
        per_step=[metrics.MetricBundle.from_dict(b) for b in per] if per else None,
        horizon_label=payload.get("horizon_label"),
        conf_label=payload.get("conf_label"),
        config=payload.get("config"),
    )


def write_ranking(ranking, dataset_dir):
    _atomic_write_text(os.path.join(dataset_dir, "ranking.csv"), _csv_text(RANK_COLUMNS, ranking_rows(ranking)))
    _atomic_write_text(os.path.join(dataset_dir, "ranking.txt"), format_ranking(ranking))


def emit_report(reports, ranking, out_dir):
    """Write run directories under ``<out>/<dataset>/<arch>_<method>`` and,
    when given, the ranking tables under ``<out>/<dataset>``."""
    if isinstance(reports, MetricReport):
        reports = [reports]
    datasets = set()
    for rep in reports:
        write_run(rep, os.path.join(out_dir, rep.dataset, rep.name))
        datasets.add(rep.dataset)
    if ranking is not None:
        if len(datasets) > 1:
            raise InvalidArgumentError("a ranking covers one dataset")
        write_ranking(ranking, os.path.join(out_dir, datasets.pop() if datasets else ""))


def rank_directory(dataset_dir):
    """Rank the 12 completed runs found in ``dataset_dir``."""
    bundles, hl, cl = {}, {}, {}
    for arch, method in ROW_ORDER:
        run_dir = os.path.join(dataset_dir, f"{arch}_{method}")
        if not os.path.exists(os.path.join(run_dir, "metrics.json")):
            raise InvalidArgumentError(f"missing run {run_dir}")
        rep = load_run(run_dir)
        bundles[(arch, method)] = rep.bundle
        hl[(arch, method)] = rep.horizon_label
        cl[(arch, method)] = rep.conf_label
    ranking = rank_models(bundles, hl, cl)
    write_ranking(ranking, dataset_dir)
    return ranking
