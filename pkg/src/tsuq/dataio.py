"""Dataset ingestion, standardisation, windowing and synthetic series.

Two published formats are supported:

* Beijing PM2.5 hourly CSV (``No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,
  cbwd,Iws,Is,Ir``), target ``pm2.5``.
* Jena climate 10-minute CSV (``Date Time`` plus 14 measurements), reduced
  to hourly by keeping every 6th row, target ``p (mbar)``.
"""
import csv
import json
import math
import os
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, FormatError, InvalidArgumentError
from .ndcore import RngStream

PM25_COLUMNS = ("No", "year", "month", "day", "hour", "pm2.5", "DEWP", "TEMP", "PRES", "cbwd", "Iws", "Is", "Ir")
PM25_FEATURES = ("pm2.5", "DEWP", "TEMP", "PRES", "cbwd", "Iws", "Is", "Ir")
WIND_CODES = {"NE": 0.0, "NW": 1.0, "SE": 2.0, "cv": 3.0}

JENA_TIME_COLUMN = "Date Time"
JENA_FEATURES = (
    "p (mbar)", "T (degC)", "Tpot (K)", "Tdew (degC)", "rh (%)", "VPmax (mbar)",
    "VPact (mbar)", "VPdef (mbar)", "sh (g/kg)", "H2OC (mmol/mol)",
    "rho (g/m**3)", "wv (m/s)", "max. wv (m/s)", "wd (deg)",
)
JENA_STRIDE = 6


@dataclass
class FrameTable:
    timestamps: np.ndarray  # datetime64[m], strictly increasing
    features: np.ndarray  # (T, F)
    names: tuple
    target: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise InvalidArgumentError("features must be a (T, F) array")
        if len(self.timestamps) != self.features.shape[0]:
            raise InvalidArgumentError("timestamps and features differ in length")
        if len(self.names) != self.features.shape[1]:
            raise InvalidArgumentError("one name per feature column is required")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def target_values(self):
        return self.features[:, self.target]

    def rows(self, start, stop):
        return replace(self, timestamps=self.timestamps[start:stop], features=self.features[start:stop])


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    names: tuple = ()

    def to_dict(self):
        return {"names": list(self.names), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64), tuple(d["names"]))


@dataclass
class WindowSet:
    X: np.ndarray  # (n, past, F)
    Y: np.ndarray  # (n, H)
    norm_stats: NormStats = None
    target: int = 0
    start_index: int = 0  # series offset of window 0's first input

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def horizon(self):
        return self.Y.shape[1]

    @property
    def target_scale(self):
        """``(mean, std)`` that maps standardised targets back to data units."""
        if self.norm_stats is None:
            return 0.0, 1.0
        return float(self.norm_stats.mean[self.target]), float(self.norm_stats.std[self.target])

    def destandardize(self, values):
        m, s = self.target_scale
        return np.asarray(values) * s + m


# ---------------------------------------------------------------- loaders

def _read_header(reader, path, required):
    header = next(reader, None)
    if header is None:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in header]
    missing = [c for c in required if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}", line=1)
    return {name: header.index(name) for name in required}


def _check_increasing(ts, path):
    if len(ts) > 1:
        bad = np.nonzero(np.diff(ts.astype(np.int64)) <= 0)[0]
        if bad.size:
            raise FormatError(f"{path}: timestamps not strictly increasing at data row {bad[0] + 2}")


def load_pm25(path):
    """Load the Beijing PM2.5 file.

    Missing ``pm2.5`` values are forward-filled; rows before the first
    observed value are dropped. ``cbwd`` is label-encoded (NE=0, NW=1,
    SE=2, cv=3).
    """
    stamps, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        col = _read_header(reader, path, PM25_COLUMNS)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                y, mo, d, h = (int(rec[col[c]]) for c in ("year", "month", "day", "hour"))
                stamps.append(np.datetime64(f"{y:04d}-{mo:02d}-{d:02d}T{h:02d}:00", "m"))
                pm = rec[col["pm2.5"]].strip()
                wind = rec[col["cbwd"]].strip()
                if wind not in WIND_CODES:
                    raise ValueError(f"unknown wind direction {wind!r}")
                values = [
                    math.nan if pm in ("", "NA") else float(pm),
                    float(rec[col["DEWP"]]), float(rec[col["TEMP"]]), float(rec[col["PRES"]]),
                    WIND_CODES[wind],
                    float(rec[col["Iws"]]), float(rec[col["Is"]]), float(rec[col["Ir"]]),
                ]
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from None
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    feats = np.array(rows)
    ts = np.array(stamps)
    pm = feats[:, 0]
    observed = np.nonzero(~np.isnan(pm))[0]
    if observed.size == 0:
        raise FormatError(f"{path}: pm2.5 column has no observed values")
    first = observed[0]
    feats, ts = feats[first:], ts[first:]
    pm = feats[:, 0]
    for i in range(1, len(pm)):
        if np.isnan(pm[i]):
            pm[i] = pm[i - 1]
    if np.isnan(feats).any():
        raise FormatError(f"{path}: missing values outside the pm2.5 column")
    _check_increasing(ts, path)
    return FrameTable(ts, feats, PM25_FEATURES, target=0)


def _parse_jena_time(text):
    # "01.01.2009 00:10:00"
    date, clock = text.strip().split(" ")
    d, m, y = date.split(".")
    return np.datetime64(f"{y}-{m}-{d}T{clock[:5]}", "m")


def load_jena(path, stride=JENA_STRIDE):
    """Load the Jena climate file keeping rows 0, 6, 12, ... (hourly)."""
    stamps, rows = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        col = _read_header(reader, path, (JENA_TIME_COLUMN,) + JENA_FEATURES)
        k = 0
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            keep = k % stride == 0
            k += 1
            if not keep:
                continue
            try:
                stamps.append(_parse_jena_time(rec[col[JENA_TIME_COLUMN]]))
                rows.append([float(rec[col[c]]) for c in JENA_FEATURES])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    ts = np.array(stamps)
    _check_increasing(ts, path)
    return FrameTable(ts, np.array(rows), JENA_FEATURES, target=0)


# ---------------------------------------------------------- preprocessing

def standardize(frames, stats=None):
    """Z-score every feature. Returns ``(standardised frames, stats)``."""
    x = frames.features
    if stats is None:
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        zero = np.nonzero(~(std > 0))[0]
        if zero.size:
            raise ConfigurationError(f"feature {frames.names[zero[0]]!r} has zero variance")
        stats = NormStats(mean, std, tuple(frames.names))
    elif stats.mean.shape != (frames.n_features,):
        raise ConfigurationError(
            f"stats cover {stats.mean.shape[0]} features, frame has {frames.n_features}"
        )
    return replace(frames, features=(x - stats.mean) / stats.std), stats


def destandardize(frames, stats):
    return replace(frames, features=frames.features * stats.std + stats.mean)


def make_windows(frames, past=12, horizon=1, norm_stats=None, start_index=0):
    """Stride-1 sliding windows: ``past`` input rows, then ``horizon``
    target values."""
    T = len(frames)
    if past < 1 or horizon < 1:
        raise InvalidArgumentError("past and horizon must be >= 1")
    if T < past + horizon:
        raise InvalidArgumentError(f"series of length {T} is too short for past={past}, horizon={horizon}")
    n = T - past - horizon + 1
    feats = frames.features
    target = frames.target_values
    X = np.lib.stride_tricks.sliding_window_view(feats, past, axis=0)[:n]
    X = np.ascontiguousarray(np.moveaxis(X, -1, 1))
    Y = np.ascontiguousarray(np.lib.stride_tricks.sliding_window_view(target[past:], horizon)[:n])
    return WindowSet(X, Y, norm_stats, frames.target, start_index)


def split(frames, train_fraction=0.8, past=12, horizon=1, normalize=True):
    """Chronological split on the series itself, then windows per side.

    Statistics for standardisation come from the training rows only. No
    test window touches a row before the split boundary.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    T = len(frames)
    cut = int(math.floor(T * train_fraction))
    train_rows, test_rows = frames.rows(0, cut), frames.rows(cut, T)
    need = past + horizon
    if len(train_rows) < need or len(test_rows) < need:
        raise InvalidArgumentError(
            f"split at {cut} of {T} leaves a side with no windows (need {need} rows per side)"
        )
    stats = None
    if normalize:
        train_rows, stats = standardize(train_rows)
        test_rows, _ = standardize(test_rows, stats)
    return (
        make_windows(train_rows, past, horizon, stats, start_index=0),
        make_windows(test_rows, past, horizon, stats, start_index=cut),
    )


# ---------------------------------------------------------------- synthetic

SYNTH_KINDS = ("sine", "ar1", "linear")


def synth_series(kind, n, noise_std=0.0, seed=0):
    if n < 30:
        raise InvalidArgumentError("synthetic series need n >= 30")
    if kind not in SYNTH_KINDS:
        raise InvalidArgumentError(f"unknown synthetic kind {kind!r}")
    rng = RngStream(seed).split(f"synth-{kind}")
    noise = noise_std * rng.generator.standard_normal(n)
    t = np.arange(n, dtype=np.float64)
    if kind == "sine":
        values = np.sin(2.0 * np.pi * t / 24.0) + noise
    elif kind == "linear":
        values = 0.01 * t + noise
    else:
        values = np.empty(n)
        values[0] = 1.0
        for i in range(1, n):
            values[i] = 0.9 * values[i - 1] + noise[i]
    stamps = np.datetime64("2000-01-01T00:00", "m") + np.arange(n) * np.timedelta64(60, "m")
    return FrameTable(stamps, values[:, None], (kind,), target=0)


def write_frame_csv(frames, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("timestamp",) + tuple(frames.names))
        for ts, row in zip(frames.timestamps, frames.features):
            w.writerow([str(ts)] + [format(v, ".17g") for v in row])


def read_frame_csv(path, target=0):
    """Read the generic ``timestamp,<features...>`` layout written by
    :func:`write_frame_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "timestamp" or len(header) < 2:
            raise FormatError(f"{path}: expected a 'timestamp' column followed by features", line=1)
        stamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            try:
                stamps.append(np.datetime64(rec[0], "m"))
                rows.append([float(v) for v in rec[1:]])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: {exc}", line=lineno) from None
    ts = np.array(stamps)
    _check_increasing(ts, path)
    return FrameTable(ts, np.array(rows), tuple(header[1:]), target=target)


# ------------------------------------------------------------ window cache

WINDOW_MAGIC = b"TSUQWIN1"


def save_windows(ws, path):
    """Binary cache: magic, then X and Y each as ``<u4 ndim>``, ``<u8`` dims
    and little-endian float64 data in row-major order, then the target index.
    Norm stats go to ``<path>.stats.json``."""
    with open(path, "wb") as fh:
        fh.write(WINDOW_MAGIC)
        for arr in (ws.X, ws.Y):
            arr = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes(order="C"))
        fh.write(struct.pack("<qq", ws.target, ws.start_index))
    if ws.norm_stats is not None:
        with open(str(path) + ".stats.json", "w") as fh:
            json.dump(ws.norm_stats.to_dict(), fh, indent=2)


def load_windows(path):
    with open(path, "rb") as fh:
        if fh.read(len(WINDOW_MAGIC)) != WINDOW_MAGIC:
            raise FormatError(f"{path}: not a window cache")
        arrays = []
        for _ in range(2):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            if data.size != count:
                raise FormatError(f"{path}: truncated array data")
            arrays.append(data.reshape(shape).astype(np.float64))
        target, start = struct.unpack("<qq", fh.read(16))
    stats = None
    stats_path = str(path) + ".stats.json"
    if os.path.exists(stats_path):
        with open(stats_path) as fh:
            stats = NormStats.from_dict(json.load(fh))
    return WindowSet(arrays[0], arrays[1], stats, target, start)
