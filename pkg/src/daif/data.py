"""CSV ingestion, chronological splits, sliding windows, per-window scaling,
and seeded synthetic series."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

STD_FLOOR = 1e-8
_SYNTH_START = datetime(2016, 7, 1)
_DATE_FMT = "%Y-%m-%d %H:%M:%S"


class LoadError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


class SplitError(ValueError):
    def __init__(self, split: str, message: str):
        super().__init__(f"{split} split: {message}")
        self.split = split


@dataclass
class MultivariateSeries:
    values: np.ndarray
    variate_names: list[str]
    timestamps: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError(f"values must be (T_total, N>=1), got {self.values.shape}")
        if len(self.variate_names) != self.values.shape[1]:
            raise ValueError("one name per variate column is required")
        if self.timestamps is not None and len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values disagree in length")

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class Window:
    x: np.ndarray
    y: np.ndarray
    norm_stats: tuple[np.ndarray, np.ndarray] | None = None


def load_csv(path) -> MultivariateSeries:
    """Read a benchmark-style CSV: header row, optional leading ``date`` column."""
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise LoadError(f"{path} is empty")
        has_date = header[0].strip().lower() == "date"
        names = [h.strip() for h in (header[1:] if has_date else header)]
        if not names:
            raise LoadError("no value columns", row=1)
        stamps, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise LoadError(f"expected {len(header)} fields, found {len(row)}", row=lineno)
            if has_date:
                stamps.append(row[0])
                row = row[1:]
            parsed = []
            for name, cell in zip(names, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise LoadError(f"non-numeric value {cell!r}", row=lineno, column=name) from None
                if not math.isfinite(v):
                    raise LoadError(f"missing or non-finite value {cell!r}", row=lineno, column=name)
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise LoadError(f"{path} has a header but no data rows")
    return MultivariateSeries(np.array(rows), names, stamps if has_date else None)


def write_csv(series: MultivariateSeries, path) -> None:
    """Write ``series`` in the format :func:`load_csv` reads (lossless floats)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        stamped = series.timestamps is not None
        w.writerow((["date"] if stamped else []) + list(series.variate_names))
        for i, row in enumerate(series.values):
            cells = [repr(float(v)) for v in row]
            w.writerow(([series.timestamps[i]] if stamped else []) + cells)


# windows -----------------------------------------------------------------

def window_count(n: int, lookback: int, horizon: int, stride: int = 1) -> int:
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if n < lookback + horizon:
        raise ValueError(f"segment of {n} rows is shorter than lookback+horizon={lookback + horizon}")
    return (n - lookback - horizon) // stride + 1


def sliding_windows(values, lookback: int, horizon: int, stride: int = 1) -> tuple[int, Iterator[Window]]:
    """Count and lazily yield raw windows; window i starts at row i*stride."""
    values = np.asarray(values, dtype=np.float64)
    count = window_count(len(values), lookback, horizon, stride)

    def gen():
        for i in range(count):
            s = i * stride
            yield Window(values[s: s + lookback], values[s + lookback: s + lookback + horizon])

    return count, gen()


def standardize(window: Window) -> Window:
    """Scale x and y by x's per-variate mean and (floored) std."""
    mean = window.x.mean(axis=-2, keepdims=True)
    std = np.maximum(window.x.std(axis=-2, keepdims=True), STD_FLOOR)
    return Window((window.x - mean) / std, (window.y - mean) / std, (mean, std))


def destandardize(window: Window) -> Window:
    mean, std = window.norm_stats
    return Window(window.x * std + mean, window.y * std + mean, None)


class WindowSet:
    """All stride-spaced windows of one segment, gathered and scaled in batches."""

    def __init__(self, values, lookback: int, horizon: int, stride: int = 1):
        self.values = np.asarray(values, dtype=np.float64)
        self.lookback, self.horizon, self.stride = lookback, horizon, stride
        self.count = window_count(len(self.values), lookback, horizon, stride)
        # (windows, N, T+S) view; no copy
        self._view = sliding_window_view(self.values, lookback + horizon, axis=0)[::stride]

    def __len__(self) -> int:
        return self.count

    def batch(self, indices: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Standardized (B, T, N) lookbacks and (B, S, N) targets."""
        w = np.swapaxes(self._view[np.asarray(indices, dtype=np.intp)], -1, -2)
        scaled = standardize(Window(w[:, : self.lookback], w[:, self.lookback:]))
        return scaled.x, scaled.y

    def window(self, index: int) -> Window:
        s = index * self.stride
        return Window(self.values[s: s + self.lookback],
                      self.values[s + self.lookback: s + self.lookback + self.horizon])


# splits ------------------------------------------------------------------

class SplitMode(str, enum.Enum):
    RATIO = "ratio"
    ETT_MONTHS = "ett_months"


@dataclass
class SplitSpec:
    mode: SplitMode = SplitMode.RATIO
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2)

    def __post_init__(self):
        self.mode = SplitMode(self.mode)
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError("ratios must be three non-negative numbers")
        if self.mode is SplitMode.RATIO and not math.isclose(sum(self.ratios), 1.0):
            raise ValueError(f"ratios {self.ratios} do not sum to 1")


@dataclass
class Splits:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    # [start, stop) rows of the source series for each segment, lookback prefix included
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)


def _rows_per_month(timestamps: Sequence[str]) -> int:
    if timestamps is None or len(timestamps) < 2:
        raise SplitError("train", "ETT month split needs a date column")
    t0, t1 = (datetime.fromisoformat(t.strip()) for t in timestamps[:2])
    step = (t1 - t0).total_seconds()
    if step <= 0:
        raise SplitError("train", "timestamps are not increasing")
    return int(round(30 * 24 * 3600 / step))


def split(series: MultivariateSeries, spec: SplitSpec, lookback: int,
          horizon: int | None = None) -> Splits:
    """Chronological train/val/test segments.

    Val and test start ``lookback`` rows early so their first target row
    directly follows the previous split. With ``horizon`` set, every segment
    must hold at least one window.
    """
    n = len(series)
    if spec.mode is SplitMode.ETT_MONTHS:
        month = _rows_per_month(series.timestamps)
        n_train, n_val, n_test = 12 * month, 4 * month, 4 * month
        if n < n_train + n_val + n_test:
            raise SplitError("test", f"ETT month split needs {n_train + n_val + n_test} rows, have {n}")
    else:
        n_train = int(n * spec.ratios[0])
        n_test = int(n * spec.ratios[2])
        n_val = n - n_train - n_test
    need = (horizon or 1)
    for name, size in (("train", n_train), ("val", n_val), ("test", n_test)):
        if size < need:
            raise SplitError(name, f"{size} target rows, need at least {need}")
    if n_train < lookback + need:
        raise SplitError("train", f"{n_train} rows cannot hold lookback {lookback} plus a target")
    bounds = {
        "train": (0, n_train),
        "val": (n_train - lookback, n_train + n_val),
        "test": (n_train + n_val - lookback, n_train + n_val + n_test),
    }
    v = series.values
    return Splits(*(v[a:b] for a, b in bounds.values()), bounds=bounds)


# synthetic data ----------------------------------------------------------

def synth_generate(n_vars: int, length: int, frequencies: Sequence[Sequence[float]],
                   noise_sigma: float, seed: int, trend: float = 0.0) -> MultivariateSeries:
    """Sum-of-sinusoids series with Gaussian noise.

    ``frequencies[n]`` lists variate n's tones in cycles per sample. Amplitudes
    (uniform in [0.5, 1.5]) and phases come from one seeded stream, the noise
    from another, so ``noise_sigma=0`` yields exactly the clean signal.
    """
    if n_vars < 1 or length < 1:
        raise ValueError("n_vars and length must be positive")
    if len(frequencies) != n_vars:
        raise ValueError(f"need one frequency list per variate, got {len(frequencies)}")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    shape_rng = np.random.default_rng([seed, 0])
    noise_rng = np.random.default_rng([seed, 1])
    t = np.arange(length, dtype=np.float64)
    values = np.empty((length, n_vars))
    for n, freqs in enumerate(frequencies):
        col = trend * t / length
        for f in freqs:
            amp = shape_rng.uniform(0.5, 1.5)
            phase = shape_rng.uniform(0.0, 2 * np.pi)
            col = col + amp * np.cos(2 * np.pi * f * t + phase)
        values[:, n] = col
    values += noise_sigma * noise_rng.standard_normal((length, n_vars))
    stamps = [(_SYNTH_START + timedelta(hours=i)).strftime(_DATE_FMT) for i in range(length)]
    return MultivariateSeries(values, [f"var{n}" for n in range(n_vars)], stamps)
