"""Experiment configuration, dataset ingestion, and metrics CSV output."""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, fields, replace

import numpy as np

from .runtime.metrics import ExperimentMetrics
from .trainers import LabeledDataset, Model

__all__ = [
    "ConfigError",
    "DataError",
    "ExperimentConfig",
    "parse_config_file",
    "config_from_mapping",
    "synth_dataset",
    "load_csv",
    "metrics_rows",
    "write_metrics_csv",
    "METRICS_HEADER",
]

METRICS_HEADER = [
    "phase",
    "id",
    "downloads",
    "downloads_x",
    "downloads_xt",
    "encode_nanos",
    "wall_nanos",
    "responders_used",
    "extra_workers",
    "cancelled",
    "objective",
]


class ConfigError(ValueError):
    """Bad experiment configuration (usage error, exit code 2)."""


class DataError(ValueError):
    """Dataset file contents violate the expected layout."""


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 5
    k: int = 3
    scheme: str = "mds"  # mds | rs | rlnc
    model: str = "lr"  # lr | svm
    num_iter: int = 100
    eta: float = 0.1
    lam: float = 0.01
    stragglers: str = "0"  # count, or comma-separated explicit ids
    straggler_mode: str = "fixed-delay"  # fixed-delay | slowdown
    straggler_magnitude: float = 0.05  # seconds, or factor for slowdown
    dataset: str = "synthetic"  # synthetic | csv
    rows: int = 400
    cols: int = 20
    csv_path: str = ""
    header: bool = False
    seed_data: int = 1
    seed_weights: int = 2
    seed_rlnc: int = 3
    seed_stragglers: int = 4
    transport: str = "in-process"  # in-process | loopback
    output: str = "metrics.csv"
    weights_out: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.k < 1 or self.n < self.k:
            raise ConfigError(f"need n >= k >= 1, got n={self.n}, k={self.k}")
        if self.num_iter < 0:
            raise ConfigError(f"num_iter must be >= 0, got {self.num_iter}")
        if self.scheme not in ("mds", "rs", "rlnc"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.model not in ("lr", "svm"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.straggler_mode not in ("fixed-delay", "slowdown"):
            raise ConfigError(f"unknown straggler mode {self.straggler_mode!r}")
        if self.dataset not in ("synthetic", "csv"):
            raise ConfigError(f"unknown dataset kind {self.dataset!r}")
        if self.dataset == "csv" and not self.csv_path:
            raise ConfigError("dataset=csv requires csv-path")
        if self.transport not in ("in-process", "loopback"):
            raise ConfigError(f"unknown transport {self.transport!r}")
        ids = self.straggler_ids()
        if isinstance(ids, int) and ids > self.n:
            raise ConfigError(f"{ids} stragglers for {self.n} workers")
        elif isinstance(ids, list) and len(ids) > self.n:
            raise ConfigError(f"{len(ids)} stragglers for {self.n} workers")
        return self

    def straggler_ids(self):
        """The stragglers field: an int count or explicit ids."""
        text = str(self.stragglers).strip()
        try:
            if "," in text:
                ids = sorted({int(tok) for tok in text.split(",") if tok.strip()})
            else:
                return int(text) if text else 0
        except ValueError as exc:
            raise ConfigError(f"bad stragglers spec {text!r}") from exc
        for i in ids:
            if not 0 <= i < self.n:
                raise ConfigError(f"straggler id {i} outside [0, {self.n})")
        return ids

    @property
    def model_enum(self) -> Model:
        return Model.LOGISTIC_REGRESSION if self.model == "lr" else Model.SVM


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    text = str(raw).strip()
    if f.type in ("int", int):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{name} expects an integer, got {text!r}") from exc
    if f.type in ("float", float):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{name} expects a number, got {text!r}") from exc
    if f.type in ("bool", bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name} expects a boolean, got {text!r}")
    return text


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    updates = {}
    for key, raw in mapping.items():
        name = key.strip().replace("-", "_")
        if name == "lambda":
            name = "lam"
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        updates[name] = raw if not isinstance(raw, str) else _coerce(name, raw)
    return replace(cfg, **updates)


def parse_config_file(path: str) -> dict:
    """key = value lines; '#' starts a comment; blank lines ignored."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = text.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


def synth_dataset(rows: int, cols: int, seed: int, model: Model) -> LabeledDataset:
    """Gaussian features, labels from a random hyperplane with 10% flips."""
    if rows < 1 or cols < 1:
        raise ValueError(f"need rows, cols >= 1, got {rows}x{cols}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((rows, cols))
    truth = rng.standard_normal(cols)
    positive = (x @ truth) > 0
    flip = rng.random(rows) < 0.10
    positive = positive ^ flip
    if model is Model.LOGISTIC_REGRESSION:
        y = positive.astype(np.float64)
    else:
        y = np.where(positive, 1.0, -1.0)
    return LabeledDataset(x, y, rows)


def load_csv(path: str, model: Model, header: bool = False) -> LabeledDataset:
    """First column is the label, the rest are features.

    Accepts labels in {0, 1} or {-1, +1} and maps them to the model's
    coding (0/1 for LR, -1/+1 for SVM).
    """
    labels: list[float] = []
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) < 2:
                raise DataError(f"{path}:{lineno}: need a label plus features")
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataError(
                    f"{path}:{lineno}: ragged row ({len(record)} fields, expected {width})"
                )
            try:
                values = [float(tok) for tok in record]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell") from None
            labels.append(values[0])
            rows.append(values[1:])
    if not rows:
        raise DataError(f"{path}: no data rows")
    y = np.array(labels)
    bad = ~np.isin(y, (-1.0, 0.0, 1.0))
    if bad.any():
        raise DataError(f"{path}: label {y[bad][0]} outside {{-1, 0, 1}}")
    if model is Model.LOGISTIC_REGRESSION:
        y = np.where(y > 0, 1.0, 0.0)
    else:
        y = np.where(y > 0, 1.0, -1.0)
    x = np.array(rows)
    return LabeledDataset(x, y, x.shape[0])


def metrics_rows(metrics: ExperimentMetrics) -> list[list]:
    """Flatten metrics into CSV rows: encode rows, iteration rows, a total."""
    out: list[list] = []
    for w in metrics.workers:
        out.append(
            [
                "encode",
                w.worker_id,
                w.downloads,
                w.downloads_x,
                w.downloads_xt,
                w.encode_nanos,
                "",
                "",
                "",
                "",
                "",
            ]
        )
    for it in metrics.iterations:
        out.append(
            [
                "iterate",
                it.iteration,
                "",
                "",
                "",
                "",
                it.wall_nanos,
                it.responders_used,
                it.extra_workers,
                it.cancelled,
                f"{it.objective:.12g}",
            ]
        )
    final_obj = metrics.iterations[-1].objective if metrics.iterations else ""
    out.append(
        [
            "total",
            "",
            metrics.total_downloads,
            sum(w.downloads_x for w in metrics.workers),
            sum(w.downloads_xt for w in metrics.workers),
            metrics.total_encode_nanos,
            metrics.total_iteration_nanos,
            sum(i.responders_used for i in metrics.iterations),
            metrics.total_extra_workers,
            sum(i.cancelled for i in metrics.iterations),
            f"{final_obj:.12g}" if final_obj != "" else "",
        ]
    )
    return out


def write_metrics_csv(path: str, metrics: ExperimentMetrics) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        writer.writerows(metrics_rows(metrics))
