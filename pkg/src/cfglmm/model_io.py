"""File formats: versioned JSON model persistence and the CSV dataset layout.

Dataset CSV header: ``x,y,response[,offset][,cov_1..cov_K]``. Site CSVs for
prediction use the same layout with ``response`` optional. Numeric output uses
12 significant digits; model JSON keeps full float precision so that a
save/load round trip reproduces predictions bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
import re

import numpy as np

from .data import Dataset, FitConfig, HvSplit, ValidationError, make_split
from .experts import ScaleLayer
from .learner import CfModel, ScaleRecord
from .families import get_family

MODEL_FORMAT_VERSION = 1

_NUM_FMT = "%.12g"


class CsvFormatError(ValueError):
    """Structurally malformed CSV (bad header, bad row, unparseable number)."""


class ModelFormatError(ValueError):
    """Model JSON does not match the expected schema."""


def _fmt(x: float) -> str:
    return _NUM_FMT % x


# ---------------------------------------------------------------------------
# model persistence


def save_model(model: CfModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "family": model.family.tag,
        "config": {
            "train_fraction": model.config.train_fraction,
            "bandwidth_decay": model.config.bandwidth_decay,
            "patience": model.config.patience,
            "center_density": model.config.center_density,
            "initial_bandwidth": model.config.initial_bandwidth,
            "rng_seed": model.config.rng_seed,
            "max_scales": model.config.max_scales,
            "min_effective_weight": model.config.min_effective_weight,
            "irls_max_iter": model.config.irls_max_iter,
            "irls_tol": model.config.irls_tol,
            "aggregation_weight_power": model.config.aggregation_weight_power,
        },
        "split_seed": model.config.rng_seed,
        "n_sites": model.n_sites,
        "n_covariates": model.n_covariates,
        "beta": [float(b) for b in model.beta],
        "initial_deviance": model.initial_deviance,
        "validation_deviance": model.validation_deviance,
        "layers": [
            {
                "bandwidth": layer.bandwidth,
                "tau2": layer.tau2,
                "weight_power": layer.weight_power,
                "experts": [
                    [float(cx), float(cy), float(m), float(s2), bool(a)]
                    for (cx, cy), m, s2, a in zip(layer.centers, layer.mu, layer.sigma2, layer.active)
                ],
            }
            for layer in model.layers
        ],
        "loss_trace": [
            [r.scale, r.bandwidth, r.n_centers, r.train_loss, r.valid_loss, r.accepted]
            for r in model.loss_trace
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _require(doc: dict, key: str, kind) -> object:
    if key not in doc:
        raise ModelFormatError(f"model file missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelFormatError(f"model field {key!r} has unexpected type {type(value).__name__}")
    return value


def load_model(path) -> CfModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ModelFormatError("model file is not a JSON object")
    version = _require(doc, "format_version", int)
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    family = get_family(str(_require(doc, "family", str)))
    cfg_doc = _require(doc, "config", dict)
    try:
        config = FitConfig(**cfg_doc)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad config block: {exc}") from None
    layers = []
    for entry in _require(doc, "layers", list):
        experts = np.asarray(entry["experts"], dtype=float)
        if experts.ndim != 2 or experts.shape[1] != 5:
            raise ModelFormatError("layer experts must be rows of [x, y, mu, sigma2, active]")
        layers.append(
            ScaleLayer(
                bandwidth=float(entry["bandwidth"]),
                centers=experts[:, 0:2].copy(),
                mu=experts[:, 2].copy(),
                sigma2=experts[:, 3].copy(),
                active=experts[:, 4] != 0.0,
                tau2=float(entry["tau2"]),
                weight_power=int(entry.get("weight_power", 1)),
            )
        )
    trace = tuple(
        ScaleRecord(int(s), float(h), int(c), float(tl), float(vl), bool(a))
        for s, h, c, tl, vl, a in _require(doc, "loss_trace", list)
    )
    n_sites = int(_require(doc, "n_sites", int))
    split: HvSplit | None = None
    if n_sites >= 4:
        split = make_split(n_sites, config)
    return CfModel(
        beta=np.asarray(_require(doc, "beta", list), dtype=float),
        layers=tuple(layers),
        family=family,
        split=split,
        loss_trace=trace,
        config=config,
        initial_deviance=float(_require(doc, "initial_deviance", (int, float))),
        validation_deviance=float(_require(doc, "validation_deviance", (int, float))),
        n_sites=n_sites,
        n_covariates=int(_require(doc, "n_covariates", int)),
        train_fitted=None,
    )


# ---------------------------------------------------------------------------
# CSV formats

_COV_RE = re.compile(r"^cov_(\d+)$")


def _parse_header(header: list[str], path) -> tuple[bool, bool, list[int]]:
    cleaned = [h.strip() for h in header]
    base = ["x", "y"]
    if cleaned[: len(base)] != base:
        raise CsvFormatError(f"{path}: line 1: header must start with 'x,y', got {cleaned[:2]}")
    rest = cleaned[2:]
    has_response = bool(rest) and rest[0] == "response"
    if has_response:
        rest = rest[1:]
    has_offset = bool(rest) and rest[0] == "offset"
    if has_offset:
        rest = rest[1:]
    cov_cols = []
    for name in rest:
        m = _COV_RE.match(name)
        if not m:
            raise CsvFormatError(f"{path}: line 1: unexpected column {name!r}")
        cov_cols.append(int(m.group(1)))
    if cov_cols != list(range(1, len(cov_cols) + 1)):
        raise CsvFormatError(f"{path}: line 1: covariate columns must be cov_1..cov_K in order")
    return has_response, has_offset, cov_cols


def _read_table(path) -> tuple[bool, bool, int, np.ndarray]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CsvFormatError(f"{path}: file is empty") from None
            has_response, has_offset, cov_cols = _parse_header(header, path)
            n_fields = 2 + int(has_response) + int(has_offset) + len(cov_cols)
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != n_fields:
                    raise CsvFormatError(
                        f"{path}: line {lineno}: expected {n_fields} fields, got {len(row)}"
                    )
                try:
                    rows.append([float(cell) for cell in row])
                except ValueError:
                    raise CsvFormatError(f"{path}: line {lineno}: unparseable number") from None
    except OSError as exc:
        raise CsvFormatError(f"{path}: {exc.strerror or exc}") from None
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return has_response, has_offset, len(cov_cols), np.asarray(rows, dtype=float)


def read_dataset_csv(path, family_tag: str) -> Dataset:
    """Parse a dataset CSV; the response column is required."""
    has_response, has_offset, n_cov, table = _read_table(path)
    if not has_response:
        raise CsvFormatError(f"{path}: line 1: missing 'response' column")
    col = 2
    response = table[:, col]
    col += 1
    offset = table[:, col] if has_offset else None
    col += int(has_offset)
    covariates = table[:, col : col + n_cov]
    return Dataset(table[:, 0:2], response, covariates, family_tag, offset)


def read_sites_csv(path, n_covariates: int) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Parse a prediction-sites CSV; requires the model's covariate columns.

    A ``response`` column, if present, is ignored.
    """
    has_response, has_offset, n_cov, table = _read_table(path)
    if n_cov < n_covariates:
        raise ValidationError(
            f"{path}: missing covariate column: model expects cov_1..cov_{n_covariates}"
        )
    sites = table[:, 0:2]
    if not np.isfinite(sites).all():
        raise ValidationError("non-finite coordinate")
    col = 2 + int(has_response)
    offset = table[:, col] if has_offset else None
    col += int(has_offset)
    covariates = table[:, col : col + n_covariates]
    if not np.isfinite(covariates).all():
        raise ValidationError("non-finite covariate")
    if offset is not None and not np.isfinite(offset).all():
        raise ValidationError("non-finite offset")
    return sites, covariates, offset


def write_dataset_csv(path, dataset: Dataset) -> None:
    header = ["x", "y", "response"]
    has_offset = bool(np.any(dataset.offset != 0.0))
    if has_offset:
        header.append("offset")
    header += [f"cov_{k + 1}" for k in range(dataset.n_covariates)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n_sites):
            row = [dataset.sites[i, 0], dataset.sites[i, 1], dataset.response[i]]
            if has_offset:
                row.append(dataset.offset[i])
            row.extend(dataset.covariates[i])
            writer.writerow([_fmt(v) for v in row])


def write_rows_csv(path, header: list[str], rows) -> None:
    """Write rows of mixed values; floats get 12 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) and math.isfinite(v) else str(v) for v in row]
            )


def write_trace_csv(path, trace) -> None:
    write_rows_csv(
        path,
        ["scale", "bandwidth", "centers", "train_loss", "valid_loss", "accepted"],
        [
            [r.scale, float(r.bandwidth), r.n_centers, float(r.train_loss), float(r.valid_loss), r.accepted]
            for r in trace
        ],
    )
