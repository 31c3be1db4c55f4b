"""Synthetic data generators, ground-truth labeling and CSV ingestion.

Two generators: a fixed nonlinear toy function of eight uniform
features (the eighth has no influence on the target), and a random
teacher network whose trailing first-layer weight columns are zeroed so
a known block of features is exactly insignificant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import network
from .network import NetworkArchitecture
from .validation import as_float_matrix, as_float_vector

TOY_DIM = 8

PROVENANCES = ("toy", "teacher", "csv")


@dataclass
class Dataset:
    """Feature matrix with named columns and a scalar regression target."""

    features: np.ndarray
    target: np.ndarray
    column_names: tuple[str, ...]
    provenance: str = "csv"
    target_name: str = "target"

    def __post_init__(self):
        self.features = as_float_matrix(self.features, "features")
        self.target = as_float_vector(self.target, "target")
        self.column_names = tuple(self.column_names)
        if self.features.shape[0] != self.target.shape[0]:
            raise ValueError(
                f"features/target row mismatch: {self.features.shape[0]} vs "
                f"{self.target.shape[0]}"
            )
        if self.features.shape[0] < 1:
            raise ValueError("dataset must have at least one row")
        if len(self.column_names) != self.features.shape[1]:
            raise ValueError(
                f"{len(self.column_names)} column names for "
                f"{self.features.shape[1]} features"
            )
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def toy_mean(X) -> np.ndarray:
    """Noiseless toy target: 8 + x0^2 + x1 x2 + cos(x3) + exp(x4 x5) + 0.1 x6."""
    X = as_float_matrix(X, "X")
    if X.shape[1] != TOY_DIM:
        raise ValueError(f"toy generator uses {TOY_DIM} features, got {X.shape[1]}")
    return (
        8.0
        + X[:, 0] ** 2
        + X[:, 1] * X[:, 2]
        + np.cos(X[:, 3])
        + np.exp(X[:, 4] * X[:, 5])
        + 0.1 * X[:, 6]
    )


def gen_toy(n: int, seed: int = 0) -> Dataset:
    """Toy dataset: X ~ U(-1,1)^8, unit Gaussian observation noise."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, TOY_DIM))
    y = toy_mean(X) + rng.standard_normal(n)
    names = tuple(f"x{j}" for j in range(TOY_DIM))
    return Dataset(features=X, target=y, column_names=names, provenance="toy")


@dataclass
class TeacherSpec:
    """Known data-generating network with a dead trailing feature block."""

    arch: NetworkArchitecture
    params: np.ndarray
    significant_count: int
    noise_sigma: float

    def __post_init__(self):
        self.params = network.check_parameters(self.arch, self.params)
        if not 0 <= self.significant_count <= self.arch.input_dim:
            raise ValueError(
                f"significant_count {self.significant_count} outside "
                f"[0, {self.arch.input_dim}]"
            )
        # dead feature rows of the first weight matrix must be exactly zero
        w_sl, _, (fan_in, fan_out) = self.arch.layer_slices()[0]
        W0 = self.params[w_sl].reshape(fan_in, fan_out)
        if np.any(W0[self.significant_count :] != 0.0):
            raise ValueError("dead feature weights are not exactly zero")


def gen_teacher(
    n: int,
    d: int,
    significant_count: int,
    hidden_widths=(20, 20, 20),
    noise_sigma: float = 0.1,
    seed: int = 0,
) -> tuple[Dataset, TeacherSpec]:
    """Random teacher network data with only the first features live.

    Weights start fan-in-scaled uniform; the first-layer rows of every
    feature past ``significant_count`` are zeroed, which forces those
    features' gradients to vanish identically.  The output is rescaled
    to unit std over the sample whenever its spread falls outside
    [0.5, 5] so the observation noise stays proportionate.
    """
    if significant_count > d:
        raise ValueError(
            f"significant_count {significant_count} exceeds feature count {d}"
        )
    if noise_sigma <= 0:
        raise ValueError(f"noise_sigma must be positive, got {noise_sigma}")
    rng = np.random.default_rng(seed)
    arch = NetworkArchitecture(input_dim=d, hidden_widths=tuple(hidden_widths))
    params = network.init_parameters(arch, rng)
    slices = arch.layer_slices()
    w_sl, _, (fan_in, fan_out) = slices[0]
    W0 = params[w_sl].reshape(fan_in, fan_out)
    W0[significant_count:] = 0.0

    X = rng.uniform(-1.0, 1.0, size=(n, d))
    clean = network.forward_batch(arch, params, X)
    spread = float(np.std(clean))
    if spread > 0.0 and not 0.5 <= spread <= 5.0:
        w_last, b_last, _ = slices[-1]
        params[w_last] /= spread
        params[b_last] /= spread
        clean = clean / spread
    y = clean + noise_sigma * rng.standard_normal(n)
    teacher = TeacherSpec(
        arch=arch,
        params=params,
        significant_count=significant_count,
        noise_sigma=noise_sigma,
    )
    names = tuple(f"x{j}" for j in range(d))
    data = Dataset(features=X, target=y, column_names=names, provenance="teacher")
    return data, teacher


@dataclass
class GroundTruthLabels:
    """Binary instance-wise significance labels from teacher gradients."""

    instance_labels: np.ndarray  # (n, d), 1 = significant
    eps: float

    def __post_init__(self):
        self.instance_labels = np.asarray(self.instance_labels, dtype=np.int8)
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


def label_instance_significance(teacher: TeacherSpec, X, eps: float) -> GroundTruthLabels:
    """Label cell (i, j) significant iff |d teacher(x_i) / d x_j| >= eps."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    X = as_float_matrix(X, "X")
    grads = network.input_gradient_batch(teacher.arch, teacher.params, X)
    return GroundTruthLabels(instance_labels=(np.abs(grads) >= eps), eps=eps)


def save_teacher(path, teacher: TeacherSpec) -> None:
    payload = {
        "architecture": {
            "input_dim": teacher.arch.input_dim,
            "hidden_widths": list(teacher.arch.hidden_widths),
            "activation": teacher.arch.activation,
        },
        "params": [float(v) for v in teacher.params],
        "significant_count": teacher.significant_count,
        "noise_sigma": teacher.noise_sigma,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_teacher(path) -> TeacherSpec:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    arch = NetworkArchitecture(
        input_dim=payload["architecture"]["input_dim"],
        hidden_widths=tuple(payload["architecture"]["hidden_widths"]),
        activation=payload["architecture"]["activation"],
    )
    return TeacherSpec(
        arch=arch,
        params=np.array(payload["params"]),
        significant_count=payload["significant_count"],
        noise_sigma=payload["noise_sigma"],
    )


def ingest_csv(path, target_column: str) -> Dataset:
    """Read a numeric CSV with a header row into a Dataset.

    Any row with a non-numeric cell aborts the load; the error names
    every offending row (1-based, excluding the header).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ValueError(
                f"{path}: target column {target_column!r} not in header {header}"
            )
        target_idx = header.index(target_column)
        rows = []
        bad_rows = []
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                bad_rows.append(line_no)
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad_rows.append(line_no)
    if bad_rows:
        raise ValueError(
            f"{path}: non-numeric or malformed rows at data line(s) "
            f"{', '.join(map(str, bad_rows))}"
        )
    if not rows:
        raise ValueError(f"{path}: no data rows below the header")
    table = np.array(rows, dtype=np.float64)
    feature_idx = [k for k in range(len(header)) if k != target_idx]
    names = tuple(header[k] for k in feature_idx)
    return Dataset(
        features=table[:, feature_idx],
        target=table[:, target_idx],
        column_names=names,
        provenance="csv",
        target_name=header[target_idx],
    )


def export_csv(dataset: Dataset, path) -> None:
    """Write the dataset with repr-exact floats so a round trip is exact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.column_names) + [dataset.target_name])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.features[i]]
                + [repr(float(dataset.target[i]))]
            )
