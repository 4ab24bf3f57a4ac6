"""Core data containers, fit configuration, and the holdout train/validation split."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

FAMILY_TAGS = ("gaussian", "poisson", "bernoulli")

_SPLIT_STREAM = 0


class ValidationError(ValueError):
    """A dataset (or derived input) violates a structural or family invariant."""


def as_sites(sites) -> np.ndarray:
    """Coerce planar coordinates to a float (n, 2) array."""
    pts = np.asarray(sites, dtype=float)
    if pts.ndim == 1 and pts.shape == (2,):
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"sites must be an (n, 2) array, got shape {pts.shape}")
    return pts


def round_half_away(x: float) -> int:
    """Round half away from zero (``round(1.5) == 2``, ``round(-1.5) == -2``)."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class Dataset:
    """Immutable spatial regression dataset.

    ``covariates`` carries no intercept column; the intercept is implicit.
    ``offset`` is on the linear-predictor scale and defaults to all zeros.
    """

    sites: np.ndarray
    response: np.ndarray
    covariates: np.ndarray
    family_tag: str
    offset: np.ndarray = None

    def __post_init__(self):
        pts = as_sites(self.sites)
        y = np.asarray(self.response, dtype=float).ravel()
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.size == 0:
            x = x.reshape(len(y), 0)
        off = self.offset
        off = np.zeros(len(y)) if off is None else np.asarray(off, dtype=float).ravel()
        for name, value in (
            ("sites", pts),
            ("response", y),
            ("covariates", x),
            ("offset", off),
        ):
            object.__setattr__(self, name, value)

    @property
    def n_sites(self) -> int:
        return len(self.response)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Tuning knobs for the coarse-to-fine fit.

    Defaults follow the reference setup: 75/25 holdout split, bandwidth decay
    0.9 per scale, patience of 5 consecutive non-improving scales, and center
    density 1.5 (centers per squared bandwidth-normalized diagonal).
    ``initial_bandwidth=None`` starts at the training bounding-box diagonal.
    ``aggregation_weight_power`` controls the kernel power used when experts
    are combined (1 is the literal aggregation rule; 2 matches the power used
    inside the local fits and is exposed for sensitivity analysis).
    """

    train_fraction: float = 0.75
    bandwidth_decay: float = 0.9
    patience: int = 5
    center_density: float = 1.5
    initial_bandwidth: float | None = None
    rng_seed: int = 0
    max_scales: int = 200
    min_effective_weight: float = 1e-8
    irls_max_iter: int = 50
    irls_tol: float = 1e-8
    aggregation_weight_power: int = 1

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if not 0.0 < self.bandwidth_decay < 1.0:
            raise ValueError("bandwidth_decay must be in (0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be a positive integer")
        if self.center_density <= 0.0:
            raise ValueError("center_density must be positive")
        if self.initial_bandwidth is not None and self.initial_bandwidth <= 0.0:
            raise ValueError("initial_bandwidth must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")
        if self.max_scales < 1:
            raise ValueError("max_scales must be a positive integer")
        if self.min_effective_weight < 0.0:
            raise ValueError("min_effective_weight must be nonnegative")
        if self.irls_max_iter < 1:
            raise ValueError("irls_max_iter must be a positive integer")
        if self.irls_tol <= 0.0:
            raise ValueError("irls_tol must be positive")
        if self.aggregation_weight_power not in (1, 2):
            raise ValueError("aggregation_weight_power must be 1 or 2")


@dataclass(frozen=True)
class HvSplit:
    """Disjoint train/validation index sets covering 0..n-1."""

    train_idx: np.ndarray
    valid_idx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train_idx", np.asarray(self.train_idx, dtype=np.intp))
        object.__setattr__(self, "valid_idx", np.asarray(self.valid_idx, dtype=np.intp))

    @property
    def n_train(self) -> int:
        return len(self.train_idx)

    @property
    def n_valid(self) -> int:
        return len(self.valid_idx)


def make_split(n: int, cfg: FitConfig) -> HvSplit:
    """Draw the seeded uniform holdout split.

    The training size is ``round(train_fraction * n)`` with half rounded away
    from zero, clamped so both sides stay nonempty. Deterministic for a fixed
    ``cfg.rng_seed``.
    """
    if n < 4:
        raise ValidationError("dataset too small to split")
    n_train = round_half_away(cfg.train_fraction * n)
    n_train = min(max(n_train, 1), n - 1)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed, spawn_key=(_SPLIT_STREAM,)))
    perm = rng.permutation(n)
    return HvSplit(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def validate_dataset(d: Dataset) -> None:
    """Check every Dataset invariant once; downstream code assumes them."""
    n = d.n_sites
    if n < 1:
        raise ValidationError("dataset is empty")
    if len(d.sites) != n:
        raise ValidationError(f"length mismatch: {len(d.sites)} sites vs {n} responses")
    if len(d.covariates) != n:
        raise ValidationError(f"length mismatch: {len(d.covariates)} covariate rows vs {n} responses")
    if len(d.offset) != n:
        raise ValidationError(f"length mismatch: {len(d.offset)} offset values vs {n} responses")
    if not np.isfinite(d.sites).all():
        raise ValidationError("non-finite coordinate")
    if not np.isfinite(d.response).all():
        raise ValidationError("non-finite response")
    if not np.isfinite(d.covariates).all():
        raise ValidationError("non-finite covariate")
    if not np.isfinite(d.offset).all():
        raise ValidationError("non-finite offset")
    if d.family_tag not in FAMILY_TAGS:
        raise ValidationError(f"unknown family tag {d.family_tag!r}")
    if d.family_tag == "poisson":
        if (d.response < 0).any() or (d.response != np.floor(d.response)).any():
            raise ValidationError("poisson response must be nonnegative integers")
    elif d.family_tag == "bernoulli":
        if not np.isin(d.response, (0.0, 1.0)).all():
            raise ValidationError("response outside {0,1}")
