"""Stagewise coarse-to-fine fitting with holdout-validated layer acceptance.

The fit starts from a plain GLM, then repeatedly proposes one scale layer at a
time on a geometrically shrinking bandwidth. Each proposal is fit to the
current working residuals on the training rows, the coefficients are refit
with the proposed layer folded into the offset, and the candidate is kept only
if it strictly lowers the validation deviance. Rejected proposals roll back
completely; after ``patience`` consecutive rejections the search stops. The
accepted layers form an additive multiscale process whose per-scale variances
sum site-wise into the predictive variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset, FitConfig, HvSplit, ValidationError, make_split, validate_dataset
from .experts import LayerUnfittableError, ScaleLayer, evaluate_layer, fit_layer
from .families import (
    Family,
    add_intercept,
    deviance,
    fit_glm,
    get_family,
    wls_beta,
    working_state,
)
from .geometry import CenterSet, bbox_diagonal, center_count, pairwise_distances, place_centers

_KMEANS_STREAM = 1

MIN_FIT_SITES = 20


@dataclass(frozen=True)
class ScaleRecord:
    """One attempted scale: geometry, losses, and the accept/reject outcome."""

    scale: int
    bandwidth: float
    n_centers: int
    train_loss: float
    valid_loss: float
    accepted: bool


@dataclass(frozen=True)
class TrainCache:
    """Cumulative latent mean and variance at every site seen during fitting."""

    z: np.ndarray
    var: np.ndarray


@dataclass(frozen=True)
class CfModel:
    """Fitted coarse-to-fine model: coefficients plus ordered accepted layers."""

    beta: np.ndarray
    layers: tuple[ScaleLayer, ...]
    family: Family
    split: HvSplit | None
    loss_trace: tuple[ScaleRecord, ...]
    config: FitConfig
    initial_deviance: float
    validation_deviance: float
    n_sites: int
    n_covariates: int
    train_fitted: TrainCache | None = None


def layer_seed(base_seed: int, scale: int) -> int:
    """Deterministic per-scale seed for center placement."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(_KMEANS_STREAM, scale))
    return int(ss.generate_state(1)[0])


def accepted_scale_count(model: CfModel) -> int:
    """Number of layers that survived validation."""
    return len(model.layers)


def fit_cf(
    d: Dataset,
    cfg: FitConfig = FitConfig(),
    progress: Callable[[ScaleRecord], None] | None = None,
) -> CfModel:
    """Fit the coarse-to-fine spatial model.

    Per scale:

    1. recompute the working response and weights at the current fit,
    2. fit one layer of local experts to the training-row working residuals,
       then refit the coefficients with the layer folded into the offset,
    3. accept the scale only if the validation deviance strictly drops;
       otherwise discard it and count toward patience,
    4. shrink the bandwidth by ``cfg.bandwidth_decay`` and repeat.

    ``progress``, when given, receives one :class:`ScaleRecord` per attempted
    scale. The fit is deterministic for a fixed ``cfg.rng_seed``.
    """
    validate_dataset(d)
    n = d.n_sites
    if n < MIN_FIT_SITES:
        raise ValidationError(f"dataset too small for coarse-to-fine fitting (need {MIN_FIT_SITES} sites)")
    family = get_family(d.family_tag)
    split = make_split(n, cfg)
    tr = split.train_idx
    va = split.valid_idx

    design = add_intercept(d.covariates)
    y = d.response
    train_pts = d.sites[tr]
    diagonal = bbox_diagonal(train_pts)
    bandwidth = cfg.initial_bandwidth if cfg.initial_bandwidth is not None else diagonal
    if bandwidth <= 0.0:
        raise ValidationError("degenerate geometry: initial bandwidth is zero")

    glm = fit_glm(d, cfg, subset=tr)
    beta = glm.beta
    cum_offset = d.offset.copy()

    def valid_dev(b: np.ndarray, extra: np.ndarray | float = 0.0) -> tuple[float, float]:
        mu_lin = design @ b + cum_offset + extra
        mu = family.clamp_mu(family.inv_link(mu_lin))
        return (
            deviance(family, y, mu, subset=va),
            deviance(family, y, mu, subset=tr),
        )

    best_loss, _ = valid_dev(beta)
    initial_dev = best_loss

    layers: list[ScaleLayer] = []
    trace: list[ScaleRecord] = []
    z_cache = np.zeros(n)
    var_cache = np.zeros(n)
    # Once the center budget reaches the distinct training sites, every finer
    # scale shares the same centers; their distance matrices are computed once.
    uniq_train = np.unique(train_pts, axis=0)
    fit_dists = eval_dists = None
    rejections = 0
    scale = 1
    while scale <= cfg.max_scales:
        xb = design @ beta
        ws = working_state(family, y, xb + cum_offset)
        resid = ws.eta_hat - xb - cum_offset
        n_centers = min(center_count(diagonal, bandwidth, cfg.center_density), len(tr))
        capped = n_centers >= len(uniq_train)
        if capped and fit_dists is None:
            fit_dists = pairwise_distances(uniq_train, train_pts)
            eval_dists = pairwise_distances(d.sites, uniq_train)
        record = None
        try:
            if capped:
                centers = CenterSet(uniq_train.copy(), bandwidth)
                layer = fit_layer(resid[tr], ws.weights[tr], train_pts, centers, cfg, distances=fit_dists)
            else:
                centers = place_centers(train_pts, n_centers, bandwidth, layer_seed(cfg.rng_seed, scale))
                layer = fit_layer(resid[tr], ws.weights[tr], train_pts, centers, cfg)
        except LayerUnfittableError:
            record = ScaleRecord(scale, bandwidth, n_centers, math.nan, math.nan, False)
            rejections += 1
        if record is None:
            ev = evaluate_layer(layer, d.sites, distances=eval_dists if capped else None)
            beta_new = wls_beta(design, ws.eta_hat - cum_offset - ev.mean, ws.weights, subset=tr)
            cand_loss, cand_train = valid_dev(beta_new, ev.mean)
            accepted = bool(np.isfinite(cand_loss) and cand_loss < best_loss)
            record = ScaleRecord(scale, bandwidth, len(centers), cand_train, cand_loss, accepted)
            if accepted:
                layers.append(layer)
                beta = beta_new
                cum_offset = cum_offset + ev.mean
                z_cache += ev.mean
                var_cache += ev.variance
                best_loss = cand_loss
                rejections = 0
            else:
                rejections += 1
        trace.append(record)
        if progress is not None:
            progress(record)
        if rejections >= cfg.patience:
            break
        bandwidth *= cfg.bandwidth_decay
        scale += 1

    return CfModel(
        beta=beta,
        layers=tuple(layers),
        family=family,
        split=split,
        loss_trace=tuple(trace),
        config=cfg,
        initial_deviance=initial_dev,
        validation_deviance=best_loss,
        n_sites=n,
        n_covariates=d.n_covariates,
        train_fitted=TrainCache(z_cache, var_cache),
    )
