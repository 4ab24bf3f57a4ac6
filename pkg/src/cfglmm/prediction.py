"""Out-of-sample prediction, predictive uncertainty, and scale-band decomposition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import as_sites
from .experts import evaluate_layer
from .families import Family, add_intercept
from .learner import CfModel


@dataclass(frozen=True)
class Predictions:
    """Site-wise predictions: linear predictor, response mean, latent process, uncertainty."""

    mu_lin: np.ndarray
    mu: np.ndarray
    z_total: np.ndarray
    var_z: np.ndarray
    cov: np.ndarray

    def __len__(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class ScaleBandDecomposition:
    """Accepted layers grouped into bandwidth bands.

    ``band_values[i, b]`` is the summed layer mean of band ``b`` at site ``i``;
    bands partition the bandwidth axis into ``[edge_k, edge_{k-1})`` intervals
    (descending edges), so the rows sum to the total latent process.
    """

    band_edges: tuple[float, ...]
    band_values: np.ndarray
    band_sds: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.band_values.shape[1]


def coefficient_of_variation(var_z, mu, family: Family):
    """Predictive standard deviation over predictive mean, per link.

    Log link has the exact lognormal form ``sqrt(exp(var) - 1)``; identity is
    ``sd / |mu|``; logit uses the delta method, ``sqrt(var) * (1 - mu)``.
    """
    v = np.asarray(var_z, dtype=float)
    m = np.asarray(mu, dtype=float)
    if family.tag == "poisson":
        out = np.sqrt(np.expm1(v))
    elif family.tag == "bernoulli":
        out = np.sqrt(v) * (1.0 - m)
    else:
        if np.any(m == 0.0):
            raise ValueError("CoV undefined at zero mean")
        out = np.sqrt(v) / np.abs(m)
    return float(out) if out.ndim == 0 else out


def predict(model: CfModel, sites, covariates, offset=None) -> Predictions:
    """Predict at new sites: covariate effect plus every accepted layer.

    Layer variances are summed site-wise (layers are treated as independent);
    the uncertainty covers the latent process only, not the coefficients.
    """
    pts = as_sites(sites)
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.size == 0:
        x = x.reshape(len(pts), 0)
    if x.shape[1] != model.n_covariates:
        raise ValueError(
            f"covariate column mismatch: model expects {model.n_covariates}, got {x.shape[1]}"
        )
    if len(x) != len(pts):
        raise ValueError("covariates and sites must have equal length")
    off = np.zeros(len(pts)) if offset is None else np.asarray(offset, dtype=float).ravel()

    z_total = np.zeros(len(pts))
    var_z = np.zeros(len(pts))
    for layer in model.layers:
        ev = evaluate_layer(layer, pts)
        z_total += ev.mean
        var_z += ev.variance
    mu_lin = add_intercept(x) @ model.beta + off + z_total
    mu = model.family.clamp_mu(model.family.inv_link(mu_lin))
    cov = coefficient_of_variation(var_z, mu, model.family)
    return Predictions(mu_lin, mu, z_total, var_z, cov)


def band_index(bandwidth: float, band_edges) -> int:
    """Band of a bandwidth under descending edges; band b covers [edge_b, edge_{b-1})."""
    return int(sum(bandwidth < e for e in band_edges))


def decompose(model: CfModel, sites, band_edges) -> ScaleBandDecomposition:
    """Split the latent process into bandwidth bands at the query sites."""
    edges = tuple(float(e) for e in band_edges)
    if any(e <= 0 for e in edges):
        raise ValueError("band edges must be positive")
    if any(a <= b for a, b in zip(edges, edges[1:])):
        raise ValueError("band edges must be strictly descending")
    pts = as_sites(sites)
    n_bands = len(edges) + 1
    values = np.zeros((len(pts), n_bands))
    occupied = np.zeros(n_bands, dtype=bool)
    for layer in model.layers:
        b = band_index(layer.bandwidth, edges)
        values[:, b] += evaluate_layer(layer, pts).mean
        occupied[b] = True
    for b in np.flatnonzero(~occupied):
        warnings.warn(f"band {b} contains no accepted layer; its component is zero", stacklevel=2)
    return ScaleBandDecomposition(edges, values, values.std(axis=0))
