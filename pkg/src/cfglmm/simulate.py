"""Synthetic spatial data: smoothed-noise fields, covariates, count and binary responses.

A field is built by drawing iid Gaussian noise at anchor sites and smoothing
it with a row-normalized exponential kernel; it can then be evaluated at any
location, so train and test samples share one latent surface. The default
bandwidth is the average distance to the 10 nearest neighbors, which shrinks
as site density grows and therefore yields finer-scale patterns at larger n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .data import Dataset, as_sites

MU_CAP = 1e8  # Poisson sampling overflow guard

_DEFAULT_BETA = {"poisson": (2.0, -0.5), "bernoulli": (1.0, -0.5)}

# Substream labels for seed derivation; train and test never share a stream.
_S_TRAIN_SITES = 0
_S_FIELD = 1
_S_COV_FIELD = 2
_S_COV_NOISE_TRAIN = 3
_S_Y_TRAIN = 4
_S_TEST_SITES = 5
_S_COV_NOISE_TEST = 6
_S_Y_TEST = 7

_CHUNK_DOUBLES = 8_000_000


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _smooth(query: np.ndarray, anchors: np.ndarray, bandwidth: float, noise: np.ndarray) -> np.ndarray:
    """Row-normalized kernel smooth of anchor noise, evaluated at query sites.

    ``noise`` may hold several columns; they share one kernel matrix. Distances
    use the expanded-square identity (exact for coincident points, ~1e-8
    relative otherwise, irrelevant for a noise field) so the inner loop is a
    pair of matrix products.
    """
    cols = noise if noise.ndim == 2 else noise[:, None]
    out = np.empty((len(query), cols.shape[1]))
    a2 = (anchors * anchors).sum(axis=1)
    chunk = max(1, _CHUNK_DOUBLES // max(len(anchors), 1))
    for start in range(0, len(query), chunk):
        sl = slice(start, min(start + chunk, len(query)))
        q = query[sl]
        w = (q * q).sum(axis=1)[:, None] + a2[None, :] - 2.0 * (q @ anchors.T)
        np.maximum(w, 0.0, out=w)
        np.sqrt(w, out=w)
        w *= -1.0 / bandwidth
        np.exp(w, out=w)
        out[sl] = (w @ cols) / w.sum(axis=1)[:, None]
    return out if noise.ndim == 2 else out[:, 0]


@dataclass(frozen=True)
class FieldSpec:
    """Recipe for one smoothed-noise field."""

    n: int
    noise_sd: float = 1.0
    seed: int = 0
    bandwidth: float | None = None  # None: average 10-NN distance rule
    knn_k: int = 10

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("fixed bandwidth must be positive")


@dataclass(frozen=True)
class KernelField:
    """Noise anchored at fixed sites, evaluable anywhere via kernel smoothing."""

    anchors: np.ndarray
    noise: np.ndarray
    bandwidth: float

    def at(self, sites) -> np.ndarray:
        return _smooth(as_sites(sites), self.anchors, self.bandwidth, self.noise)


def knn_bandwidth(sites, k: int = 10) -> float:
    """Average (over sites) of the mean distance to the k nearest neighbors."""
    pts = as_sites(sites)
    n = len(pts)
    if n < 2:
        return 1.0
    k_eff = min(k, n - 1)
    dist, _ = cKDTree(pts).query(pts, k=k_eff + 1)
    return float(dist[:, 1:].mean())


def make_field(sites, spec: FieldSpec) -> KernelField:
    pts = as_sites(sites)
    noise = _rng(spec.seed).normal(0.0, spec.noise_sd, len(pts))
    h = spec.bandwidth if spec.bandwidth is not None else knn_bandwidth(pts, spec.knn_k)
    return KernelField(pts, noise, h)


def smoothed_field(sites, spec: FieldSpec) -> np.ndarray:
    """Smoothed-noise field values at its own anchor sites."""
    return make_field(sites, spec).at(sites)


def gen_covariates(sites, seed: int) -> np.ndarray:
    """Two covariate columns, each half smoothed field and half iid noise."""
    pts = as_sites(sites)
    n = len(pts)
    h = knn_bandwidth(pts)
    u = np.column_stack([_rng(seed, _S_COV_FIELD, k).normal(0.0, 1.0, n) for k in range(2)])
    z = _smooth(pts, pts, h, u)
    e = np.column_stack([_rng(seed, _S_COV_NOISE_TRAIN, k).normal(0.0, 1.0, n) for k in range(2)])
    return 0.5 * z + 0.5 * e


MULTISCALE_DOMAIN_SIDE = 10.0


@dataclass(frozen=True)
class SimScenario:
    """One Monte Carlo scenario: family, coefficients, sizes, latent-field shape.

    Single-scale scenarios live on the unit square. Multiscale scenarios keep
    their literal component bandwidths (e.g. 3.0/0.8/0.3) and therefore need a
    domain large enough to contain the coarsest one; they default to a 10 x 10
    square, on which the bounding-box diagonal exceeds every component scale.
    """

    family: str = "poisson"
    beta0: float = 0.5
    beta: tuple[float, float] | None = None
    n_train: int = 2000
    n_test: int = 2000
    multiscale: tuple[float, ...] | None = None
    field_noise_sd: float = 2.0
    domain_side: float | None = None

    def coefficients(self) -> np.ndarray:
        slope = self.beta if self.beta is not None else _DEFAULT_BETA[self.family]
        return np.array([self.beta0, *slope], dtype=float)

    @property
    def side(self) -> float:
        if self.domain_side is not None:
            return self.domain_side
        return MULTISCALE_DOMAIN_SIDE if self.multiscale is not None else 1.0


@dataclass(frozen=True)
class SimTruth:
    """Latent truth retained for scoring."""

    mu: np.ndarray
    z: np.ndarray
    components: np.ndarray | None = None


@dataclass(frozen=True)
class SimData:
    train: Dataset
    test: Dataset | None
    truth_train: SimTruth
    truth_test: SimTruth | None


def _sample_response(family: str, mu: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if family == "poisson":
        return rng.poisson(mu).astype(float)
    return rng.binomial(1, mu).astype(float)


def _generate(scenario: SimScenario, seed: int) -> SimData:
    if scenario.family not in _DEFAULT_BETA:
        raise ValueError(f"unsupported simulation family {scenario.family!r}")
    coef = scenario.coefficients()
    n = scenario.n_train
    train_pts = _rng(seed, _S_TRAIN_SITES).random((n, 2)) * scenario.side
    knn_h = knn_bandwidth(train_pts)

    # Noise columns grouped by bandwidth so each group shares one kernel pass.
    # Covariate fields always use the knn bandwidth; the latent field either
    # does too (single-scale) or splits into fixed-bandwidth components.
    cov_u = np.column_stack([_rng(seed, _S_COV_FIELD, k).normal(0.0, 1.0, n) for k in range(2)])
    if scenario.multiscale is None:
        field_u = _rng(seed, _S_FIELD, 0).normal(0.0, scenario.field_noise_sd, n)[:, None]
        groups = [(knn_h, np.column_stack([cov_u, field_u]))]
    else:
        comp_u = np.column_stack(
            [_rng(seed, _S_FIELD, m).normal(0.0, 1.0, n) for m in range(len(scenario.multiscale))]
        )
        groups = [(knn_h, cov_u)]
        groups += [(float(h), comp_u[:, [m]]) for m, h in enumerate(scenario.multiscale)]

    def smooth_all(pts):
        return np.column_stack([_smooth(pts, train_pts, h, u) for h, u in groups])

    train_smoothed = smooth_all(train_pts)
    # Row-normalized smoothing collapses the variance of coarse components to
    # near nothing; standardize each multiscale component over the training
    # realization so every scale carries a recoverable, comparable amplitude.
    # Smoothing is linear, so this is one scale factor per component field.
    comp_scale = np.ones(train_smoothed.shape[1] - 2)
    if scenario.multiscale is not None:
        sds = train_smoothed[:, 2:].std(axis=0)
        comp_scale = 1.0 / np.where(sds > 0, sds, 1.0)

    def build(pts, smoothed, cov_noise_stream, y_stream):
        zcov = smoothed[:, 0:2]
        parts = smoothed[:, 2:] * comp_scale[None, :]
        e = np.column_stack(
            [_rng(seed, cov_noise_stream, k).normal(0.0, 1.0, len(pts)) for k in range(2)]
        )
        x = 0.5 * zcov + 0.5 * e
        z = parts.sum(axis=1)
        eta = coef[0] + x @ coef[1:] + z
        if scenario.family == "poisson":
            mu = np.minimum(np.exp(eta), MU_CAP)
        else:
            mu = 1.0 / (1.0 + np.exp(-eta))
        y = _sample_response(scenario.family, mu, _rng(seed, y_stream))
        dataset = Dataset(pts, y, x, scenario.family)
        comps = parts if scenario.multiscale is not None else None
        return dataset, SimTruth(mu, z, comps)

    train, truth_train = build(train_pts, train_smoothed, _S_COV_NOISE_TRAIN, _S_Y_TRAIN)
    test, truth_test = None, None
    if scenario.n_test > 0:
        test_pts = _rng(seed, _S_TEST_SITES).random((scenario.n_test, 2)) * scenario.side
        test, truth_test = build(test_pts, smooth_all(test_pts), _S_COV_NOISE_TEST, _S_Y_TEST)
    return SimData(train, test, truth_train, truth_test)


def gen_poisson(scenario: SimScenario, seed: int) -> SimData:
    """Count data on the unit square with a latent smoothed-noise process."""
    if scenario.family != "poisson":
        raise ValueError("scenario family must be poisson")
    return _generate(scenario, seed)


def gen_binomial(scenario: SimScenario, seed: int) -> SimData:
    """Binary analogue of :func:`gen_poisson` with a logistic link."""
    if scenario.family != "bernoulli":
        raise ValueError("scenario family must be bernoulli")
    return _generate(scenario, seed)
