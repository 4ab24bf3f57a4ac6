"""Planar geometry: bounding box, exponential kernel, and k-means center placement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import as_sites, round_half_away

_KMEANS_MAX_ITER = 100
_KMEANS_REL_TOL = 1e-6


@dataclass(frozen=True)
class CenterSet:
    """Local-model centers sharing one bandwidth."""

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "centers", as_sites(self.centers))
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")

    def __len__(self) -> int:
        return len(self.centers)


def bbox_diagonal(sites) -> float:
    """Diagonal length of the axis-aligned bounding box of the sites."""
    pts = as_sites(sites)
    if len(pts) == 0:
        raise ValueError("bbox_diagonal requires at least one site")
    span = pts.max(axis=0) - pts.min(axis=0)
    return float(np.hypot(span[0], span[1]))


def center_count(diagonal: float, bandwidth: float, density: float) -> int:
    """Number of local centers for one scale: ``round(density * (D/h)^2)``, at least 1."""
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    if diagonal < 0.0:
        raise ValueError("diagonal must be nonnegative")
    return max(1, round_half_away(density * diagonal * diagonal / (bandwidth * bandwidth)))


def kernel_weight(distance, bandwidth: float):
    """Exponential distance decay ``exp(-d/h)``; scalar in, scalar out."""
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    d = np.asarray(distance, dtype=float)
    if (d < 0).any():
        raise ValueError("distance must be nonnegative")
    w = np.exp(-d / bandwidth)
    return float(w) if np.isscalar(distance) else w


def pairwise_distances(a, b) -> np.ndarray:
    """Exact Euclidean distances between two point sets, shape (len(a), len(b)).

    Computed from coordinate differences (not the expanded-square identity) so
    that coincident points give exactly zero. Callers chunk for large products.
    """
    pa = as_sites(a)
    pb = as_sites(b)
    d = np.subtract.outer(pa[:, 0], pb[:, 0])
    d *= d
    dy = np.subtract.outer(pa[:, 1], pb[:, 1])
    dy *= dy
    d += dy
    np.sqrt(d, out=d)
    return d


def _assign_nearest(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per point via the expanded-square identity, chunked over
    centers so no n x c matrix is materialized. Assignment-grade accuracy."""
    n = len(points)
    p2 = (points * points).sum(1)
    best_d2 = np.full(n, np.inf)
    assign = np.zeros(n, dtype=np.intp)
    chunk = 256
    for start in range(0, len(centers), chunk):
        cen = centers[start : start + chunk]
        d2 = points @ cen.T
        d2 *= -2.0
        d2 += p2[:, None]
        d2 += (cen * cen).sum(1)[None, :]
        local = d2.argmin(axis=1)
        local_d2 = d2[np.arange(n), local]
        better = local_d2 < best_d2
        assign[better] = local[better] + start
        best_d2[better] = local_d2[better]
    np.maximum(best_d2, 0.0, out=best_d2)
    return assign, best_d2


def _weighted_pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


def _kmeans_pp(points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, 2))
    centers[0] = points[_weighted_pick(weights, rng)]
    d2 = ((points - centers[0]) ** 2).sum(1)
    for j in range(1, k):
        centers[j] = points[_weighted_pick(weights * d2, rng)]
        np.minimum(d2, ((points - centers[j]) ** 2).sum(1), out=d2)
    return centers


def _lloyd(points: np.ndarray, weights: np.ndarray, centers: np.ndarray) -> np.ndarray:
    k = len(centers)
    prev_sse = np.inf
    for _ in range(_KMEANS_MAX_ITER):
        assign, nearest = _assign_nearest(points, centers)
        sse = float(weights @ nearest)
        wsum = np.bincount(assign, weights=weights, minlength=k)
        for j in np.flatnonzero(wsum == 0):
            # Empty cluster: seize the point currently worst served.
            idx = int(np.argmax(weights * nearest))
            assign[idx] = j
            nearest[idx] = 0.0
            wsum = np.bincount(assign, weights=weights, minlength=k)
        cx = np.bincount(assign, weights=weights * points[:, 0], minlength=k)
        cy = np.bincount(assign, weights=weights * points[:, 1], minlength=k)
        centers = np.column_stack([cx, cy]) / wsum[:, None]
        if abs(prev_sse - sse) <= _KMEANS_REL_TOL * max(sse, 1e-300):
            break
        prev_sse = sse
    return centers


def place_centers(sites, n_centers: int, bandwidth: float, seed: int) -> CenterSet:
    """Place local centers by seeded k-means on the given sites.

    Duplicate coordinates are collapsed to weighted points, which makes the
    result invariant to input ordering (unique rows are lexicographically
    sorted). When ``n_centers`` reaches the number of distinct sites the
    distinct sites themselves are returned.
    """
    pts = as_sites(sites)
    if len(pts) == 0:
        raise ValueError("place_centers requires at least one site")
    if n_centers < 1:
        raise ValueError("n_centers must be at least 1")
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    if n_centers >= len(uniq):
        return CenterSet(uniq.copy(), bandwidth)
    rng = np.random.default_rng(seed)
    weights = counts.astype(float)
    centers = _kmeans_pp(uniq, weights, n_centers, rng)
    centers = _lloyd(uniq, weights, centers)
    return CenterSet(centers, bandwidth)
