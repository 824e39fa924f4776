"""Moment-based initial parameter guess from grain centroids and spreads.

Each grain contributes its pixel count, centroid and central second-moment
matrix. For a degree-1 (power diagram) start the seeds are the centroids and
the weights are area ratios; for degree >= 2 the anisotropy guess is the
inverse second-moment matrix, which elongates cells along the observed grain
axes. Higher-degree coefficients are zero-padded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import LEGENDRE, GAUGE_LAST_ZERO, ParamMatrix, zero_pad
from .conversions import apd_to_theta, coeffs_to_basis, pd_to_theta
from .geometry import GrainMap, PhysicalAPD, PhysicalPD, sym2x2_eigvals

# A second-moment matrix counts as degenerate below this smallest eigenvalue
# and is ridge-regularised before inversion; tiny grains must not crash a fit.
DEGENERATE_EIG = 1e-10
RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class MomentSummary:
    """Per-grain pixel counts, centroids and central second moments.

    ``empty`` flags grains with no pixels (centroid parked at the domain
    centre); ``degenerate`` flags singular or near-singular second-moment
    matrices (single pixels, collinear grains).
    """

    counts: np.ndarray
    centroids: np.ndarray
    second_moments: np.ndarray
    empty: np.ndarray
    degenerate: np.ndarray

    @property
    def n_grains(self) -> int:
        return self.counts.shape[0]


def moments(grain_map: GrainMap) -> MomentSummary:
    """Pixel counts, centroids and central second-moment matrices per grain."""
    n = grain_map.n_grains
    lab0 = grain_map.labels - 1
    x1 = grain_map.grid.points[:, 0]
    x2 = grain_map.grid.points[:, 1]
    counts = np.bincount(lab0, minlength=n)
    empty = counts == 0
    safe = np.where(empty, 1, counts).astype(np.float64)

    s1 = np.bincount(lab0, weights=x1, minlength=n)
    s2 = np.bincount(lab0, weights=x2, minlength=n)
    centroids = np.column_stack([s1 / safe, s2 / safe])
    centroids[empty] = 0.0

    q11 = np.bincount(lab0, weights=x1 * x1, minlength=n) / safe
    q12 = np.bincount(lab0, weights=x1 * x2, minlength=n) / safe
    q22 = np.bincount(lab0, weights=x2 * x2, minlength=n) / safe
    b = np.empty((n, 2, 2))
    b[:, 0, 0] = q11 - centroids[:, 0] ** 2
    b[:, 0, 1] = q12 - centroids[:, 0] * centroids[:, 1]
    b[:, 1, 0] = b[:, 0, 1]
    b[:, 1, 1] = q22 - centroids[:, 1] ** 2
    b[empty] = 0.0

    degenerate = (sym2x2_eigvals(b)[:, 0] < DEGENERATE_EIG) | empty
    return MomentSummary(counts=counts, centroids=centroids, second_moments=b,
                         empty=empty, degenerate=degenerate)


def _invert_spread(summary: MomentSummary) -> np.ndarray:
    """Anisotropy guesses (B_i)^{-1}, ridge-regularising degenerate spreads."""
    b = summary.second_moments.copy()
    b[summary.empty] = np.eye(2)
    for i in np.nonzero(summary.degenerate & ~summary.empty)[0]:
        tr = b[i, 0, 0] + b[i, 1, 1]
        ridge = RIDGE_SCALE * (tr / 2.0 if tr > 0 else 1.0)
        b[i, 0, 0] += ridge
        b[i, 1, 1] += ridge
    det = b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]
    inv = np.empty_like(b)
    inv[:, 0, 0] = b[:, 1, 1] / det
    inv[:, 0, 1] = -b[:, 0, 1] / det
    inv[:, 1, 0] = -b[:, 1, 0] / det
    inv[:, 1, 1] = b[:, 0, 0] / det
    inv[summary.empty] = np.eye(2)
    return inv


def heuristic_theta(grain_map: GrainMap, degree: int, kind: str = LEGENDRE) -> ParamMatrix:
    """Moment-based initial coefficients for a degree-d fit, gauge-fixed.

    degree 1 uses the power-diagram guess (identity anisotropy); degree >= 2
    uses the inverse-second-moment anisotropy. The weight guess is
    sqrt(det A_i) |G_i| / (n pi), the grain area relative to its moment
    ellipse. Empty grains get identity anisotropy, centroid (0,0) and weight
    zero. The result is re-gauged so that the final column is exactly zero,
    which leaves the induced diagram unchanged.
    """
    if degree < 1:
        raise ValueError("heuristic initialisation needs degree >= 1")
    summary = moments(grain_map)
    n_pixels = len(grain_map)
    area_ratio = summary.counts / (n_pixels * np.pi)
    area_ratio = np.where(summary.empty, 0.0, area_ratio)

    if degree == 1:
        pd = PhysicalPD(seeds=summary.centroids, weights=area_ratio)
        theta = pd_to_theta(pd)
    else:
        mats = _invert_spread(summary)
        det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
        weights = np.where(summary.empty, 0.0, np.sqrt(np.maximum(det, 0.0)) * area_ratio)
        apd = PhysicalAPD(seeds=summary.centroids, weights=weights, anisotropy=mats)
        theta = apd_to_theta(apd)

    theta = zero_pad(theta, degree)
    theta = coeffs_to_basis(theta, kind)
    values = theta.values - theta.values[:, -1][:, None]
    return ParamMatrix(values=values, basis=theta.basis, gauge=GAUGE_LAST_ZERO)
