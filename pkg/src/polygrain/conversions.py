"""Maps between linear coefficients and the geometric diagram parameters.

A power diagram with seed y and weight w is the degree-1 diagram with cost
|x-y|^2 - w; expanding gives the coefficients (per grain, by multi-index)

    x^(0,0): |y|^2 - w,   x^(1,0): -2 y_1,   x^(0,1): -2 y_2.

An anisotropic power diagram with symmetric matrix A is the degree-2 diagram
with cost (x-y).A(x-y) - w, giving additionally

    x^(2,0): A_11,   x^(1,1): 2 A_12,   x^(0,2): A_22.

Both maps invert in closed form. The inverse is not canonical: adding a
common vector to every coefficient column leaves the diagram unchanged but
moves the recovered (y, w, A).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import (
    DesignBasis,
    GAUGE_FREE,
    LEGENDRE,
    MONOMIAL,
    ParamMatrix,
    basis_change,
    basis_change_inverse,
)
from .geometry import PhysicalAPD, PhysicalPD, sym2x2_eigvals


def _positions_d1(index_set):
    return index_set.position((0, 0)), index_set.position((1, 0)), index_set.position((0, 1))


def _positions_d2(index_set):
    return (index_set.position((2, 0)), index_set.position((1, 1)),
            index_set.position((0, 2)))


def _require_monomial(theta: ParamMatrix, degree: int, op: str) -> None:
    if theta.basis.kind != MONOMIAL:
        raise ValueError(f"{op} expects monomial coefficients; use coeffs_to_basis first")
    if theta.degree != degree:
        raise ValueError(f"{op} expects degree {degree}, got {theta.degree}")


def pd_to_theta(pd: PhysicalPD) -> ParamMatrix:
    """Degree-1 monomial coefficients of a power diagram, one column per grain."""
    basis = DesignBasis.make(MONOMIAL, 1)
    p00, p10, p01 = _positions_d1(basis.index_set)
    theta = np.empty((3, pd.n_grains))
    y1, y2 = pd.seeds[:, 0], pd.seeds[:, 1]
    theta[p10] = -2.0 * y1
    theta[p01] = -2.0 * y2
    theta[p00] = y1 * y1 + y2 * y2 - pd.weights
    return ParamMatrix(values=theta, basis=basis, gauge=GAUGE_FREE)


def theta_to_pd(theta: ParamMatrix) -> PhysicalPD:
    """Seeds and weights of the power diagram encoded by degree-1 coefficients."""
    _require_monomial(theta, 1, "theta_to_pd")
    p00, p10, p01 = _positions_d1(theta.basis.index_set)
    t1, t2, t0 = theta.values[p10], theta.values[p01], theta.values[p00]
    seeds = np.column_stack([-0.5 * t1, -0.5 * t2])
    weights = 0.25 * t1 * t1 + 0.25 * t2 * t2 - t0
    return PhysicalPD(seeds=seeds, weights=weights)


def apd_to_theta(apd: PhysicalAPD) -> ParamMatrix:
    """Degree-2 monomial coefficients of an anisotropic power diagram."""
    basis = DesignBasis.make(MONOMIAL, 2)
    idx = basis.index_set
    p00, p10, p01 = _positions_d1(idx)
    p20, p11, p02 = _positions_d2(idx)
    a11 = apd.anisotropy[:, 0, 0]
    a12 = 0.5 * (apd.anisotropy[:, 0, 1] + apd.anisotropy[:, 1, 0])
    a22 = apd.anisotropy[:, 1, 1]
    y1, y2 = apd.seeds[:, 0], apd.seeds[:, 1]
    theta = np.empty((6, apd.n_grains))
    theta[p20] = a11
    theta[p11] = 2.0 * a12
    theta[p02] = a22
    theta[p10] = -2.0 * (a11 * y1 + a12 * y2)
    theta[p01] = -2.0 * (a12 * y1 + a22 * y2)
    theta[p00] = y1 * (a11 * y1 + a12 * y2) + y2 * (a12 * y1 + a22 * y2) - apd.weights
    return ParamMatrix(values=theta, basis=basis, gauge=GAUGE_FREE)


@dataclass(frozen=True)
class APDRecovery:
    """Per-grain geometric parameters recovered from degree-2 coefficients.

    Grains whose quadratic block A is singular carry A only; their seed and
    weight entries are NaN and ``recoverable`` is False there.
    """

    anisotropy: np.ndarray
    seeds: np.ndarray
    weights: np.ndarray
    recoverable: np.ndarray

    @property
    def n_grains(self) -> int:
        return self.anisotropy.shape[0]

    def to_apd(self) -> PhysicalAPD:
        if not bool(self.recoverable.all()):
            bad = (np.nonzero(~self.recoverable)[0] + 1).tolist()
            raise ValueError(f"grains with singular anisotropy cannot be recovered: {bad}")
        return PhysicalAPD(seeds=self.seeds, weights=self.weights, anisotropy=self.anisotropy)


def theta_to_apd(theta: ParamMatrix) -> APDRecovery:
    """Anisotropy, seeds and weights encoded by degree-2 coefficients.

    A is read off the quadratic coefficients unconditionally; y and w need
    A to be invertible and are marked unrecoverable otherwise.
    """
    _require_monomial(theta, 2, "theta_to_apd")
    idx = theta.basis.index_set
    p00, p10, p01 = _positions_d1(idx)
    p20, p11, p02 = _positions_d2(idx)
    vals = theta.values
    n = theta.n_grains
    a11, a12, a22 = vals[p20], 0.5 * vals[p11], vals[p02]
    mats = np.empty((n, 2, 2))
    mats[:, 0, 0] = a11
    mats[:, 0, 1] = a12
    mats[:, 1, 0] = a12
    mats[:, 1, 1] = a22

    det = a11 * a22 - a12 * a12
    seeds = np.full((n, 2), np.nan)
    weights = np.full(n, np.nan)
    recoverable = det != 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        b1, b2 = vals[p10], vals[p01]
        # y = -A^{-1} b / 2 with the 2x2 adjugate inverse.
        y1 = -0.5 * (a22 * b1 - a12 * b2) / det
        y2 = -0.5 * (-a12 * b1 + a11 * b2) / det
        w = 0.25 * (b1 * (a22 * b1 - a12 * b2) + b2 * (-a12 * b1 + a11 * b2)) / det - vals[p00]
    finite = np.isfinite(y1) & np.isfinite(y2) & np.isfinite(w)
    recoverable &= finite
    seeds[recoverable, 0] = y1[recoverable]
    seeds[recoverable, 1] = y2[recoverable]
    weights[recoverable] = w[recoverable]
    return APDRecovery(anisotropy=mats, seeds=seeds, weights=weights,
                       recoverable=recoverable)


def coeffs_to_basis(theta: ParamMatrix, target_kind: str) -> ParamMatrix:
    """Re-express coefficients in the other polynomial basis; cost values preserved."""
    if target_kind not in (MONOMIAL, LEGENDRE):
        raise ValueError(f"unknown basis kind {target_kind!r}")
    if theta.basis.kind == target_kind:
        return theta
    t = basis_change(theta.degree) if target_kind == LEGENDRE else basis_change_inverse(theta.degree)
    return ParamMatrix(values=t @ theta.values,
                       basis=DesignBasis.make(target_kind, theta.degree),
                       gauge=theta.gauge)


def anisotropy_from_theta(theta: ParamMatrix) -> np.ndarray:
    """Symmetric quadratic blocks of degree-2 monomial coefficients, shape (N, 2, 2)."""
    return theta_to_apd(theta).anisotropy


def psd_repair(theta: ParamMatrix, margin: float | None = None,
               no_op_if_pd: bool = False) -> ParamMatrix:
    """Shift all quadratic blocks by the same multiple of the identity.

    Adds lam = max(0, -min_i lambda_min(A_i)) + margin to the x1^2 and x2^2
    coefficient of every grain, which replaces each A_i by A_i + lam*I while
    leaving the induced diagram unchanged (common shifts cancel in cost
    differences). Afterwards every A_i has smallest eigenvalue >= margin.

    The shift is applied unconditionally for determinism; ``no_op_if_pd``
    skips it when the eigenvalue floor already holds. The returned matrix is
    in the free gauge (the common shift breaks a zero final column) and in
    the same basis kind as the input.
    """
    original_kind = theta.basis.kind
    work = coeffs_to_basis(theta, MONOMIAL)
    if work.degree != 2:
        raise ValueError(f"psd_repair expects degree 2, got {work.degree}")
    mats = anisotropy_from_theta(work)
    lam_min = float(sym2x2_eigvals(mats)[:, 0].min())
    if margin is None:
        margin = 1e-3 * (1.0 + float(np.abs(sym2x2_eigvals(mats)).max()))
    if margin <= 0:
        raise ValueError("margin must be positive")
    if no_op_if_pd and lam_min >= margin:
        return theta
    lam = max(0.0, -lam_min) + margin
    idx = work.basis.index_set
    vals = work.values.copy()
    vals[idx.position((2, 0))] += lam
    vals[idx.position((0, 2))] += lam
    repaired = ParamMatrix(values=vals, basis=work.basis, gauge=GAUGE_FREE)
    return coeffs_to_basis(repaired, original_kind)
