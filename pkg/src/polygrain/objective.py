"""Smoothed assignment, log-likelihood objective, and its derivatives.

Per pixel x and grain i the cost is h_i(x) = theta_i . eta(x). The smoothed
(softmax) membership at temperature eps is

    p_i(x) = exp(-h_i(x)/eps) / sum_j exp(-h_j(x)/eps)

and the fitting objective is the mean log-probability of the true labels,

    Phi(theta) = (1/n) sum_x [ -h_{g(x)}(x)/eps - log sum_j exp(-h_j(x)/eps) ].

All evaluations subtract the per-pixel minimum cost before exponentiating, so
the winning term contributes exp(0) and no overflow can occur for finite
inputs. Reductions over pixels run in fixed-size chunks; the default is a
sequential left-to-right fold (bit-reproducible), with an opt-in threaded
tree reduction that agrees with it to near machine precision.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .basis import DesignBasis, DesignMatrix, GAUGE_LAST_ZERO, ParamMatrix, assemble_design_matrix
from .geometry import GrainMap, PixelGrid, argmin_labels

CHUNK_SIZE = 8192


@dataclass(frozen=True)
class SoftAssignment:
    """Softmax memberships: column x holds the probabilities (p_i(x))_i."""

    probabilities: np.ndarray
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def validate(self, tol: float = 1e-12) -> None:
        """Check the probability-simplex invariants (columns sum to 1, entries in (0,1))."""
        p = self.probabilities
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise ValueError("soft assignment entries must lie strictly in (0, 1)")
        col = p.sum(axis=0)
        if np.abs(col - 1.0).max() > tol:
            raise ValueError("soft assignment columns must sum to one")


def _check_compatible(theta: ParamMatrix, design: DesignMatrix) -> None:
    if theta.basis != design.basis:
        raise ValueError(
            f"parameter basis ({theta.basis.kind}, d={theta.degree}) does not match "
            f"design basis ({design.basis.kind}, d={design.basis.degree})"
        )


def cost_matrix(theta: ParamMatrix, design: DesignMatrix) -> np.ndarray:
    """Per-grain, per-pixel costs h_i(x_j) as an (N, n) matrix."""
    _check_compatible(theta, design)
    if not np.all(np.isfinite(theta.values)):
        raise ValueError("parameter matrix contains non-finite entries")
    return theta.values.T @ design.values


def hard_assign(theta: ParamMatrix, basis: DesignBasis, grid: PixelGrid,
                design: DesignMatrix | None = None) -> np.ndarray:
    """Arg-min labels of the diagram induced by theta, smallest index on ties."""
    if theta.basis != basis:
        raise ValueError("parameter matrix was built for a different basis")
    if design is None:
        design = assemble_design_matrix(basis, grid)
    return argmin_labels(cost_matrix(theta, design))


def soft_assign(theta: ParamMatrix, design: DesignMatrix, eps: float) -> SoftAssignment:
    """Softmax memberships at temperature eps, stabilised by min-cost subtraction."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    costs = cost_matrix(theta, design)
    z = (costs.min(axis=0)[None, :] - costs) / eps
    e = np.exp(z)
    return SoftAssignment(probabilities=e / e.sum(axis=0)[None, :], epsilon=eps)


class EvalResult(NamedTuple):
    phi: float
    grad: np.ndarray | None
    err: float | None
    e0: float | None


def _chunk_stats(theta_values, design_values, labels0, eps, sl, want_grad, want_assign):
    d = design_values[:, sl]
    c = theta_values.T @ d
    g0 = labels0[sl]
    cols = np.arange(c.shape[1])
    m = c.min(axis=0)
    z = (m[None, :] - c) / eps
    e = np.exp(z)
    s = e.sum(axis=0)
    lse_sum = float(z[g0, cols].sum() - np.log(s).sum())

    gacc = None
    if want_grad:
        r = e / s[None, :]
        np.negative(r, out=r)
        r[g0, cols] += 1.0
        gacc = d @ r.T

    ncorrect = 0
    e0_sum = 0.0
    if want_assign:
        ncorrect = int(np.count_nonzero(argmin_labels(c) - 1 == g0))
        e0_sum = float((c[g0, cols] - m).sum())
    return lse_sum, gacc, ncorrect, e0_sum


def _combine(a, b):
    lse = a[0] + b[0]
    gacc = a[1] + b[1] if a[1] is not None else None
    return lse, gacc, a[2] + b[2], a[3] + b[3]


def evaluate_objective(theta_values: np.ndarray, design_values: np.ndarray,
                       labels0: np.ndarray, eps: float, *, want_grad: bool = True,
                       want_assign: bool = False, threads: int = 1,
                       chunk_size: int = CHUNK_SIZE) -> EvalResult:
    """Chunked evaluation of the objective and, optionally, gradient and assignment stats.

    ``labels0`` are 0-based true labels. threads == 1 folds chunk partial sums
    sequentially; threads > 1 computes partials in a thread pool and combines
    them pairwise in a fixed tree order. Both orders are deterministic.
    """
    n = design_values.shape[1]
    slices = [slice(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]

    def stats(sl):
        return _chunk_stats(theta_values, design_values, labels0, eps, sl,
                            want_grad, want_assign)

    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(stats, slices))
        while len(parts) > 1:
            parts = [
                _combine(parts[i], parts[i + 1]) if i + 1 < len(parts) else parts[i]
                for i in range(0, len(parts), 2)
            ]
        total = parts[0]
    else:
        total = stats(slices[0])
        for sl in slices[1:]:
            total = _combine(total, stats(sl))

    lse_sum, gacc, ncorrect, e0_sum = total
    phi = lse_sum / n
    grad = -gacc / (eps * n) if want_grad else None
    err = 1.0 - float(ncorrect) / n if want_assign else None
    e0 = e0_sum / n if want_assign else None
    return EvalResult(phi=phi, grad=grad, err=err, e0=e0)


def objective(theta: ParamMatrix, design: DesignMatrix, grain_map: GrainMap,
              eps: float) -> float:
    """Mean log-probability of the true labels under the soft assignment; <= 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    _check_compatible(theta, design)
    if not np.all(np.isfinite(theta.values)):
        raise ValueError("parameter matrix contains non-finite entries")
    res = evaluate_objective(theta.values, design.values, grain_map.labels - 1,
                             eps, want_grad=False)
    return res.phi


def gradient(theta: ParamMatrix, design: DesignMatrix, grain_map: GrainMap,
             eps: float) -> np.ndarray:
    """Gradient of the objective with respect to theta, shape (K_d, N).

    Block i equals -(1/(eps*n)) sum_x (1[i == g(x)] - p_i(x)) eta(x). Under the
    last-column-zero gauge the final column is projected to zero.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _check_compatible(theta, design)
    if not np.all(np.isfinite(theta.values)):
        raise ValueError("parameter matrix contains non-finite entries")
    res = evaluate_objective(theta.values, design.values, grain_map.labels - 1,
                             eps, want_grad=True)
    grad = res.grad
    if theta.gauge == GAUGE_LAST_ZERO:
        grad[:, -1] = 0.0
    return grad


def hessian_block(theta: ParamMatrix, design: DesignMatrix, grain_map: GrainMap,
                  eps: float, i: int, k: int) -> np.ndarray:
    """The (i, k) block of the Hessian (grain indices 1-based), shape (K_d, K_d).

    Equals -(1/(eps^2 n)) sum_x p_i(x) (1[i==k] - p_k(x)) eta(x) eta(x)^T.
    Dense and intended for diagnostics on small problems; the optimiser never
    forms it.
    """
    n_grains = theta.n_grains
    if not (1 <= i <= n_grains and 1 <= k <= n_grains):
        raise ValueError(f"grain indices must lie in 1..{n_grains}")
    p = soft_assign(theta, design, eps).probabilities
    pi, pk = p[i - 1], p[k - 1]
    w = pi * ((1.0 if i == k else 0.0) - pk)
    d = design.values
    n = d.shape[1]
    return -(d * w[None, :]) @ d.T / (eps * eps * n)


def energy_eps(theta: ParamMatrix, design: DesignMatrix, grain_map: GrainMap,
               eps: float) -> float:
    """Rescaled energy -eps * Phi; converges uniformly to ``energy_zero`` as eps -> 0."""
    return -eps * objective(theta, design, grain_map, eps)


def energy_zero(theta: ParamMatrix, design: DesignMatrix, grain_map: GrainMap) -> float:
    """Mean excess cost of the true labels over the per-pixel minimum; >= 0."""
    costs = cost_matrix(theta, design)
    cols = np.arange(costs.shape[1])
    excess = costs[grain_map.labels - 1, cols] - costs.min(axis=0)
    return float(excess.mean())
