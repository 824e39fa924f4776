"""Compression accounting, degree sweeps, and bound verification.

Storing a labelled pixel set naively takes 3n scalars (two coordinates and a
label per pixel), while a fitted degree-d diagram takes K_d coefficients per
grain, giving the compression ratio K_d N / (3 n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .basis import DesignMatrix, ParamMatrix, feature_count, zero_pad
from .geometry import GrainMap, accuracy_and_error, argmin_labels
from .objective import cost_matrix, energy_zero, objective
from .optimizer import FitConfig, FitReport, fit


@dataclass(frozen=True)
class CompressionEntry:
    degree: int
    n_grains: int
    n_pixels: int
    k_d: int
    ratio: float

    @property
    def percent(self) -> float:
        """Ratio as a percentage rounded half-to-even to two decimals."""
        return round(100.0 * self.ratio, 2)


def compression(degree: int, n_grains: int, n_pixels: int) -> float:
    """Coefficient count over naive labelled-pixel storage: K_d N / (3 n)."""
    if degree < 1 or n_grains < 1 or n_pixels < 1:
        raise ValueError("degree, grain count and pixel count must be positive")
    return feature_count(degree) * n_grains / (3.0 * n_pixels)


def compression_entry(degree: int, n_grains: int, n_pixels: int) -> CompressionEntry:
    return CompressionEntry(degree=degree, n_grains=n_grains, n_pixels=n_pixels,
                            k_d=feature_count(degree),
                            ratio=compression(degree, n_grains, n_pixels))


@dataclass(frozen=True)
class SweepRow:
    degree: int
    k_d: int
    phi_final: float
    acc_final: float
    err_final: float
    compr: float


def degree_sweep(grain_map: GrainMap, degrees: list[int],
                 config: FitConfig) -> tuple[list[SweepRow], list[FitReport]]:
    """Fit the same map at several degrees under a shared protocol.

    ``degrees`` must be sorted ascending. Returns one table row per degree
    plus the full reports (for trajectory-level checks).
    """
    if list(degrees) != sorted(degrees):
        raise ValueError("degrees must be sorted ascending")
    rows: list[SweepRow] = []
    reports: list[FitReport] = []
    for d in degrees:
        rep = fit(grain_map, replace(config, degree=d))
        rows.append(SweepRow(degree=d, k_d=feature_count(d),
                             phi_final=rep.phi_final, acc_final=rep.acc_final,
                             err_final=rep.err_final,
                             compr=compression(d, grain_map.n_grains, len(grain_map))))
        reports.append(rep)
    return rows, reports


def padded_objective(theta: ParamMatrix, degree: int, design: DesignMatrix,
                     grain_map: GrainMap, eps: float) -> float:
    """Objective of a lower-degree coefficient matrix embedded at ``degree``.

    Zero padding is an exact embedding, so this witnesses that any
    lower-degree fit is admissible at the higher degree.
    """
    return objective(zero_pad(theta, degree), design, grain_map, eps)


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the analytic consistency checks at one parameter value."""

    phi: float
    err: float
    energy_eps: float
    energy_zero: float
    eps: float
    n_grains: int
    n_pixels: int
    misassignment_bound_ok: bool
    energy_bound_ok: bool
    near_optimal: bool
    near_optimal_consistent: bool

    @property
    def all_ok(self) -> bool:
        return (self.misassignment_bound_ok and self.energy_bound_ok
                and self.near_optimal_consistent)


def bound_report(theta: ParamMatrix, grain_map: GrainMap, design: DesignMatrix,
                 eps: float, slack: float = 1e-12) -> BoundReport:
    """Verify the objective/error inequalities at one parameter value.

    Checks, each with additive slack 1e-12:
      * phi <= -log(2) * err (every misassigned pixel costs at least log 2);
      * 0 <= -eps*phi - e0 <= eps*log(N) (log-sum-exp sandwich);
      * phi > -log(2)/n forces err == 0 exactly.
    """
    costs = cost_matrix(theta, design)
    phi = objective(theta, design, grain_map, eps)
    _, err = accuracy_and_error(grain_map, argmin_labels(costs))
    e0 = energy_zero(theta, design, grain_map)
    e_eps = -eps * phi
    n = len(grain_map)
    log2 = math.log(2.0)
    log_n = math.log(grain_map.n_grains)
    near_optimal = phi > -log2 / n
    return BoundReport(
        phi=phi, err=err, energy_eps=e_eps, energy_zero=e0, eps=eps,
        n_grains=grain_map.n_grains, n_pixels=n,
        misassignment_bound_ok=bool(phi <= -log2 * err + slack),
        energy_bound_ok=bool(-slack <= e_eps - e0 <= eps * log_n + slack),
        near_optimal=bool(near_optimal),
        near_optimal_consistent=bool((not near_optimal) or err == 0.0),
    )
