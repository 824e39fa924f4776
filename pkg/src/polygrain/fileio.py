"""File formats: grain-map CSV, coefficient CSV, report JSON, physical JSON, PPM.

All text outputs are deterministic: floats are written with ``repr`` (shortest
round-trip form) and JSON keys are sorted, so identical runs produce
byte-identical files. Timing information lives under a separate "timing" key
in report JSON so consumers can exclude it when comparing runs.

Grain-map CSV:      header ``x1,x2,label``; one row per pixel.
Coefficient CSV:    one ``# key=value`` metadata line (basis, degree, ordering,
                    gauge), then header ``alpha1,alpha2,theta_1..theta_N``.
Physical JSON:      seeds/weights (and row-major 2x2 anisotropy for degree 2).
Images:             binary PPM (P6).
"""

from __future__ import annotations

import csv
import json
import math
from colorsys import hsv_to_rgb
from pathlib import Path

import numpy as np

from .basis import BASIS_KINDS, DesignBasis, GAUGE_FREE, GAUGE_LAST_ZERO, ORDERING_CONVENTION, ParamMatrix
from .conversions import APDRecovery
from .errors import InputFormatError
from .geometry import GrainMap, PhysicalAPD, PhysicalPD, PixelGrid, make_grid
from .optimizer import FitReport

MISASSIGN_CORRECT = (250, 218, 221)
MISASSIGN_WRONG = (40, 40, 40)


def _fmt(x) -> str:
    return repr(float(x))


def write_grain_map_csv(path, grain_map: GrainMap) -> None:
    lines = ["x1,x2,label"]
    pts = grain_map.grid.points
    for (x1, x2), lab in zip(pts, grain_map.labels):
        lines.append(f"{_fmt(x1)},{_fmt(x2)},{int(lab)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InputFormatError(f"row {row}, column {column!r}: not a number: {text!r}") from exc


def _parse_int(text: str, row: int, column: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise InputFormatError(f"row {row}, column {column!r}: not an integer: {text!r}") from exc


def _parse_label(text: str, row: int, column: str) -> int:
    value = _parse_int(text, row, column)
    if value < 1:
        raise InputFormatError(f"row {row}, column {column!r}: labels are 1-based, got {value}")
    return value


def _read_rows(path, expected_header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise InputFormatError(
                f"{path}: expected header {','.join(expected_header)!r}, got {','.join(header)!r}"
            )
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise InputFormatError(
                    f"{path}: row {i}: expected {len(expected_header)} fields, got {len(row)}"
                )
            yield i, row


def infer_resolution(points: np.ndarray) -> int | None:
    """M if the points are exactly a regular grid in canonical order, else None."""
    n = points.shape[0]
    side = math.isqrt(n)
    if side * side != n or side % 2 != 0:
        return None
    m = side // 2
    if np.array_equal(points, make_grid(m).points):
        return m
    return None


def read_grain_map_csv(path) -> GrainMap:
    """Read a grain map; the grain count is the largest label present."""
    xs, labels = [], []
    for i, row in _read_rows(path, ["x1", "x2", "label"]):
        xs.append((_parse_float(row[0], i, "x1"), _parse_float(row[1], i, "x2")))
        labels.append(_parse_label(row[2], i, "label"))
    if len(labels) < 2:
        raise InputFormatError(f"{path}: need at least two pixels")
    points = np.asarray(xs)
    grid = PixelGrid(points=points, resolution=infer_resolution(points))
    return GrainMap(grid=grid, labels=np.asarray(labels), n_grains=max(labels))


def write_theta_csv(path, theta: ParamMatrix) -> None:
    n = theta.n_grains
    meta = (f"# basis={theta.basis.kind},degree={theta.degree},"
            f"ordering={ORDERING_CONVENTION},gauge={theta.gauge}")
    header = "alpha1,alpha2," + ",".join(f"theta_{i}" for i in range(1, n + 1))
    lines = [meta, header]
    for row, (a1, a2) in enumerate(theta.basis.index_set.indices):
        vals = ",".join(_fmt(v) for v in theta.values[row])
        lines.append(f"{a1},{a2},{vals}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_theta_csv(path) -> ParamMatrix:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise InputFormatError(f"{path}: missing '# basis=...' metadata line")
    meta = {}
    for item in text[0][1:].strip().split(","):
        if "=" not in item:
            raise InputFormatError(f"{path}: malformed metadata item {item!r}")
        key, value = item.split("=", 1)
        meta[key.strip()] = value.strip()
    kind = meta.get("basis")
    if kind not in BASIS_KINDS:
        raise InputFormatError(f"{path}: unknown basis kind {kind!r}")
    try:
        degree = int(meta.get("degree", ""))
    except ValueError:
        raise InputFormatError(f"{path}: bad degree {meta.get('degree')!r}") from None
    if meta.get("ordering") != ORDERING_CONVENTION:
        raise InputFormatError(
            f"{path}: ordering {meta.get('ordering')!r} not supported "
            f"(expected {ORDERING_CONVENTION!r})"
        )
    gauge = meta.get("gauge", GAUGE_FREE)
    if gauge not in (GAUGE_FREE, GAUGE_LAST_ZERO):
        raise InputFormatError(f"{path}: unknown gauge {gauge!r}")

    basis = DesignBasis.make(kind, degree)
    reader = csv.reader(text[1:])
    header = next(reader, None)
    if header is None or header[:2] != ["alpha1", "alpha2"]:
        raise InputFormatError(f"{path}: expected header starting with alpha1,alpha2")
    n = len(header) - 2
    if n < 2:
        raise InputFormatError(f"{path}: need at least two coefficient columns")
    values = np.zeros((basis.dimension, n))
    seen = 0
    for i, row in enumerate(reader, start=3):
        if not row:
            continue
        if len(row) != n + 2:
            raise InputFormatError(f"{path}: row {i}: expected {n + 2} fields, got {len(row)}")
        a1 = _parse_int(row[0], i, "alpha1")
        a2 = _parse_int(row[1], i, "alpha2")
        try:
            pos = basis.index_set.position((a1, a2))
        except ValueError as exc:
            raise InputFormatError(f"{path}: row {i}: {exc}") from None
        values[pos] = [_parse_float(v, i, f"theta_{j + 1}") for j, v in enumerate(row[2:])]
        seen += 1
    if seen != basis.dimension:
        raise InputFormatError(
            f"{path}: expected {basis.dimension} coefficient rows for degree {degree}, got {seen}"
        )
    return ParamMatrix(values=values, basis=basis, gauge=gauge)


def write_labels_csv(path, grid: PixelGrid, labels: np.ndarray) -> None:
    write_grain_map_csv(path, GrainMap(grid=grid, labels=labels,
                                       n_grains=max(2, int(np.max(labels)))))


def write_misassignment_csv(path, grid: PixelGrid, true_labels: np.ndarray,
                            fitted_labels: np.ndarray) -> None:
    lines = ["x1,x2,label_true,label_fit"]
    for (x1, x2), t, f in zip(grid.points, true_labels, fitted_labels):
        lines.append(f"{_fmt(x1)},{_fmt(x2)},{int(t)},{int(f)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_misassignment_csv(path):
    xs, true_labels, fitted = [], [], []
    for i, row in _read_rows(path, ["x1", "x2", "label_true", "label_fit"]):
        xs.append((_parse_float(row[0], i, "x1"), _parse_float(row[1], i, "x2")))
        true_labels.append(_parse_label(row[2], i, "label_true"))
        fitted.append(_parse_label(row[3], i, "label_fit"))
    return np.asarray(xs), np.asarray(true_labels), np.asarray(fitted)


def report_to_dict(report: FitReport, theta_path: str | None = None) -> dict:
    """JSON-ready report; wall clock lives under 'timing' so runs stay comparable."""
    body = {
        "epsilon": float(report.eps),
        "n_grains": int(report.n_grains),
        "n_pixels": int(report.n_pixels),
        "final": {
            "phi": float(report.phi_final),
            "acc": float(report.acc_final),
            "err": float(report.err_final),
            "iterations_run": int(report.iterations_run),
            "stop_reason": report.stop_reason,
        },
        "trajectory": {
            "iteration": [int(i) for i in report.iters],
            "phi": [float(v) for v in report.phi_traj],
            "err": [float(v) for v in report.err_traj],
            "energy_zero": [float(v) for v in report.e0_traj],
        },
        "checks": {
            "gauge_residual": float(report.gauge_residual),
            "design_spans": bool(report.design_spans),
            "misassignment_bound_ok": bool(report.bound_phi_err_ok),
            "energy_bound_ok": bool(report.bound_energy_ok),
        },
        "theta": {
            "basis": report.theta.basis.kind,
            "degree": int(report.theta.degree),
            "gauge": report.theta.gauge,
            "path": theta_path,
        },
        "timing": {"wall_clock_s": float(report.wall_clock_s)},
    }
    return body


def write_report_json(path, report: FitReport, theta_path: str | None = None) -> None:
    Path(path).write_text(dumps_json(report_to_dict(report, theta_path)))


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def physical_to_dict(params: PhysicalPD | PhysicalAPD | APDRecovery) -> dict:
    if isinstance(params, PhysicalPD):
        return {
            "kind": "pd",
            "seeds": [[float(a), float(b)] for a, b in params.seeds],
            "weights": [float(w) for w in params.weights],
        }
    if isinstance(params, PhysicalAPD):
        rec = {"kind": "apd", "recoverable": [True] * params.n_grains}
        seeds, weights, mats = params.seeds, params.weights, params.anisotropy
    else:
        rec = {"kind": "apd", "recoverable": [bool(r) for r in params.recoverable]}
        seeds, weights, mats = params.seeds, params.weights, params.anisotropy
    rec["seeds"] = [
        [float(a), float(b)] if np.isfinite(a) and np.isfinite(b) else None
        for a, b in seeds
    ]
    rec["weights"] = [float(w) if np.isfinite(w) else None for w in weights]
    rec["anisotropy"] = [[[float(m[0, 0]), float(m[0, 1])],
                          [float(m[1, 0]), float(m[1, 1])]] for m in mats]
    return rec


def write_physical_json(path, params) -> None:
    Path(path).write_text(dumps_json(physical_to_dict(params)))


def read_physical_json(path):
    data = json.loads(Path(path).read_text())
    kind = data.get("kind")
    if kind == "pd":
        return PhysicalPD(seeds=np.asarray(data["seeds"], dtype=float),
                          weights=np.asarray(data["weights"], dtype=float))
    if kind == "apd":
        if any(s is None for s in data["seeds"]):
            raise InputFormatError(f"{path}: contains unrecoverable grains")
        return PhysicalAPD(seeds=np.asarray(data["seeds"], dtype=float),
                           weights=np.asarray(data["weights"], dtype=float),
                           anisotropy=np.asarray(data["anisotropy"], dtype=float))
    raise InputFormatError(f"{path}: unknown physical parameter kind {kind!r}")


def grid_indices(points: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """(M, k1, k2) pixel indices of a regular grid, in any row order.

    Raises ValueError for unstructured point sets; rendering needs a grid.
    """
    n = points.shape[0]
    side = math.isqrt(n)
    if side * side != n or side % 2 != 0:
        raise ValueError("not a regular grid: pixel count is not an even square")
    m = side // 2
    k1 = np.rint((points[:, 0] + 1.0) * m + 0.5).astype(int)
    k2 = np.rint((points[:, 1] + 1.0) * m + 0.5).astype(int)
    expected1 = -1.0 + (k1 - 0.5) / m
    expected2 = -1.0 + (k2 - 0.5) / m
    ok = (
        (k1 >= 1) & (k1 <= side) & (k2 >= 1) & (k2 <= side)
        & (np.abs(points[:, 0] - expected1) <= 1e-9)
        & (np.abs(points[:, 1] - expected2) <= 1e-9)
    )
    if not ok.all():
        raise ValueError("not a regular grid: coordinates do not sit on pixel centres")
    flat = (k1 - 1) * side + (k2 - 1)
    if np.unique(flat).size != n:
        raise ValueError("not a regular grid: duplicate pixels")
    return m, k1, k2


def label_color(label: int) -> tuple[int, int, int]:
    """Deterministic colour for a grain label (golden-angle hue stepping)."""
    hue = (label * 0.6180339887498949) % 1.0
    sat = 0.55 + 0.25 * ((label * 7) % 3) / 2.0
    val = 0.95 - 0.25 * ((label * 13) % 4) / 3.0
    r, g, b = hsv_to_rgb(hue, sat, val)
    return int(round(255 * r)), int(round(255 * g)), int(round(255 * b))


def labels_image(points: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """(2M, 2M, 3) uint8 image of a label map; x2 increases upwards."""
    m, k1, k2 = grid_indices(points)
    side = 2 * m
    img = np.zeros((side, side, 3), dtype=np.uint8)
    colors = np.array([label_color(lab) for lab in range(0, labels.max() + 1)],
                      dtype=np.uint8)
    rows = side - k2
    cols = k1 - 1
    img[rows, cols] = colors[labels]
    return img


def misassignment_image(points: np.ndarray, true_labels: np.ndarray,
                        fitted_labels: np.ndarray) -> np.ndarray:
    m, k1, k2 = grid_indices(points)
    side = 2 * m
    img = np.zeros((side, side, 3), dtype=np.uint8)
    correct = true_labels == fitted_labels
    rows = side - k2
    cols = k1 - 1
    img[rows, cols] = np.where(correct[:, None],
                               np.array(MISASSIGN_CORRECT, dtype=np.uint8),
                               np.array(MISASSIGN_WRONG, dtype=np.uint8))
    return img


def write_ppm(path, image: np.ndarray) -> None:
    """Binary PPM (P6) writer for (H, W, 3) uint8 images."""
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError("image must be (H, W, 3) uint8")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
