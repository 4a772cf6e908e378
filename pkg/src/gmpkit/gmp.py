"""Geometric MyoPassivity (GMP) maps.

A GMP map indexes the measured excess of passivity of one subject by
interaction direction (8 cardinal spokes), muscle co-activation (the
measured mean %MVC of each cell, not the nominal target), and perturbation
frequency. Lookup interpolates bilinearly over the (%MVC, frequency) grid
of a spoke: %MVC extrapolation is clamped to the nearest edge, frequency
extrapolation is refused (no data outside the measured grid). Directions
are categorical; no interpolation across spokes.

Maps are immutable after build; lookup is read-only and safe for
concurrent use by a controller loop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IncompleteMapError, MapConflictError, MapRangeError, SingularFitError
from .passivity import EopEstimate

N_DIRECTIONS = 8
ACTIVATION_LABELS = ("relaxed", "stiff")
FREQUENCY_LABELS = ("low", "high")

CellKey = tuple[int, str, str]  # (direction_index, activation_label, frequency_label)


@dataclass(frozen=True)
class TrendLine:
    """First-order least-squares fit of EoP against %MVC."""

    slope: float          # EoP per unit %MVC fraction, N*s/m
    intercept: float      # N*s/m
    frequency_label: str
    rss: float            # residual sum of squares
    n_points: int


@dataclass(frozen=True)
class GmpMap:
    subject_id: str
    cells: dict[CellKey, EopEstimate]
    frequencies: dict[str, float]   # frequency label -> Hz
    n_directions: int = N_DIRECTIONS

    def grid_keys(self) -> list[CellKey]:
        return [
            (d, act, freq)
            for d in range(self.n_directions)
            for act in ACTIVATION_LABELS
            for freq in sorted(self.frequencies, key=self.frequencies.get)
        ]

    def missing_cells(self) -> list[CellKey]:
        return [key for key in self.grid_keys() if key not in self.cells]

    @property
    def complete(self) -> bool:
        return not self.missing_cells()

    def cell(self, direction_index: int, activation_label: str, frequency_label: str) -> EopEstimate:
        return self.cells[(direction_index, activation_label, frequency_label)]


def build_map(
    estimates: Sequence[EopEstimate],
    subject_id: str,
    frequencies: dict[str, float] | None = None,
) -> GmpMap:
    """Assemble a map from estimates; duplicate cells are a hard conflict.

    The frequency grid (label -> Hz) is taken from the estimates unless
    given explicitly; estimates sharing a label must agree on the Hz value.
    """
    cells: dict[CellKey, EopEstimate] = {}
    freqs: dict[str, float] = dict(frequencies) if frequencies else {}
    for est in estimates:
        key = (est.direction_index, est.activation_label, est.frequency_label)
        if key in cells:
            raise MapConflictError(f"duplicate estimate for cell {key}")
        cells[key] = est
        if est.frequency_hz is not None:
            known = freqs.get(est.frequency_label)
            if known is None:
                freqs[est.frequency_label] = float(est.frequency_hz)
            elif not math.isclose(known, est.frequency_hz, rel_tol=1e-9):
                raise MapConflictError(
                    f"label {est.frequency_label!r} maps to both {known} and {est.frequency_hz} Hz"
                )
    if not freqs:
        freqs = {label: dict(zip(FREQUENCY_LABELS, (1.0, 3.0)))[label]
                 for label in FREQUENCY_LABELS}
    return GmpMap(subject_id=subject_id, cells=cells, frequencies=freqs)


def median_map(maps: Sequence[GmpMap], subject_id: str = "median") -> GmpMap:
    """Per-cell median of xi and of mean %MVC across complete maps."""
    if len(maps) == 0:
        raise ValueError("need at least one map")
    grid = maps[0].frequencies
    for m in maps:
        if not m.complete:
            raise IncompleteMapError(f"map {m.subject_id!r} is missing cells: {m.missing_cells()}")
        if set(m.frequencies) != set(grid) or any(
            not math.isclose(m.frequencies[k], grid[k], rel_tol=1e-9) for k in grid
        ):
            raise IncompleteMapError("maps do not share a frequency grid")
    cells: dict[CellKey, EopEstimate] = {}
    for key in maps[0].grid_keys():
        xi = float(np.median([m.cells[key].xi for m in maps]))
        pct = float(np.median([m.cells[key].mean_pct_mvc for m in maps]))
        direction, activation, frequency = key
        cells[key] = EopEstimate(
            subject_id=subject_id,
            direction_index=direction,
            activation_label=activation,
            frequency_label=frequency,
            xi=xi,
            mean_pct_mvc=pct,
            numerator=xi,
            denominator=1.0,
            window=None,
            frequency_hz=maps[0].frequencies[frequency],
        )
    return GmpMap(subject_id=subject_id, cells=cells, frequencies=dict(grid))


def _interp_clamped(x: float, x0: float, y0: float, x1: float, y1: float) -> float:
    """Linear interpolation with nearest-edge clamping outside [x0, x1]."""
    if x1 < x0:
        x0, y0, x1, y1 = x1, y1, x0, y0
    if math.isclose(x0, x1, rel_tol=1e-12, abs_tol=1e-12):
        return 0.5 * (y0 + y1)
    if x <= x0:
        return y0
    if x >= x1:
        return y1
    frac = (x - x0) / (x1 - x0)
    return y0 + frac * (y1 - y0)


def lookup(gmp_map: GmpMap, direction_index: int, pct_mvc: float, frequency: float) -> float:
    """Predicted EoP at (direction, %MVC, frequency).

    Interpolates in %MVC along each measured frequency row (clamped at the
    row's node range), then linearly in frequency between the two rows.
    Frequencies outside the measured grid are refused.
    """
    if not 0 <= direction_index < gmp_map.n_directions:
        raise ValueError(f"direction_index out of range: {direction_index}")
    if not 0.0 <= pct_mvc <= 1.0:
        raise ValueError(f"pct_mvc must be within [0, 1], got {pct_mvc}")
    labels = sorted(gmp_map.frequencies, key=gmp_map.frequencies.get)
    hz = [gmp_map.frequencies[label] for label in labels]
    tol = 1e-9 * max(1.0, abs(hz[-1]))
    if frequency < hz[0] - tol or frequency > hz[-1] + tol:
        raise MapRangeError(
            f"frequency {frequency} Hz outside map grid [{hz[0]}, {hz[-1]}] Hz"
        )

    def xi_at(label: str) -> float:
        nodes = []
        for act in ACTIVATION_LABELS:
            key = (direction_index, act, label)
            if key not in gmp_map.cells:
                raise IncompleteMapError(f"map {gmp_map.subject_id!r} missing cell {key}")
            cell = gmp_map.cells[key]
            nodes.append((cell.mean_pct_mvc, cell.xi))
        (p0, v0), (p1, v1) = nodes
        return _interp_clamped(pct_mvc, p0, v0, p1, v1)

    if len(labels) == 1:
        return xi_at(labels[0])
    upper = 1
    while upper < len(hz) - 1 and frequency > hz[upper] + tol:
        upper += 1
    f0, f1 = hz[upper - 1], hz[upper]
    y0, y1 = xi_at(labels[upper - 1]), xi_at(labels[upper])
    return _interp_clamped(min(max(frequency, f0), f1), f0, y0, f1, y1)


def fit_trend(estimates: Sequence[EopEstimate], frequency_label: str) -> TrendLine:
    """Ordinary least squares of xi on measured %MVC for one frequency."""
    pts = [e for e in estimates if e.frequency_label == frequency_label]
    if len(pts) < 2:
        raise SingularFitError(
            f"need >= 2 estimates with frequency label {frequency_label!r}, got {len(pts)}"
        )
    x = np.array([e.mean_pct_mvc for e in pts])
    y = np.array([e.xi for e in pts])
    x_span = x.max() - x.min()
    if x_span <= 1e-12 * max(1.0, abs(x).max()):
        raise SingularFitError("all %MVC values identical; slope is undefined")
    x_mean, y_mean = x.mean(), y.mean()
    slope = float(np.sum((x - x_mean) * (y - y_mean)) / np.sum((x - x_mean) ** 2))
    intercept = float(y_mean - slope * x_mean)
    rss = float(np.sum((y - (intercept + slope * x)) ** 2))
    return TrendLine(
        slope=slope,
        intercept=intercept,
        frequency_label=frequency_label,
        rss=rss,
        n_points=len(pts),
    )


# -- persistence -------------------------------------------------------------


def save_map_json(gmp_map: GmpMap, path) -> None:
    """Persist as ``{subject, grid:{frequencies, directions}, cells:[...]}``."""
    labels = sorted(gmp_map.frequencies, key=gmp_map.frequencies.get)
    doc = {
        "subject": gmp_map.subject_id,
        "grid": {
            "frequencies": [gmp_map.frequencies[label] for label in labels],
            "directions": gmp_map.n_directions,
        },
        "cells": [
            {
                "dir": key[0],
                "activation": key[1],
                "frequency": gmp_map.frequencies[key[2]],
                "xi": gmp_map.cells[key].xi,
                "pct_mvc": gmp_map.cells[key].mean_pct_mvc,
            }
            for key in sorted(gmp_map.cells)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_map_json(path) -> GmpMap:
    """Rebuild a lookup-ready map from its JSON document.

    The persisted schema keeps only (xi, pct_mvc) per cell, so the restored
    estimates carry unit denominators and no window.
    """
    with open(path, "r") as fh:
        doc = json.load(fh)
    grid_freqs = sorted(float(f) for f in doc["grid"]["frequencies"])
    if len(grid_freqs) > len(FREQUENCY_LABELS):
        raise ValueError(f"{path}: more frequencies than supported labels")
    label_by_hz = {hz: FREQUENCY_LABELS[i] for i, hz in enumerate(grid_freqs)}
    estimates = []
    for cell in doc["cells"]:
        hz = float(cell["frequency"])
        matches = [label for known_hz, label in label_by_hz.items() if math.isclose(known_hz, hz, rel_tol=1e-9)]
        if not matches:
            raise ValueError(f"{path}: cell frequency {hz} Hz not in grid {grid_freqs}")
        xi = float(cell["xi"])
        estimates.append(
            EopEstimate(
                subject_id=doc["subject"],
                direction_index=int(cell["dir"]),
                activation_label=str(cell["activation"]),
                frequency_label=matches[0],
                xi=xi,
                mean_pct_mvc=float(cell["pct_mvc"]),
                numerator=xi,
                denominator=1.0,
                window=None,
                frequency_hz=hz,
            )
        )
    frequencies = {label: hz for hz, label in label_by_hz.items()}
    built = build_map(estimates, subject_id=str(doc["subject"]), frequencies=frequencies)
    if int(doc["grid"]["directions"]) != built.n_directions:
        raise ValueError(f"{path}: unsupported direction count {doc['grid']['directions']}")
    return built


SPIDER_CSV_HEADER = "direction_deg,xi_LR,xi_LS,xi_HR,xi_HS"

# spider column order: (activation_label, frequency_label)
_SPIDER_CELLS = (("relaxed", "low"), ("stiff", "low"), ("relaxed", "high"), ("stiff", "high"))


def save_spider_csv(gmp_map: GmpMap, path) -> None:
    """Spoke-plot data: one row per direction, one xi column per test."""
    with open(path, "w", newline="") as fh:
        fh.write(SPIDER_CSV_HEADER + "\n")
        for direction in range(gmp_map.n_directions):
            row = [str(direction * 45)]
            for act, freq in _SPIDER_CELLS:
                cell = gmp_map.cells.get((direction, act, freq))
                row.append("" if cell is None else repr(float(cell.xi)))
            fh.write(",".join(row) + "\n")
