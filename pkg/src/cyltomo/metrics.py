"""Discrepancy, spectra and run reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .scene import ScalarField

__all__ = [
    "MetricsError",
    "delta_v",
    "spectrum_cross_section",
    "ReconReport",
    "report",
    "write_sweep_csv",
]


class MetricsError(ValueError):
    pass


def delta_v(estimate: ScalarField, truth: ScalarField, radius: float) -> float:
    """Relative rms discrepancy over the disc |r| <= radius.

    Non-finite estimate samples propagate to a NaN result rather than being
    dropped.
    """
    if estimate.grid != truth.grid:
        raise MetricsError("estimate and truth live on different grids")
    mask = truth.grid.disc_mask(radius)
    den = np.sqrt(np.sum(np.abs(truth.values[mask]) ** 2))
    if den == 0:
        raise MetricsError("truth vanishes on the evaluation disc")
    num = np.sqrt(np.sum(np.abs(estimate.values[mask] - truth.values[mask]) ** 2))
    return float(num / den)


def spectrum_cross_section(fld: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """(k_x, |v~(k_x, 0)| / max) with k_x ascending."""
    spec = np.abs(np.fft.fft2(fld.values)[0])
    peak = spec.max()
    if peak == 0:
        raise MetricsError("field is identically zero")
    kx = 2 * np.pi * np.fft.fftfreq(fld.grid.n, d=fld.grid.step)
    order = np.argsort(kx)
    return kx[order], spec[order] / peak


@dataclass
class ReconReport:
    scene: str
    engine: str
    delta_v_raw: float
    delta_v_filtered: float
    norm_f_over_3pi: float
    delta_psi: float
    alpha: float
    seed: int | None = None
    g_sc_rms: float = math.nan
    flagged_points: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def delta_psi_over_pi(self) -> float:
        return abs(self.delta_psi) / math.pi

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta_psi_abs_over_pi"] = self.delta_psi_over_pi
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def report(scene, engine: str, noise=None, consts=None, **kwargs) -> tuple[ReconReport, dict]:
    """Run the full chain for ``scene`` and summarize it.

    Returns the report and the intermediate products (amplitude, fields).
    """
    from .recon import run_pipeline

    run = run_pipeline(scene, engine, noise=noise, consts=consts, **kwargs)
    return run.report, run.products


def write_sweep_csv(path, rows: list[ReconReport]) -> None:
    cols = ["scene", "engine", "alpha", "seed", "delta_v_raw", "delta_v_filtered",
            "norm_f_over_3pi", "delta_psi_abs_over_pi"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            d = r.to_dict()
            w.writerow([d[c] for c in cols])
