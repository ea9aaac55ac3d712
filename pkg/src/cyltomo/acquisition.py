"""Synthetic transducer-pair datasets, rms level and additive Gaussian noise."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .forward import green_free, green_scattered, partial_wave_coeffs
from .scene import Scene

__all__ = [
    "FORMAT_VERSION",
    "RNG_ALGORITHM",
    "DatasetError",
    "ScatteringMatrix",
    "NoiseSpec",
    "acquire",
    "rms_scattered",
    "add_noise",
    "write_complex_matrix",
    "read_complex_matrix",
]

FORMAT_VERSION = 1
RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(seed)"
KINDS = ("total", "free", "scattered")


class DatasetError(ValueError):
    """Malformed dataset file or manifest."""


@dataclass(frozen=True)
class NoiseSpec:
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class ScatteringMatrix:
    """Field matrix indexed [receiver, source].

    ``valid`` marks entries that carry data; the singular free-field self
    pairs are invalid (stored as NaN) in the free and total matrices.
    """

    entries: np.ndarray
    kind: str
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise DatasetError("scattering matrix must be square")
        if self.kind not in KINDS:
            raise DatasetError(f"kind must be one of {KINDS}")

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.entries)

    def save(self, path) -> None:
        path = Path(path)
        write_complex_matrix(path, self.entries)
        doc = {"kind": self.kind, "N": self.N, "format_version": FORMAT_VERSION, **self.manifest}
        path.with_suffix(".json").write_text(json.dumps(doc, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ScatteringMatrix":
        path = Path(path)
        try:
            doc = json.loads(path.with_suffix(".json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read manifest for {path}: {exc}") from exc
        if doc.get("format_version") != FORMAT_VERSION:
            raise DatasetError("unsupported format_version")
        N = int(doc["N"])
        entries = read_complex_matrix(path, N)
        manifest = {k: v for k, v in doc.items() if k not in ("kind", "N", "format_version")}
        return cls(entries, doc["kind"], manifest)

    def to_csv(self, path) -> None:
        i, j = np.indices(self.entries.shape)
        rows = np.column_stack([i.ravel(), j.ravel(), self.entries.real.ravel(), self.entries.imag.ravel()])
        np.savetxt(path, rows, fmt=["%d", "%d", "%.17g", "%.17g"], delimiter=",",
                   header="receiver,source,re,im", comments="")


def write_complex_matrix(path, values: np.ndarray) -> None:
    """Raw little-endian float64 (re, im) pairs, row-major, no header."""
    v = np.ascontiguousarray(values, dtype=complex)
    Path(path).write_bytes(v.astype("<c16").tobytes())


def read_complex_matrix(path, n: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) != 16 * n * n:
        raise DatasetError(f"{path}: expected {16 * n * n} bytes, found {len(raw)}")
    return np.frombuffer(raw, dtype="<c16").reshape(n, n).astype(complex)


def acquire(scene: Scene) -> dict[str, ScatteringMatrix]:
    """Free, total and scattered matrices for every transducer pair."""
    pos = scene.array.positions
    coeffs = partial_wave_coeffs(scene.cylinder, scene.medium)
    gsc = green_scattered(pos, pos, scene, coeffs)
    N = len(pos)
    off = ~np.eye(N, dtype=bool)
    g0 = np.full((N, N), np.nan + 0j)
    i, j = np.nonzero(off)
    g0[i, j] = green_free(pos[i], pos[j], scene.medium)
    base = {"scene": scene.to_dict(), "seed": None, "alpha": 0.0}
    return {
        "free": ScatteringMatrix(g0, "free", dict(base)),
        "total": ScatteringMatrix(g0 + gsc, "total", dict(base)),
        "scattered": ScatteringMatrix(gsc, "scattered", dict(base)),
    }


def rms_scattered(m: ScatteringMatrix) -> float:
    """sqrt(mean |G_sc|^2) over all N^2 pairs."""
    if m.kind != "scattered":
        raise DatasetError("rms is defined for scattered-field matrices")
    return float(np.sqrt(np.mean(np.abs(m.entries) ** 2)))


def add_noise(m: ScatteringMatrix, spec: NoiseSpec) -> ScatteringMatrix:
    """Add complex Gaussian noise with per-part sigma = alpha * rms(G_sc).

    Draws are (re, im) pairs in row-major entry order, so results do not
    depend on how the matrix was produced.
    """
    if m.kind != "scattered":
        raise DatasetError("noise is injected into scattered-field matrices")
    manifest = dict(m.manifest, seed=int(spec.seed), alpha=float(spec.alpha),
                    rng=RNG_ALGORITHM, noise_sigma="per part (re and im each alpha * rms)")
    if spec.alpha == 0:
        return replace(m, entries=m.entries.copy(), manifest=manifest)
    sigma = spec.alpha * rms_scattered(m)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(spec.seed))))
    draws = rng.standard_normal((m.N, m.N, 2))
    noise = sigma * (draws[..., 0] + 1j * draws[..., 1])
    return ScatteringMatrix(m.entries + noise, "scattered", manifest)
