"""Experiment geometry: background medium, transducer ring, grid and cylinders.

Lengths are in length-sampling units (l.s.u.), the grid unit; the background
wavelength is 8 l.s.u. for every preset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import j1

__all__ = [
    "Medium",
    "CylinderSpec",
    "TransducerArray",
    "GridSpec",
    "ScalarField",
    "Scene",
    "SceneError",
    "PRESETS",
    "preset",
    "load_scene",
    "epsilon_from_speed_contrast",
    "speed_contrast_from_epsilon",
    "scatterer_field",
    "filtered_truth",
    "phase_shift_cylinder",
    "phase_shift_integral",
    "epsilon_field",
    "ewald_mask",
    "TRUTH_SUPERSAMPLE",
]

# sub-cells per axis used for the area-weighted reference scatterer
TRUTH_SUPERSAMPLE = 16


class SceneError(ValueError):
    """Invalid or inconsistent scene description."""


@dataclass(frozen=True)
class Medium:
    lambda0: float = 8.0
    c0: float = 1500.0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise SceneError("lambda0 must be positive")

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.lambda0

    @property
    def omega(self) -> float:
        return self.k0 * self.c0


@dataclass(frozen=True)
class CylinderSpec:
    center: tuple[float, float]
    radius: float
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.radius > 0:
            raise SceneError("cylinder radius must be positive")
        if not self.epsilon > 0:
            raise SceneError("epsilon must be positive")

    @property
    def offset(self) -> float:
        return math.hypot(*self.center)

    def k_inside(self, medium: Medium) -> float:
        return medium.k0 * math.sqrt(self.epsilon)

    def contrast(self, medium: Medium) -> float:
        """Scatterer-function value k0^2 (1 - epsilon) inside the cylinder."""
        return medium.k0**2 * (1.0 - self.epsilon)


@dataclass(frozen=True)
class TransducerArray:
    count: int = 40
    radius: float = 56.0

    def __post_init__(self):
        if self.count < 4:
            raise SceneError("need at least 4 transducers")
        if not self.radius > 0:
            raise SceneError("array radius must be positive")

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.count) / self.count

    @property
    def positions(self) -> np.ndarray:
        a = self.angles
        return self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)


@dataclass(frozen=True)
class GridSpec:
    """Square grid ``x_i = -half_extent + i * step``, i = 0..n-1.

    With an even ``n`` the region center falls on sample ``n // 2``.
    """

    step: float = 1.0
    half_extent: float = 64.0

    def __post_init__(self):
        if not (self.step > 0 and self.half_extent > 0):
            raise SceneError("grid step and half_extent must be positive")
        ratio = 2.0 * self.half_extent / self.step
        if abs(ratio - round(ratio)) > 1e-9:
            raise SceneError("2*half_extent must be a multiple of step")

    @property
    def n(self) -> int:
        return int(round(2.0 * self.half_extent / self.step))

    @property
    def axis(self) -> np.ndarray:
        return -self.half_extent + self.step * np.arange(self.n)

    @property
    def center_index(self) -> int:
        return self.n // 2

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays indexed [iy, ix]."""
        return np.meshgrid(self.axis, self.axis, indexing="xy")

    def points(self) -> np.ndarray:
        X, Y = self.mesh()
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular spatial frequencies (KX, KY) in FFT order, indexed [iy, ix]."""
        q = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.step)
        return np.meshgrid(q, q, indexing="xy")

    def disc_mask(self, radius: float) -> np.ndarray:
        X, Y = self.mesh()
        return np.hypot(X, Y) <= radius


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    flagged: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise SceneError(f"field shape {self.values.shape} does not match grid {self.grid.n}")

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, a):
        return ScalarField(self.grid, self.values * a)

    __rmul__ = __mul__

    def cross_section(self) -> tuple[np.ndarray, np.ndarray]:
        """The y = 0 row as (x, values)."""
        return self.grid.axis, self.values[self.grid.center_index].copy()


def _vals(other):
    return other.values if isinstance(other, ScalarField) else other


@dataclass(frozen=True)
class Scene:
    medium: Medium = field(default_factory=Medium)
    array: TransducerArray = field(default_factory=TransducerArray)
    grid: GridSpec = field(default_factory=GridSpec)
    cylinders: tuple[CylinderSpec, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "cylinders", tuple(self.cylinders))
        if self.grid.half_extent < self.array.radius:
            raise SceneError("grid must cover the transducer disc")
        for c in self.cylinders:
            if c.offset + c.radius >= self.array.radius:
                raise SceneError("cylinder must lie strictly inside the transducer circle")
        _check_disjoint(self.cylinders)

    @property
    def cylinder(self) -> CylinderSpec:
        if len(self.cylinders) != 1:
            raise SceneError("forward solver handles exactly one cylinder")
        return self.cylinders[0]

    def with_epsilon(self, eps: float) -> "Scene":
        return replace(self, cylinders=tuple(replace(c, epsilon=eps) for c in self.cylinders))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lambda0_lsu": self.medium.lambda0,
            "c0_mps": self.medium.c0,
            "array": {"count": self.array.count, "radius_lsu": self.array.radius},
            "grid": {"step_lsu": self.grid.step, "half_extent_lsu": self.grid.half_extent},
            "cylinders": [
                {"cx": c.center[0], "cy": c.center[1], "r0_lsu": c.radius, "epsilon": c.epsilon}
                for c in self.cylinders
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            medium = Medium(float(d["lambda0_lsu"]), float(d.get("c0_mps", 1500.0)))
            arr = d["array"]
            array = TransducerArray(int(arr["count"]), float(arr["radius_lsu"]))
            g = d.get("grid", {})
            grid = GridSpec(float(g.get("step_lsu", 1.0)), float(g.get("half_extent_lsu", 64.0)))
            cyls = tuple(
                CylinderSpec((float(c["cx"]), float(c["cy"])), float(c["r0_lsu"]), float(c["epsilon"]))
                for c in d["cylinders"]
            )
        except (KeyError, TypeError) as exc:
            raise SceneError(f"malformed scene document: {exc}") from exc
        return cls(medium, array, grid, cyls, str(d.get("name", "custom")))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def load_scene(path) -> Scene:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: not valid JSON ({exc})") from exc
    return Scene.from_dict(doc)


def _check_disjoint(cyls) -> None:
    for i, a in enumerate(cyls):
        for b in cyls[i + 1:]:
            d = math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
            if d < a.radius + b.radius:
                raise SceneError("cylinders overlap")


def epsilon_from_speed_contrast(dc):
    """'Dielectric' contrast (1 + dc)^-2 for relative sound-speed deviation dc."""
    dc = np.asarray(dc, dtype=float)
    if np.any(dc <= -1.0):
        raise SceneError("speed contrast must exceed -1")
    out = (1.0 + dc) ** -2
    return float(out) if out.ndim == 0 else out


def speed_contrast_from_epsilon(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0.0):
        raise SceneError("epsilon must be positive")
    out = 1.0 / np.sqrt(eps) - 1.0
    return float(out) if out.ndim == 0 else out


def phase_shift_cylinder(cyl: CylinderSpec, medium: Medium) -> float:
    """Extra phase along a diameter, 2 R0 (k0 - k); negative when focusing."""
    return 2.0 * cyl.radius * medium.k0 * (1.0 - math.sqrt(cyl.epsilon))


def epsilon_field(cylinders, medium: Medium | None = None):
    """Return eps(points) as a vectorized callable, 1 outside all cylinders."""

    def eps(points):
        p = np.asarray(points, dtype=float)
        out = np.ones(p.shape[:-1])
        for c in cylinders:
            inside = np.hypot(p[..., 0] - c.center[0], p[..., 1] - c.center[1]) <= c.radius
            out[inside] = c.epsilon
        return out

    return eps


def phase_shift_integral(eps, start, end, k0: float, step: float) -> float:
    """Trapezoid quadrature of k0 * (1 - sqrt(eps)) along a straight chord."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.hypot(*(end - start)))
    n = max(int(math.ceil(length / step)), 1)
    t = np.linspace(0.0, 1.0, n + 1)
    pts = start[None, :] + t[:, None] * (end - start)[None, :]
    vals = 1.0 - np.sqrt(eps(pts))
    return float(k0 * np.trapezoid(vals, dx=length / n))


def scatterer_field(grid: GridSpec, cylinders, medium: Medium, supersample: int = 1) -> ScalarField:
    """Sample v = k0^2 (1 - eps) on the grid.

    ``supersample=1`` marks a cell as inside iff its center is inside. Larger
    values average an ``s x s`` sub-grid per cell, i.e. area-weighted cells.
    """
    _check_disjoint(tuple(cylinders))
    X, Y = grid.mesh()
    vals = np.zeros(X.shape)
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    for c in cylinders:
        cover = np.zeros(X.shape)
        for dx in offs:
            for dy in offs:
                cover += np.hypot(X + dx * grid.step - c.center[0], Y + dy * grid.step - c.center[1]) <= c.radius
        vals += c.contrast(medium) * cover / supersample**2
    return ScalarField(grid, vals)


def ewald_mask(grid: GridSpec, medium: Medium) -> np.ndarray:
    """Spectral samples with |q| <= 2 k0 (FFT order); boundary samples included."""
    KX, KY = grid.wavenumbers()
    return np.hypot(KX, KY) <= 2.0 * medium.k0 * (1.0 + 1e-9)


def filtered_truth(grid: GridSpec, cylinders, medium: Medium) -> ScalarField:
    """Exact 2k0 low-pass of the continuous cylinders, sampled on the grid.

    Uses the closed-form disc transform 2 pi R0 J1(q R0) / q, so no
    rasterization error enters the band that monochromatic data can reach.
    """
    KX, KY = grid.wavenumbers()
    q = np.hypot(KX, KY)
    band = ewald_mask(grid, medium)
    spec = np.zeros(q.shape, dtype=complex)
    x0 = grid.axis[0]
    for c in cylinders:
        qs = np.where(q > 0, q, 1.0)
        disc = np.where(q > 0, 2.0 * np.pi * c.radius * j1(q * c.radius) / qs, np.pi * c.radius**2)
        # phase shifts the disc center relative to sample (0, 0) of the grid
        shift = np.exp(-1j * (KX * (c.center[0] - x0) + KY * (c.center[1] - x0)))
        spec += c.contrast(medium) * disc * shift
    vals = np.fft.ifft2(spec * band) / grid.step**2
    return ScalarField(grid, vals)


def _radius_for_phase(dpsi_over_pi: float, eps: float, medium: Medium) -> float:
    return abs(dpsi_over_pi * math.pi / (2.0 * medium.k0 * (1.0 - math.sqrt(eps))))


def _make_preset(name: str, eps: float, radius: float) -> Scene:
    medium = Medium()
    return Scene(
        medium=medium,
        array=TransducerArray(40, 7.0 * medium.lambda0),
        grid=GridSpec(1.0, 64.0),
        cylinders=(CylinderSpec((medium.lambda0 / 2.0, 0.0), radius, eps),),
        name=name,
    )


_M = Medium()
# radii solved from the quoted phase shifts (0.94 pi, 1.3 pi, 3.8 pi); the
# fig2 radius 2R0 = 1.875 l.s.u. gives exactly 0.9375 pi
_FIG2_R0 = 0.9375
_PRESET_ARGS = {
    "fig2": (9.0, _FIG2_R0),
    "fig3": (epsilon_from_speed_contrast(39.0), _radius_for_phase(1.3, epsilon_from_speed_contrast(39.0), _M)),
    "fig4": (0.2, _radius_for_phase(3.8, 0.2, _M)),
    "eps2": (2.0, _FIG2_R0),
    "eps5": (5.0, _FIG2_R0),
    "eps8": (8.0, _FIG2_R0),
}
PRESETS = tuple(_PRESET_ARGS)


def preset(name: str) -> Scene:
    try:
        eps, r0 = _PRESET_ARGS[name]
    except KeyError:
        raise SceneError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return _make_preset(name, eps, r0)
