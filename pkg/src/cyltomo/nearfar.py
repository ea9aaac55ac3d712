"""Near-field matrix on the transducer ring to plane-wave scattering amplitude.

Both indices of G_sc are expanded in angular harmonics; dividing out the
outgoing radial factors at the ring radius leaves the T-matrix, which maps to
plane-wave directions through the Jacobi-Anger phases i^{n - m}.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import specfun
from .acquisition import FORMAT_VERSION, DatasetError, ScatteringMatrix, read_complex_matrix, write_complex_matrix
from .forward import CANONICAL_CF, Amplitude
from .scene import Medium, TransducerArray

__all__ = [
    "AliasingError",
    "Amplitude",
    "harmonic_limit",
    "to_amplitude",
    "from_tmatrix",
    "tmatrix_to_field",
    "amplitude_norm",
    "resample",
    "save_amplitude",
    "load_amplitude",
]


class AliasingError(ValueError):
    """Ring sampling too coarse for the scatterer's angular bandwidth."""


def save_amplitude(f: Amplitude, path) -> None:
    path = Path(path)
    write_complex_matrix(path, f.values)
    doc = {
        "kind": "amplitude",
        "N": f.M,
        "format_version": FORMAT_VERSION,
        "convention": {"c_f": [f.c_f.real, f.c_f.imag]},
        "norm_over_3pi": amplitude_norm(f)[1],
    }
    path.with_suffix(".json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_amplitude(path) -> Amplitude:
    path = Path(path)
    try:
        doc = json.loads(path.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read manifest for {path}: {exc}") from exc
    if doc.get("kind") != "amplitude" or doc.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"{path}: not an amplitude file")
    M = int(doc["N"])
    cf = complex(*doc["convention"]["c_f"])
    return Amplitude(2 * np.pi * np.arange(M) / M, read_complex_matrix(path, M), cf)


def harmonic_limit(N: int) -> int:
    return N // 2 - 1


def _orders(N: int) -> np.ndarray:
    L = harmonic_limit(N)
    return np.arange(-L, L + 1)


def to_amplitude(scattered: ScatteringMatrix, array: TransducerArray, medium: Medium,
                 c_f: complex = CANONICAL_CF, scatterer_extent: float | None = None) -> Amplitude:
    """Convert G_sc[receiver, source] on the ring to f(phi, phi').

    ``scatterer_extent`` is the radius about the ring center enclosing the
    scatterer; when given, the anti-aliasing bound k0 * extent <= N/2 - 4 is
    enforced.
    """
    g = scattered.entries
    N = array.count
    if g.shape != (N, N):
        raise DatasetError("matrix size does not match the array")
    if scattered.kind != "scattered":
        raise DatasetError("conversion needs the scattered field")
    if not np.all(np.isfinite(g)):
        raise DatasetError("scattered matrix has non-finite entries")
    if scatterer_extent is not None and medium.k0 * scatterer_extent > N / 2 - 4:
        raise AliasingError(f"k0 * extent = {medium.k0 * scatterer_extent:.2f} exceeds N/2 - 4 = {N / 2 - 4}")
    theta = array.angles
    n = _orders(N)
    E = np.exp(-1j * np.outer(n, theta))
    # ghat[m, n] = N^-2 sum_ij g[i, j] e^{-i m theta_i} e^{+i n theta_j}
    ghat = E @ g @ E.conj().T / N**2
    H = specfun.hankel1(n, medium.k0 * array.radius)
    if not np.all(np.isfinite(H)) or np.any(H == 0):
        raise DatasetError("radial factor not representable for retained harmonics")
    T = 4j * ghat / np.outer(H, H)
    return from_tmatrix(T, N, c_f)


def from_tmatrix(T: np.ndarray, M: int, c_f: complex = CANONICAL_CF) -> Amplitude:
    """Evaluate f = C_f sum_{m,n} T[m, n] i^{n-m} e^{i m phi'} e^{-i n phi} on M angles."""
    L = (T.shape[0] - 1) // 2
    n = np.arange(-L, L + 1)
    phi = 2 * np.pi * np.arange(M) / M
    W = T * (1j ** (n[None, :] - n[:, None]))
    Eout = np.exp(1j * np.outer(phi, n))   # [j, m]
    Ein = np.exp(-1j * np.outer(phi, n))   # [i, n]
    f = Ein @ W.T @ Eout.T
    return Amplitude(phi, c_f * f, c_f)


def _tmatrix(f: Amplitude, L: int) -> np.ndarray:
    M = f.M
    n = np.arange(-L, L + 1)
    Ein = np.exp(-1j * np.outer(f.angles, n))
    Eout = np.exp(1j * np.outer(f.angles, n))
    # inverse of from_tmatrix restricted to |m|, |n| <= L
    W = (Eout.conj().T @ f.values.T @ Ein.conj()) / M**2
    return W / (1j ** (n[None, :] - n[:, None])) / f.c_f


def tmatrix_to_field(T: np.ndarray, array: TransducerArray, medium: Medium) -> np.ndarray:
    """Synthesize G_sc on the ring from a T-matrix (inverse of the conversion)."""
    L = (T.shape[0] - 1) // 2
    n = np.arange(-L, L + 1)
    H = specfun.hankel1(n, medium.k0 * array.radius)
    ghat = T * np.outer(H, H) / 4j
    E = np.exp(1j * np.outer(array.angles, n))
    return E @ ghat @ E.conj().T


def resample(f: Amplitude, M: int) -> Amplitude:
    """Trigonometric interpolation onto M angles using the retained harmonics."""
    L = harmonic_limit(f.M)
    if M < 2 * L + 1:
        raise ValueError(f"M must be at least {2 * L + 1}")
    return from_tmatrix(_tmatrix(f, L), M, f.c_f)


def amplitude_norm(f: Amplitude) -> tuple[float, float]:
    """(||f||, 3 pi ||f||) with the rectangle rule on the angle grid."""
    w = 2 * np.pi / f.M
    raw = float(w * np.sqrt(np.sum(np.abs(f.values) ** 2)))
    return raw, 3 * np.pi * raw
