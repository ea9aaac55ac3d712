"""Cylindrical functions of integer order and real positive argument.

Values for x < 250 come from ``scipy.special`` (AMOS / Cephes). For
x >= 250 (above the largest supported order) orders 0 and 1 come
from the Hankel asymptotic expansion and higher orders from the upward
recurrence, which is stable for both J and Y while n < x. AMOS loses up to
three digits there for orders above ~100. The expansion's phase is formed by
rotating the correctly rounded cos(x), sin(x), so no digits are lost in
x - const. Everything broadcasts over numpy arrays.
"""

from __future__ import annotations

import numpy as np
from scipy import special

ORDER_MAX = 200
ARG_MAX = 1.0e4
ASYM_X = 250.0
_ASYM_TERMS = 80

__all__ = [
    "ORDER_MAX",
    "ARG_MAX",
    "ASYM_X",
    "SpecialFunctionDomainError",
    "bessel_j",
    "bessel_y",
    "hankel1",
    "dfun",
]


class SpecialFunctionDomainError(ValueError):
    """Order or argument outside the supported range."""


def _check(n, x):
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.equal(np.mod(n, 1), 0)):
            raise SpecialFunctionDomainError("order must be an integer")
        n = n.astype(int)
    if np.any(np.abs(n) > ORDER_MAX):
        raise SpecialFunctionDomainError(f"|order| > {ORDER_MAX}")
    if np.any(~np.isfinite(x)) or np.any(x <= 0.0) or np.any(x > ARG_MAX):
        raise SpecialFunctionDomainError(f"argument must lie in (0, {ARG_MAX:g}]")
    return n, x


def _asymptotic(m, x):
    """(J_m, Y_m) from the large-argument Hankel expansion, m >= 0."""
    mu = 4.0 * m.astype(float) ** 2
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    t = np.ones_like(x)
    for k in range(1, _ASYM_TERMS):
        t = t * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if k % 2:
            Q = Q + (-1) ** ((k - 1) // 2) * t
        else:
            P = P + (-1) ** (k // 2) * t
    # chi = x - (m/2 + 1/4) pi, without rounding x - const
    c = np.mod(m, 4) * (np.pi / 2) + np.pi / 4
    cx, sx = np.cos(x), np.sin(x)
    cc, sc = np.cos(c), np.sin(c)
    cchi = cx * cc + sx * sc
    schi = sx * cc - cx * sc
    a = np.sqrt(2.0 / (np.pi * x))
    return a * (P * cchi - Q * schi), a * (P * schi + Q * cchi)


def _hankel_near(m, x):
    # assembled from parts so an overflowed Y gives -inf, not nan
    out = np.empty(np.shape(x), dtype=complex)
    out.real = special.jv(m, x)
    out.imag = special.yv(m, x)
    return out


def _far_zone(m, x):
    j0, y0 = _asymptotic(np.zeros_like(m), x)
    j1, y1 = _asymptotic(np.ones_like(m), x)
    h_prev, h = j0 + 1j * y0, j1 + 1j * y1
    out = np.where(m == 0, h_prev, h)
    for k in range(1, int(m.max(initial=0))):
        h_prev, h = h, (2.0 * k / x) * h - h_prev
        out = np.where(m == k + 1, h, out)
    return out.real, out.imag


def _eval(kind, n, x):
    # f_{-n} = (-1)^n f_n, applied explicitly so the identity is exact
    n, x = np.broadcast_arrays(n, x)
    m = np.abs(n)
    far = x >= ASYM_X
    base = {"J": special.jv, "Y": special.yv, "H1": _hankel_near}[kind]
    val = base(m, x)
    if np.any(far):
        val = np.array(val, dtype=complex if kind == "H1" else float)
        j, y = _far_zone(m[far], x[far])
        val[far] = {"J": j, "Y": y, "H1": j + 1j * y}[kind]
    out = np.where((n < 0) & (m % 2 == 1), -val, val)
    return out[()] if out.ndim == 0 else out


def bessel_j(n, x):
    """Bessel function of the first kind J_n(x)."""
    n, x = _check(n, x)
    return _eval("J", n, x)


def bessel_y(n, x):
    """Neumann function Y_n(x).

    Diverges to -inf as x -> 0+; for large orders at small x the value
    overflows and is returned as -inf (or +inf for odd negative orders).
    """
    n, x = _check(n, x)
    return _eval("Y", n, x)


def hankel1(n, x):
    """Hankel function of the first kind, J_n(x) + i Y_n(x)."""
    n, x = _check(n, x)
    return _eval("H1", n, x)


_KINDS = {"J": bessel_j, "Y": bessel_y, "H1": hankel1}


def dfun(kind: str, n, x):
    """Derivative d/dx of J_n, Y_n or H1_n via f'_n = (f_{n-1} - f_{n+1}) / 2."""
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise ValueError(f"kind must be one of {sorted(_KINDS)}") from None
    n, x = _check(n, x)
    if np.any(np.abs(n) + 1 > ORDER_MAX):
        raise SpecialFunctionDomainError(f"derivative needs order up to {ORDER_MAX}")
    return 0.5 * (fn(n - 1, x) - fn(n + 1, x))
