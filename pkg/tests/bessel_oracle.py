"""Multiprecision Bessel oracle built from series and recurrences only.

J_n comes from Miller's backward recurrence normalized with
J_0 + 2 sum J_2k = 1, or from the ascending series for small x.
Y_0 uses the Neumann expansion in even-order J, Y_1 the Wronskian, and
Y_n the (stable) forward recurrence. Nothing here calls a library Bessel
routine, so it is independent of the code under test.
"""

from __future__ import annotations

import mpmath as mp

DPS = 40


def _series_j(n: int, x) -> mp.mpf:
    half = x / 2
    term = half**n / mp.factorial(n)
    total = term
    k = 0
    q = -(half**2)
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) < mp.mpf(10) ** (-DPS - 5) * max(abs(total), mp.mpf(10) ** (-300)):
            return total


def _miller(nmax: int, x) -> list:
    """Return [J_0 .. J_nmax](x) by downward recurrence."""
    start = int(max(nmax, float(x)) + 60 + 25 * float(x) ** (1 / 3)) // 2 * 2
    vals = [mp.mpf(0)] * (start + 2)
    vals[start] = mp.mpf(10) ** -30
    for k in range(start, 0, -1):
        vals[k - 1] = 2 * k / x * vals[k] - vals[k + 1]
    norm = vals[0] + 2 * mp.fsum(vals[2:start + 1:2])
    return [v / norm for v in vals[:nmax + 2]]


def j_list(nmax: int, x: float) -> list:
    with mp.workdps(DPS):
        x = mp.mpf(x)
        return _miller(nmax, x)


def j(n: int, x: float) -> mp.mpf:
    sign = -1 if (n < 0 and n % 2) else 1
    n = abs(n)
    with mp.workdps(DPS):
        xm = mp.mpf(x)
        if x <= 8:
            # series is fully accurate here and needs only modest precision
            with mp.workdps(DPS + 20):
                return sign * _series_j(n, xm)
        return sign * _miller(n, xm)[n]


def y_list(nmax: int, x: float) -> list:
    with mp.workdps(DPS):
        xm = mp.mpf(x)
        js = _miller(max(nmax, 1) + int(float(x) + 30 * float(x) ** (1 / 3)) + 60, xm)
        # Neumann: Y_0 = (2/pi)(ln(x/2) + gamma) J_0 - (4/pi) sum (-1)^k J_2k / k
        s = mp.fsum((-1) ** k * js[2 * k] / k for k in range(1, len(js) // 2))
        y0 = 2 / mp.pi * (mp.log(xm / 2) + mp.euler) * js[0] - 4 / mp.pi * s
        # Wronskian J_1 Y_0 - J_0 Y_1 = 2 / (pi x)
        y1 = (js[1] * y0 - 2 / (mp.pi * xm)) / js[0]
        ys = [y0, y1]
        for k in range(1, nmax):
            ys.append(2 * k / xm * ys[k] - ys[k - 1])
        return ys[:nmax + 1]


def y(n: int, x: float) -> mp.mpf:
    sign = -1 if (n < 0 and n % 2) else 1
    return sign * y_list(abs(n), x)[abs(n)]
