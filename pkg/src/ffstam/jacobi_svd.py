"""One-sided (Hestenes) Jacobi SVD for float or mpmath matrices.

Plain nested lists are used instead of ``mpmath.matrix`` because element
access on the latter dominates the cost at a few hundred digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class JacobiSVD:
    """A = U diag(sigma) V^T with sigma descending.

    ``U`` is m x r and ``V`` is c x r as column lists (``U[k]`` is the k-th left
    singular vector), r = number of columns of A.
    """

    U: list
    sigma: list
    V: list
    sweeps: int


def _dot(x, y):
    return sum((a * b for a, b in zip(x, y)), x[0] * 0)


def jacobi_svd(rows: list[list], mp=None, max_sweeps: int = 80) -> JacobiSVD:
    """SVD of an m x c matrix given as a list of rows.

    ``mp`` is an ``mpmath`` context for multiprecision input; ``None`` means
    Python floats. Rotations are applied until every column pair is orthogonal
    to working precision.
    """
    m, c = len(rows), len(rows[0])
    sqrt = mp.sqrt if mp is not None else math.sqrt
    if mp is not None:
        eps = mp.mpf(10) ** (-mp.dps)
        one, zero = mp.one, mp.zero
    else:
        eps = 2.2e-16
        one, zero = 1.0, 0.0
    cols = [[rows[i][j] for i in range(m)] for j in range(c)]
    V = [[one if i == j else zero for i in range(c)] for j in range(c)]
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        rotated = False
        for i in range(c - 1):
            for j in range(i + 1, c):
                ai, aj = cols[i], cols[j]
                alpha = _dot(ai, ai)
                beta = _dot(aj, aj)
                gamma = _dot(ai, aj)
                if gamma == 0 or abs(gamma) <= eps * sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2 * gamma)
                sign = one if zeta >= 0 else -one
                t = sign / (abs(zeta) + sqrt(one + zeta * zeta))
                cs = one / sqrt(one + t * t)
                sn = cs * t
                cols[i] = [cs * x - sn * y for x, y in zip(ai, aj)]
                cols[j] = [sn * x + cs * y for x, y in zip(ai, aj)]
                vi, vj = V[i], V[j]
                V[i] = [cs * x - sn * y for x, y in zip(vi, vj)]
                V[j] = [sn * x + cs * y for x, y in zip(vi, vj)]
        if not rotated:
            break
    sigma = [sqrt(_dot(col, col)) for col in cols]
    order = sorted(range(c), key=lambda k: sigma[k], reverse=True)
    U = []
    for k in order:
        s = sigma[k]
        U.append([x / s for x in cols[k]] if s != 0 else [zero] * m)
    return JacobiSVD(U=U, sigma=[sigma[k] for k in order], V=[V[k] for k in order], sweeps=sweeps)
