"""Finite free additive convolution and its root map."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DegreeMismatch
from .realroot import (
    DOUBLE,
    PolyCoeffs,
    PrecisionContext,
    RootConfig,
    as_root_config,
    coeffs_to_roots,
    roots_to_coeffs,
)


@dataclass(frozen=True)
class ConvolutionResult:
    coeffs: PolyCoeffs
    gamma: RootConfig


@lru_cache(maxsize=None)
def boxplus_weights(n: int) -> tuple[tuple[Fraction, ...], ...]:
    """Exact weights w[i][j] = (n-i)!(n-j)! / (n! (n-i-j)!) for i + j <= n."""
    f = [math.factorial(k) for k in range(n + 1)]
    return tuple(
        tuple(Fraction(f[n - i] * f[n - j], f[n] * f[n - i - j]) for j in range(n + 1 - i))
        for i in range(n + 1)
    )


@lru_cache(maxsize=None)
def _float_weight_matrix(n: int) -> np.ndarray:
    w = np.zeros((n + 1, n + 1))
    for i, row in enumerate(boxplus_weights(n)):
        for j, val in enumerate(row):
            w[i, j] = float(val)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _antidiagonal_index(n: int) -> np.ndarray:
    i, j = np.indices((n + 1, n + 1))
    return (i + j).ravel()


def boxplus_coeffs(a: PolyCoeffs, b: PolyCoeffs) -> PolyCoeffs:
    """Coefficients c_k = sum_{i+j=k} w_ij a_i b_j of the convolution.

    Float inputs take a vectorised path; Fraction/int/mpf inputs go through the
    exact weights term by term, which keeps the result exactly symmetric in
    (a, b) for exact arithmetic.
    """
    if a.n != b.n:
        raise DegreeMismatch(f"degrees differ: {a.n} vs {b.n}")
    n = a.n
    if a.a.dtype != object and b.a.dtype != object:
        prod = np.outer(a.a, b.a) * _float_weight_matrix(n)
        # symmetrised so that swapping (a, b) is bit-for-bit identical
        prod = 0.5 * (prod + prod.T)
        c = np.bincount(_antidiagonal_index(n), weights=prod.ravel(), minlength=2 * n + 1)
        c = c[: n + 1]
        c[0] = 1.0
        return PolyCoeffs(c)
    w = boxplus_weights(n)
    sample = a.a[1] if a.a.dtype == object else b.a[1]
    cast = _weight_caster(sample)
    out = [a.a[0] * b.a[0]]
    for k in range(1, n + 1):
        terms = [cast(w[i][k - i]) * (a.a[i] * b.a[k - i]) for i in range(k + 1)]
        out.append(_exact_sum(terms))
    return PolyCoeffs(np.array(out, dtype=object))


def _weight_caster(sample):
    ctx = getattr(sample, "context", None)
    if ctx is not None and hasattr(ctx, "mpf"):
        return lambda q: ctx.mpf(q.numerator) / q.denominator
    return lambda q: q


def _exact_sum(terms):
    ctx = getattr(terms[0], "context", None)
    if ctx is not None and hasattr(ctx, "fsum"):
        return ctx.fsum(terms)
    return sum(terms[1:], terms[0])


def boxplus_permutation_average(alpha, beta) -> PolyCoeffs:
    """Brute-force (1/n!) sum over S_n of prod(x - alpha_i - beta_pi(i)).

    Exponential in n; kept as an independent oracle for small degrees.
    """
    alpha = list(as_root_config(alpha).roots)
    beta = list(as_root_config(beta).roots)
    if len(alpha) != len(beta):
        raise DegreeMismatch(f"degrees differ: {len(alpha)} vs {len(beta)}")
    n = len(alpha)
    exact = all(isinstance(v, (int, Fraction)) or float(v).is_integer() for v in alpha + beta)
    conv = (lambda v: Fraction(int(v))) if exact else (lambda v: v)
    alpha = [conv(v) for v in alpha]
    beta = [conv(v) for v in beta]
    total = [0] * (n + 1)
    count = 0
    for perm in itertools.permutations(range(n)):
        poly = [1]
        for i in range(n):
            root = alpha[i] + beta[perm[i]]
            poly = [x - root * y for x, y in zip(poly + [0], [0] + poly)]
        total = [t + c for t, c in zip(total, poly)]
        count += 1
    std = [t / count for t in total]
    a = [(-1) ** k * s for k, s in enumerate(std)]
    if exact:
        return PolyCoeffs(np.array(a, dtype=object))
    return PolyCoeffs(np.array([float(v) for v in a]))


def convolve(alpha, beta, ctx: PrecisionContext = DOUBLE) -> ConvolutionResult:
    alpha = as_root_config(alpha)
    beta = as_root_config(beta)
    if alpha.n != beta.n:
        raise DegreeMismatch(f"degrees differ: {alpha.n} vs {beta.n}")
    c = boxplus_coeffs(roots_to_coeffs(alpha, ctx), roots_to_coeffs(beta, ctx))
    return ConvolutionResult(coeffs=c, gamma=coeffs_to_roots(c, ctx))


def omega(alpha, beta, ctx: PrecisionContext = DOUBLE) -> RootConfig:
    """Root map (alpha, beta) -> gamma, the sorted roots of f boxplus_n g."""
    return convolve(alpha, beta, ctx).gamma
