"""Root configurations, signed coefficient vectors and root finding.

Two arithmetic lanes share one API. A :class:`PrecisionContext` with
``digits <= 15`` selects plain float64/numpy arithmetic (the fast lane used by
the search loop); anything above that runs on a private ``mpmath`` context
owned by the :class:`PrecisionContext`, so no global precision state is
touched.

Coefficients follow the signed convention

    f(x) = sum_k (-1)^k a_k x^(n-k),   a_0 = 1,

so that ``a_k`` is the k-th elementary symmetric polynomial of the roots.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import mpmath
import numpy as np

from .errors import ConvergenceFailure, NonRealRoots

FLOAT_DIGITS = 15
DEFAULT_DIGITS = 30
DIGITS_ENV = "FFSTAM_DIGITS"


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision in decimal digits.

    ``newton_tol`` is the relative backward-error target used when polishing
    roots; it defaults to ``10**-(digits - 5)`` (``1e-10`` in the float lane).
    """

    digits: int = DEFAULT_DIGITS
    newton_tol: float | None = None
    max_iter: int = 200

    def __post_init__(self):
        if self.digits < FLOAT_DIGITS:
            raise ValueError(f"digits must be >= {FLOAT_DIGITS}, got {self.digits}")
        if self.newton_tol is None:
            object.__setattr__(self, "newton_tol", 10.0 ** -(self.digits - 5))
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    @classmethod
    def from_env(cls, default: int = DEFAULT_DIGITS) -> "PrecisionContext":
        return cls(digits=int(os.environ.get(DIGITS_ENV, default)))

    @property
    def is_float(self) -> bool:
        return self.digits <= FLOAT_DIGITS

    @cached_property
    def mp(self) -> mpmath.MPContext:
        ctx = mpmath.MPContext()
        ctx.dps = self.digits
        return ctx

    @property
    def real_tol(self) -> float:
        """Largest |Im| (relative to the root scale) still accepted as real."""
        return 10.0 ** (-self.digits / 2)

    def convert(self, values) -> np.ndarray:
        """Cast a sequence of numbers to this lane (float64 or mpf objects)."""
        if self.is_float:
            return np.array([float(v) for v in values], dtype=float)
        mpf = self.mp.mpf
        return np.array([_to_mpf(mpf, v) for v in values], dtype=object)


DOUBLE = PrecisionContext(digits=FLOAT_DIGITS)


def _to_mpf(mpf, v):
    if isinstance(v, mpmath.mpf):
        return mpf(v)
    if hasattr(v, "numerator") and hasattr(v, "denominator") and not isinstance(v, float):
        return mpf(int(v.numerator)) / int(v.denominator)
    return mpf(v)


@dataclass(frozen=True, eq=False)
class RootConfig:
    """Ascending real roots of a monic degree-n polynomial.

    Repeated roots are allowed here (``x**n`` is the convolution identity);
    consumers that need simple roots check the gaps themselves.
    """

    roots: np.ndarray

    def __post_init__(self):
        r = self.roots
        if not isinstance(r, np.ndarray):
            r = np.asarray(r)
        if r.dtype != object:
            r = r.astype(float)
            if not np.all(np.isfinite(r)):
                raise ValueError("root configuration has non-finite entries")
        if r.ndim != 1 or r.size < 1:
            raise ValueError("roots must be a non-empty 1-d sequence")
        if np.any(r[1:] < r[:-1]):
            raise ValueError("roots must be in ascending order")
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "roots", r)

    @classmethod
    def from_values(cls, values: Sequence) -> "RootConfig":
        """Sort arbitrary values into a configuration."""
        arr = np.asarray(values)
        if arr.dtype == object:
            return cls(np.array(sorted(arr), dtype=object))
        return cls(np.sort(arr.astype(float)))

    @property
    def n(self) -> int:
        return int(self.roots.size)

    def array(self) -> np.ndarray:
        """Float64 copy of the roots."""
        if self.roots.dtype != object:
            return self.roots.copy()
        return np.array([float(v) for v in self.roots], dtype=float)

    def __len__(self):
        return self.n

    def __repr__(self):
        vals = ", ".join(f"{float(v):.6g}" for v in self.roots)
        return f"RootConfig(n={self.n}, roots=[{vals}])"


@dataclass(frozen=True, eq=False)
class PolyCoeffs:
    """Signed coefficients (a_0, ..., a_n) with a_0 = 1."""

    a: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        a = self.a if isinstance(self.a, np.ndarray) else np.asarray(self.a)
        if a.dtype != object:
            a = a.astype(float)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("coefficient vector must have length n + 1 >= 2")
        if a[0] != 1:
            raise ValueError("polynomial must be monic (a[0] == 1)")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "n", int(a.size - 1))

    def standard(self) -> np.ndarray:
        """Coefficients in descending powers, i.e. (-1)^k a_k."""
        if self.a.dtype == object:
            return np.array([(-1) ** k * v for k, v in enumerate(self.a)], dtype=object)
        out = self.a.copy()
        out[1::2] *= -1
        return out


def as_root_config(r) -> RootConfig:
    return r if isinstance(r, RootConfig) else RootConfig.from_values(r)


def elementary_symmetric(values: Sequence, one=1) -> list:
    """[e_0, ..., e_n] of ``values`` by the product recurrence."""
    zero = one - one
    e = [one] + [zero] * len(values)
    for v in values:
        for k in range(len(values), 0, -1):
            e[k] = e[k] + e[k - 1] * v
    return e


def roots_to_coeffs(r, ctx: PrecisionContext = DOUBLE) -> PolyCoeffs:
    """Expand prod(x - r_i) into signed coefficients a_k = e_k(r)."""
    r = as_root_config(r)
    if ctx.is_float:
        a = np.zeros(r.n + 1)
        a[0] = 1.0
        for k, v in enumerate(r.roots.tolist(), start=1):
            a[1 : k + 1] += v * a[:k]
        return PolyCoeffs(a)
    vals = ctx.convert(r.roots)
    e = elementary_symmetric(list(vals), one=ctx.mp.mpf(1))
    return PolyCoeffs(np.array(e, dtype=object))


def _horner_pair(coeffs, z):
    """p(z) and p'(z) for descending coefficients; works on arrays and mp scalars."""
    p = coeffs[0] * 1
    dp = 0 * z
    for c in coeffs[1:]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _backward_scale(abs_coeffs, x):
    """sum_k |c_k| |x|^(n-k), the natural size of p(x)."""
    s = abs_coeffs[0] * 1
    for c in abs_coeffs[1:]:
        s = s * abs(x) + c
    return s


def _break_conjugacy(z: np.ndarray) -> np.ndarray:
    """Nudge starting points off exact conjugate symmetry.

    Aberth preserves conjugate pairs, so two close real roots reported as a
    conjugate pair could never split back onto the real axis.
    """
    scale = max(1.0, float(np.max(np.abs(z))))
    k = np.arange(z.size)
    return z + 1e-9 * scale * np.exp(1j * (0.7 + 2.1 * k))


def _aberth_float(std: np.ndarray, z: np.ndarray, max_iter: int) -> np.ndarray:
    n = z.size
    eye = np.eye(n, dtype=bool)
    scale = max(1.0, float(np.max(np.abs(z))))
    prev = np.inf
    for _ in range(max_iter):
        p, dp = _horner_pair(std, z)
        diff = z[:, None] - z[None, :]
        diff[eye] = 1.0
        inv = 1.0 / diff
        inv[eye] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            w = p / dp
            delta = w / (1.0 - w * inv.sum(axis=1))
        delta[~np.isfinite(delta)] = 0.0
        z = z - delta
        size = float(np.max(np.abs(delta)))
        # stop at roundoff level or once corrections stagnate
        if size <= 1e-14 * scale * n or size > 0.5 * prev:
            break
        prev = size
    return z


def _coeffs_to_roots_float(p: PolyCoeffs, ctx: PrecisionContext) -> RootConfig:
    std = p.standard().astype(float)
    if p.n == 1:
        return RootConfig(np.array([-std[1]]))
    z = np.roots(std).astype(complex)
    if np.any(z.imag != 0):
        # clustered roots come back as conjugate pairs; Aberth separates them
        z = _aberth_float(std, _break_conjugacy(z), min(ctx.max_iter, 30))
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.max(np.abs(z.imag)) > ctx.real_tol * scale:
        raise NonRealRoots(
            f"root with |Im| = {np.max(np.abs(z.imag)):.3g} exceeds tolerance "
            f"{ctx.real_tol * scale:.3g}"
        )
    x = np.sort(z.real)
    # one real Newton polish, then a backward-error check
    n = p.n
    dstd = std[:-1] * np.arange(n, 0, -1)
    V = np.vander(x, n + 1)
    f, df = V @ std, V[:, 1:] @ dstd
    df[df == 0] = np.inf
    x = np.sort(x - f / df)
    V = np.vander(x, n + 1)
    num, den = np.abs(V @ std), np.abs(V) @ np.abs(std)
    err = np.max(np.divide(num, den, out=np.zeros_like(num), where=den > 0))
    if err > ctx.newton_tol:
        raise ConvergenceFailure(f"backward error {err:.3g} above {ctx.newton_tol:.3g}")
    return RootConfig(x)


def _backward_ok(std, z, tol) -> bool:
    abs_std = [abs(c) for c in std]
    return all(
        abs(_horner_pair(std, zi)[0]) <= tol * _backward_scale(abs_std, zi) for zi in z
    )


def _coeffs_to_roots_mp(p: PolyCoeffs, ctx: PrecisionContext) -> RootConfig:
    mp = ctx.mp
    std = [mp.mpf(v) for v in ctx.convert(p.standard())]
    n = p.n
    if n == 1:
        return RootConfig(np.array([-std[1]], dtype=object))
    init = _break_conjugacy(np.roots(np.array([float(c) for c in std])))
    z = [mp.mpc(complex(v)) for v in init]
    scale = max(mp.mpf(1), max(abs(v) for v in z))
    target = mp.mpf(10) ** (-(ctx.digits - 3)) * scale
    bw_tol = mp.mpf(10) ** (-(ctx.digits - 3))
    prev = mp.inf
    for _ in range(ctx.max_iter):
        biggest = mp.zero
        new = list(z)
        for i in range(n):
            f, df = _horner_pair(std, z[i])
            if f == 0:
                continue
            w = f / df
            s = mp.fsum(1 / (z[i] - z[j]) for j in range(n) if j != i)
            delta = w / (1 - w * s)
            new[i] = z[i] - delta
            biggest = max(biggest, abs(delta))
        z = new
        # small steps or a stall (near-multiple roots have a conditioning floor)
        # only count once every root passes a relative backward-error test,
        # which also resolves roots far below the overall scale
        if biggest == 0 or (
            (biggest <= target or biggest > prev / 2) and _backward_ok(std, z, bw_tol)
        ):
            break
        prev = biggest
    else:
        raise ConvergenceFailure(f"Aberth iteration did not converge in {ctx.max_iter} steps")
    scale = max(mp.mpf(1), max(abs(v) for v in z))
    worst = max(abs(v.imag) for v in z)
    if worst > mp.mpf(ctx.real_tol) * scale:
        raise NonRealRoots(f"root with |Im| = {mp.nstr(worst, 3)} exceeds tolerance")
    x = sorted(v.real for v in z)
    abs_std = [abs(c) for c in std]
    for xi in x:
        f, _ = _horner_pair(std, xi)
        if abs(f) > mp.mpf(ctx.newton_tol) * _backward_scale(abs_std, xi):
            raise ConvergenceFailure("polished root fails the backward-error check")
    return RootConfig(np.array(x, dtype=object))


def coeffs_to_roots(p: PolyCoeffs, ctx: PrecisionContext = DOUBLE) -> RootConfig:
    """Sorted real roots of a real-rooted polynomial.

    Companion-matrix eigenvalues seed a simultaneous Aberth iteration run at the
    context's precision. Raises :class:`NonRealRoots` when an imaginary part
    survives polishing and :class:`ConvergenceFailure` when the iteration cap is
    hit or the backward error stays above ``ctx.newton_tol``.
    """
    if ctx.is_float:
        return _coeffs_to_roots_float(p, ctx)
    return _coeffs_to_roots_mp(p, ctx)
