"""Score vectors, l^p Fisher information and p-Stam deficits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import omega
from .errors import DegreeMismatch, RepeatedRoots
from .realroot import DOUBLE, PrecisionContext, as_root_config
from .reference import hermite_roots

HERMITE_ETA = 2.0 ** -0.5


@dataclass(frozen=True)
class DeficitReport:
    p: float
    g_p: float
    A_p: float
    rho_p: float
    phi_f: float
    phi_g: float
    phi_conv: float


def _lane_roots(r, ctx: PrecisionContext | None):
    r = as_root_config(r)
    if ctx is None:
        return r.roots
    return ctx.convert(r.roots)


def _is_mp(x: np.ndarray) -> bool:
    return x.dtype == object


def score_vector(r, ctx: PrecisionContext | None = None) -> np.ndarray:
    """s_i = sum_{j != i} 1 / (r_i - r_j).

    Raises :class:`RepeatedRoots` when two roots are closer than 1e-12 times
    the configuration scale.
    """
    x = _lane_roots(r, ctx)
    n = x.size
    if not _is_mp(x):
        if n > 1:
            gap = float(np.min(np.diff(x)))
            if gap < 1e-12 * max(1.0, float(np.max(np.abs(x)))):
                raise RepeatedRoots(f"minimum root gap {gap:.3g} is below 1e-12 x scale")
        diff = x[:, None] - x[None, :]
        np.fill_diagonal(diff, np.inf)
        return (1.0 / diff).sum(axis=1)
    scale = max(1.0, max(abs(float(v)) for v in x))
    if n > 1:
        gap = min(float(x[i + 1] - x[i]) for i in range(n - 1))
        if gap < 1e-12 * scale:
            raise RepeatedRoots(f"minimum root gap {gap:.3g} is below 1e-12 x scale")
    mp = x[0].context
    return np.array(
        [mp.fsum(1 / (x[i] - x[j]) for j in range(n) if j != i) for i in range(n)],
        dtype=object,
    )


def _abs_pow_sum(s: np.ndarray, p: float):
    if not _is_mp(s):
        return float(np.sum(np.abs(s) ** p))
    mp = s[0].context
    pp = mp.mpf(p)
    guard = mp.mpf(10) ** (-mp.dps)
    # exp(p log|x|) with a guard for entries that vanish by symmetry
    return mp.fsum(mp.exp(pp * mp.log(abs(v))) for v in s if abs(v) >= guard)


def phi_np(r, p: float, ctx: PrecisionContext | None = None):
    """Unnormalised l^p Fisher information ||s||_p^p."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return _abs_pow_sum(score_vector(r, ctx), p)


def phi_n_normalized(r, ctx: PrecisionContext | None = None):
    n = as_root_config(r).n
    return 4 * phi_np(r, 2.0, ctx) / (n * (n - 1) ** 2)


def phi_tilde(r, p: float, ctx: PrecisionContext | None = None):
    """(1/n) sum |2 s_i / (n-1)|^p, the search-time rescaling of phi_np."""
    n = as_root_config(r).n
    return (2.0 / (n - 1)) ** p / n * phi_np(r, p, ctx)


def reciprocal_information(phi, p: float):
    """Phi^(-1/(p-1))."""
    if isinstance(phi, float):
        return phi ** (-1.0 / (p - 1.0))
    mp = phi.context
    return mp.power(phi, -1 / (mp.mpf(p) - 1))


def stam_deficit(alpha, beta, p: float, ctx: PrecisionContext = DOUBLE) -> DeficitReport:
    """Additive and scale-free p-Stam deficits of the pair (alpha, beta)."""
    alpha, beta = as_root_config(alpha), as_root_config(beta)
    if alpha.n != beta.n:
        raise DegreeMismatch(f"degrees differ: {alpha.n} vs {beta.n}")
    gamma = omega(alpha, beta, ctx)
    phi_f = phi_np(alpha, p, ctx)
    phi_g = phi_np(beta, p, ctx)
    phi_c = phi_np(gamma, p, ctx)
    f_f = reciprocal_information(phi_f, p)
    f_g = reciprocal_information(phi_g, p)
    f_c = reciprocal_information(phi_c, p)
    A = f_f + f_g
    g = f_c - f_f - f_g
    return DeficitReport(
        p=float(p),
        g_p=float(g),
        A_p=float(A),
        rho_p=float(g / A),
        phi_f=float(phi_f),
        phi_g=float(phi_g),
        phi_conv=float(phi_c),
    )


def hermite_pair_deficit_closed_form(n: int, p: float, ctx: PrecisionContext = DOUBLE) -> float:
    """g_p(h, h) = ||s||_p^(-p/(p-1)) [(eta^p)^(-1/(p-1)) - 2] with eta = 2^(-1/2)."""
    if n < 2 or not p > 1:
        raise ValueError("need n >= 2 and p > 1")
    h = hermite_roots(n, ctx)
    if ctx.is_float:
        A = phi_np(h, p)
        # (eta^p)^(-1/(p-1)) = 2^(p/(2(p-1))), written so that p = 2 gives exactly 0
        return A ** (-1.0 / (p - 1)) * (2.0 ** (p / (2 * (p - 1))) - 2.0)
    mp = ctx.mp
    A = phi_np(h, p, ctx)
    pp = mp.mpf(p)
    expo = -1 / (pp - 1)
    return float(mp.power(A, expo) * (mp.power(2, pp / (2 * (pp - 1))) - 2))


def hermite_sign_threshold(p: float) -> float:
    """Contraction ratio at which g_p(h, h) changes sign: 2^(-1 + 1/p)."""
    return 2.0 ** (-1.0 + 1.0 / p)
