"""Reference root configurations, shape normalisation and pair diagnostics.

The family library (Hermite, semicircle quantiles, uniform spacing, Jacobi
nodes and two-block uniform) is used by the structural screen; the distances
here all act on shape-normalised vectors (mean 0, unit mean square).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .errors import DegenerateConfig, InvalidFamilyParams
from .realroot import DOUBLE, PrecisionContext, RootConfig, as_root_config

JACOBI_PARAMS = ((0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (2.0, 2.0))
GAP_RATIO_BOUNDS = (0.5, 20.0)
SYMMETRY_THRESHOLDS = (0.05, 0.1, 0.2)


class Family(str, Enum):
    HERMITE = "Hermite"
    SEMICIRCLE = "SemicircleQuantiles"
    UNIFORM = "UniformSpacing"
    JACOBI = "Jacobi"
    TWO_BLOCK = "TwoBlockUniform"


@dataclass(frozen=True, eq=False)
class FamilyRef:
    """A normalised reference configuration.

    For ``TwoBlockUniform`` a ``gap_ratio`` of ``None`` means the ratio is
    fitted per sample when computing residuals; ``ref_roots`` then holds the
    configuration at ratio 1 (uniform spacing) as a placeholder.
    """

    family: Family
    n: int
    ref_roots: RootConfig
    a: float | None = None
    b: float | None = None
    gap_ratio: float | None = None

    @property
    def label(self) -> str:
        if self.family is Family.JACOBI:
            return f"Jacobi({self.a:g},{self.b:g})"
        if self.family is Family.TWO_BLOCK and self.gap_ratio is not None:
            return f"TwoBlockUniform({self.gap_ratio:g})"
        return self.family.value


@dataclass(frozen=True)
class PairDiagnostics:
    d_H_alpha: float
    d_H_beta: float
    D: float
    d_PQ: float


@dataclass(frozen=True)
class SymmetryFlags:
    """S1/S2 are per-polynomial (alpha, beta); S3/S4 are pair-level."""

    t: float
    s1: tuple[bool, bool]
    s2: tuple[bool, bool]
    s3: bool
    s4: bool


def _arr(r) -> np.ndarray:
    if isinstance(r, RootConfig):
        return r.array()
    return np.asarray(r, dtype=float)


def _hermite_value(n: int, x):
    """(He_n(x), He_{n-1}(x)) by the three-term recurrence."""
    p0, p1 = x * 0 + 1, x
    for k in range(1, n):
        p0, p1 = p1, x * p1 - k * p0
    return p1, p0


@lru_cache(maxsize=64)
def _hermite_roots_cached(n: int, digits: int) -> RootConfig:
    ctx = PrecisionContext(digits=digits)
    x0 = np.sort(np.polynomial.hermite_e.hermeroots([0] * n + [1]))
    if ctx.is_float:
        x = x0
        for _ in range(4):
            p, q = _hermite_value(n, x)
            x = x - p / (n * q)
        x = 0.5 * (x - x[::-1])
        return RootConfig(x / math.sqrt(n - 1))
    mp = ctx.mp
    x = [mp.mpf(v) for v in x0]
    tol = mp.mpf(10) ** (-(digits - 2))
    for _ in range(ctx.max_iter):
        new = []
        worst = mp.zero
        for xi in x:
            p, q = _hermite_value(n, xi)
            step = p / (n * q)
            new.append(xi - step)
            worst = max(worst, abs(step))
        x = new
        if worst <= tol * max(1, abs(x[-1])):
            break
    x = [(x[i] - x[n - 1 - i]) / 2 for i in range(n)]
    s = mp.sqrt(n - 1)
    return RootConfig(np.array([v / s for v in x], dtype=object))


def hermite_roots(n: int, ctx: PrecisionContext = DOUBLE) -> RootConfig:
    """Roots of He_n divided by sqrt(n - 1): mean 0, unit mean square."""
    if n < 2:
        raise ValueError("Hermite reference needs n >= 2")
    return _hermite_roots_cached(n, ctx.digits)


def normalize_shape(r) -> RootConfig:
    x = _arr(r)
    centred = x - x.mean()
    var = float(np.mean(centred**2))
    if var < 1e-24:
        raise DegenerateConfig("configuration has (numerically) zero variance")
    return RootConfig(np.sort(centred / math.sqrt(var)))


def hermite_distance(r) -> float:
    x = _arr(r)
    h = hermite_roots(x.size).array()
    return float(min(np.linalg.norm(x - h), np.linalg.norm(x - h[::-1])) / math.sqrt(x.size))


def pair_mismatch(alpha, beta) -> float:
    a, b = _arr(alpha), _arr(beta)
    return float(np.linalg.norm(a - b) / math.sqrt(a.size))


def pair_diagnostics(alpha, beta) -> PairDiagnostics:
    ha, hb = hermite_distance(alpha), hermite_distance(beta)
    return PairDiagnostics(ha, hb, ha**2 + hb**2, pair_mismatch(alpha, beta))


def semicircle_cdf(x: float) -> float:
    """CDF of the unit-variance semicircle law on [-2, 2]."""
    x = min(2.0, max(-2.0, x))
    return 0.5 + x * math.sqrt(4.0 - x * x) / (4 * math.pi) + math.asin(x / 2) / math.pi


def semicircle_quantiles(n: int) -> np.ndarray:
    out = np.empty(n)
    for i in range(n):
        target = (i + 0.5) / n
        out[i] = optimize.bisect(lambda x: semicircle_cdf(x) - target, -2.0, 2.0, xtol=1e-12)
    return out


def two_block_raw(n: int, gap_ratio: float, larger_first: bool = False) -> np.ndarray:
    """Two equispaced blocks of sizes floor(n/2), ceil(n/2) at unit spacing."""
    left, right = n // 2, n - n // 2
    if larger_first:
        left, right = right, left
    first = np.arange(left, dtype=float)
    second = first[-1] + gap_ratio + np.arange(right, dtype=float)
    return np.concatenate([first, second])


def _normalized(x: np.ndarray) -> np.ndarray:
    return normalize_shape(x).array()


def family_reference(
    family: Family | str,
    n: int,
    a: float | None = None,
    b: float | None = None,
    gap_ratio: float | None = None,
    ctx: PrecisionContext = DOUBLE,
) -> FamilyRef:
    family = Family(family)
    if n < 2:
        raise InvalidFamilyParams("families need n >= 2")
    if family is Family.HERMITE:
        roots = hermite_roots(n, ctx)
    elif family is Family.SEMICIRCLE:
        roots = RootConfig(_normalized(semicircle_quantiles(n)))
    elif family is Family.UNIFORM:
        roots = RootConfig(_normalized(np.arange(n, dtype=float)))
    elif family is Family.JACOBI:
        if a is None or b is None or a <= -1 or b <= -1:
            raise InvalidFamilyParams(f"Jacobi parameters must exceed -1, got a={a}, b={b}")
        nodes, _ = special.roots_jacobi(n, a, b)
        roots = RootConfig(_normalized(np.sort(nodes)))
    else:
        if gap_ratio is not None and not gap_ratio > 0:
            raise InvalidFamilyParams(f"gap_ratio must be positive, got {gap_ratio}")
        roots = RootConfig(_normalized(two_block_raw(n, 1.0 if gap_ratio is None else gap_ratio)))
    return FamilyRef(family, n, roots, a=a, b=b, gap_ratio=gap_ratio)


def default_library(n: int) -> list[FamilyRef]:
    lib = [
        family_reference(Family.HERMITE, n),
        family_reference(Family.SEMICIRCLE, n),
        family_reference(Family.UNIFORM, n),
    ]
    lib += [family_reference(Family.JACOBI, n, a=a, b=b) for a, b in JACOBI_PARAMS]
    lib.append(family_reference(Family.TWO_BLOCK, n))
    return lib


def scaled_residual(r: np.ndarray, ref: np.ndarray) -> float:
    """min over a > 0 of ||r - a ref|| / sqrt(n)."""
    n = r.size
    proj = float(r @ ref)
    if proj <= 0:
        return float(np.linalg.norm(r) / math.sqrt(n))
    a = proj / float(ref @ ref)
    return float(np.linalg.norm(r - a * ref) / math.sqrt(n))


def _two_block_candidates(n: int):
    orientations = [False] if n % 2 == 0 else [False, True]
    return orientations


def fit_gap_ratio(residual_of_ref, n: int) -> tuple[float, float]:
    """Bounded scalar minimisation of a residual over the two-block gap ratio."""
    best = (math.inf, 1.0)
    for larger_first in _two_block_candidates(n):
        def obj(g, lf=larger_first):
            return residual_of_ref(_normalized(two_block_raw(n, g, lf)))

        res = optimize.minimize_scalar(obj, bounds=GAP_RATIO_BOUNDS, method="bounded",
                                       options={"xatol": 1e-6})
        if res.fun < best[0]:
            best = (float(res.fun), float(res.x))
    return best


def family_residual(r, ref: FamilyRef) -> float:
    """d_family(r) = min_{a>0} ||r - a r_ref|| / sqrt(n).

    A two-block reference without a fixed gap ratio is fitted over the ratio.
    """
    x = _arr(r)
    if ref.family is Family.TWO_BLOCK and ref.gap_ratio is None:
        return fit_gap_ratio(lambda rr: scaled_residual(x, rr), x.size)[0]
    return scaled_residual(x, ref.ref_roots.array())


def _mode_b_residual(a: np.ndarray, b: np.ndarray, ref: np.ndarray) -> float:
    # common affine gauge first, then one shift and one positive scale for both
    pooled = np.concatenate([a, b])
    mu, sd = pooled.mean(), pooled.std()
    if sd < 1e-12:
        raise DegenerateConfig("pair has zero pooled variance")
    y = np.concatenate([(a - mu) / sd, (b - mu) / sd])
    x = np.concatenate([ref, ref])
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean())) / float(xc @ xc)
    slope = max(slope, 0.0)
    shift = float(y.mean() - slope * x.mean())
    resid = y - shift - slope * x
    return float(np.sqrt(resid @ resid / a.size))


def joint_residual(alpha, beta, ref: FamilyRef, mode: str = "A") -> float:
    """Combined family residual of a pair.

    Mode A normalises each polynomial on its own and combines the two
    per-polynomial residuals in quadrature. Mode B removes one common affine
    gauge from the pair and fits a single shift and positive scale to both.
    """
    a, b = _arr(alpha), _arr(beta)
    mode = mode.upper()
    if mode == "A":
        na, nb = _arr(normalize_shape(a)), _arr(normalize_shape(b))
        if ref.family is Family.TWO_BLOCK and ref.gap_ratio is None:
            return fit_gap_ratio(
                lambda rr: math.hypot(scaled_residual(na, rr), scaled_residual(nb, rr)), a.size
            )[0]
        rr = ref.ref_roots.array()
        return math.hypot(scaled_residual(na, rr), scaled_residual(nb, rr))
    if mode == "B":
        if ref.family is Family.TWO_BLOCK and ref.gap_ratio is None:
            return fit_gap_ratio(lambda rr: _mode_b_residual(a, b, rr), a.size)[0]
        return _mode_b_residual(a, b, ref.ref_roots.array())
    raise ValueError(f"unknown mode {mode!r}")


def reflect(r) -> np.ndarray:
    """r -> -rev(r), the reflection that keeps ascending order."""
    return -_arr(r)[::-1]


def odd_moment_defect(r) -> float:
    """Largest |mean(r^k)|^(1/k) over odd k <= n of a normalised vector."""
    x = _arr(r)
    ks = range(3, max(3, x.size) + 1, 2)
    return max(abs(float(np.mean(x**k))) ** (1.0 / k) for k in ks)


def classify_symmetries(alpha, beta, t: float) -> SymmetryFlags:
    """Reflection and pairing symmetries of a normalised pair at threshold t.

    S1 is read as r ~ -rev(r) (reflection about the centre) and S2 as the
    vanishing of the odd normalised moments (even/odd coefficient symmetry).
    Both readings are interpretations; S3 and S4 follow their definitions.
    """
    a, b = _arr(alpha), _arr(beta)
    rootn = math.sqrt(a.size)
    s1 = tuple(bool(np.linalg.norm(x - reflect(x)) / rootn < t) for x in (a, b))
    s2 = tuple(bool(odd_moment_defect(x) < t) for x in (a, b))
    s3 = pair_mismatch(a, b) < t
    s4 = bool(np.linalg.norm(a + b[::-1]) / rootn < t)
    return SymmetryFlags(t, s1, s2, s3, s4)
