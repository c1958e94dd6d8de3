"""Variance-normalised finite free CLT iteration near the Hermite fixed point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import omega
from .errors import DivergenceDetected
from .realroot import PrecisionContext, RootConfig, as_root_config
from .reference import hermite_distance, hermite_roots, normalize_shape
from .spectrum import coupling_matrix, digits_for, meanzero_svd

DEFAULT_CTX = PrecisionContext(digits=40)
CSV_HEADER = ["k", "d_H"]


@dataclass
class CltTrajectory:
    steps: list = field(default_factory=list)  # (k, RootConfig, d_H)
    fitted_rate: float = math.nan
    fit_window: tuple[int, int] = (0, 0)

    @property
    def distances(self) -> list[float]:
        return [d for _, _, d in self.steps]


def clt_step(f, ctx: PrecisionContext = DEFAULT_CTX) -> RootConfig:
    """One step f -> (1/sqrt 2)_* (f boxplus_n f): roots of the self-convolution over sqrt 2."""
    f = as_root_config(f)
    gamma = omega(f, f, ctx)
    if ctx.is_float:
        return RootConfig(gamma.array() / math.sqrt(2))
    root2 = ctx.mp.sqrt(2)
    return RootConfig(np.array([g / root2 for g in gamma.roots], dtype=object))


def _centred_variance(r: RootConfig):
    vals = list(r.roots)
    mean = sum(vals) / len(vals)
    return sum((v - mean) ** 2 for v in vals) / len(vals)


def fit_rate(distances, k_min: int, k_max: int) -> float:
    """exp(slope) of a least-squares line through log d_H over [k_min, k_max]."""
    ks = np.arange(k_min, k_max + 1)
    ys = np.log(np.asarray([distances[k] for k in ks], dtype=float))
    slope = np.polyfit(ks, ys, 1)[0]
    return float(math.exp(slope))


def clt_trajectory(
    f0,
    steps: int = 20,
    ctx: PrecisionContext = DEFAULT_CTX,
    fit_window: tuple[int, int] | None = None,
) -> CltTrajectory:
    """Iterate ``clt_step`` in the unit-variance gauge and fit the decay rate of d_H.

    The fit uses steps [3, steps - 1] unless ``fit_window`` is given. Raises
    :class:`DivergenceDetected` when d_H grows tenfold over three steps.
    """
    if steps < 3:
        raise ValueError("need at least 3 steps")
    f0 = as_root_config(f0)
    # unit-variance gauge, carried at the context precision
    vals = ctx.convert(f0.roots)
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    sd = var ** 0.5 if ctx.is_float else ctx.mp.sqrt(var)
    f = RootConfig(np.array([(v - mean) / sd for v in vals], dtype=vals.dtype))
    traj = CltTrajectory()
    traj.steps.append((0, f, hermite_distance(normalize_shape(f))))
    for k in range(1, steps + 1):
        f = clt_step(f, ctx)
        d = hermite_distance(normalize_shape(f))
        traj.steps.append((k, f, d))
        if k >= 3 and d > 10 * traj.steps[k - 3][2] and d > 1e-12:
            raise DivergenceDetected(f"d_H grew from {traj.steps[k - 3][2]:.3g} to {d:.3g}")
    lo, hi = fit_window or (3, steps - 1)
    traj.fit_window = (lo, hi)
    dists = traj.distances
    if min(dists[lo : hi + 1]) > 0:
        traj.fitted_rate = fit_rate(dists, lo, hi)
    return traj


def perturbation_direction(n: int, mode: int, digits: int | None = None) -> np.ndarray:
    """Unit mean-zero vector e_mode (1-based) from the SVD of E_n on 1-perp."""
    cm = coupling_matrix(n, PrecisionContext(digits or digits_for(n)))
    _, _, V = meanzero_svd(cm)
    v = np.array([float(x) for x in V[mode - 1]])
    # fix the sign so that runs are reproducible
    idx = int(np.argmax(np.abs(v)))
    return v if v[idx] > 0 else -v


def seeded_start(n: int, mode: int, eps: float) -> RootConfig:
    """h^(n) + eps * e_mode, sorted."""
    h = hermite_roots(n).array()
    return RootConfig.from_values(h + eps * perturbation_direction(n, mode))


def variance_of(r) -> float:
    return float(_centred_variance(as_root_config(r)))
