"""Structural screening of elite populations against the family library.

Each elite pair is scored by its Mode A joint residual against a candidate
family and against the Hermite configuration. The family "wins" a comparison
when its residual is strictly smaller; ties are dropped. The win count is
turned into an e-value by betting against a uniform prior on [1/2, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from statistics import median

import numpy as np
from scipy import special

from .errors import EmptyElites, InvalidCounts
from .reference import (
    SYMMETRY_THRESHOLDS,
    Family,
    FamilyRef,
    classify_symmetries,
    default_library,
    family_reference,
    joint_residual,
    normalize_shape,
)
from .search import EliteBuffer

REJECT_THRESHOLD = 20.0
TIE_TOL = 1e-12
SCREEN_TOP = 512
CAVEAT = (
    "Elite configurations are optimizer-selected rather than exchangeable; "
    "e-values and frequencies summarise the search output and are diagnostic, "
    "not calibrated tests."
)


class Decision(str, Enum):
    REJECT = "Reject_H0"
    NO_REJECT = "NoReject"


class Favoured(str, Enum):
    FAMILY = "Family"
    HERMITE = "Hermite"
    INCONCLUSIVE = "Inconclusive"


def log_evalue(wins: int, m_eff: int) -> float:
    """Natural log of 2^(M+1) * int_{1/2}^1 q^S (1-q)^(M-S) dq.

    The integral equals B(S+1, M-S+1) * I_{1/2}(M-S+1, S+1), using the
    symmetry of the regularised incomplete beta under q -> 1 - q.
    """
    if isinstance(wins, bool) or isinstance(m_eff, bool):
        raise InvalidCounts("counts must be integers")
    if int(wins) != wins or int(m_eff) != m_eff:
        raise InvalidCounts(f"counts must be integers, got wins={wins}, m_eff={m_eff}")
    s, m = int(wins), int(m_eff)
    if m < 0 or not 0 <= s <= m:
        raise InvalidCounts(f"need 0 <= wins <= m_eff, got wins={s}, m_eff={m}")
    log_beta = special.betaln(s + 1, m - s + 1)
    tail = special.betainc(m - s + 1, s + 1, 0.5)
    if tail > 1e-280:
        log_tail = math.log(tail)
    else:
        # far tail: sum the binomial terms directly in log space
        log_tail = _log_upper_binomial_tail(s, m)
    return (m + 1) * math.log(2.0) + log_beta + log_tail


def _log_upper_binomial_tail(s: int, m: int) -> float:
    # I_{1/2}(m-s+1, s+1) = P(Bin(m+1, 1/2) >= m-s+1)
    terms = [
        special.gammaln(m + 2) - special.gammaln(k + 1) - special.gammaln(m + 2 - k)
        for k in range(m - s + 1, m + 2)
    ]
    return float(special.logsumexp(terms)) - (m + 1) * math.log(2.0)


def evalue(wins: int, m_eff: int) -> float:
    """E = 2^(M+1) int_{1/2}^1 q^S (1-q)^(M-S) dq for S wins out of M comparisons."""
    return math.exp(log_evalue(wins, m_eff))


@dataclass(frozen=True)
class ScreenResult:
    n: int
    p: float
    family: str
    e_value: float
    m_eff: int
    wins: int
    decision: Decision
    favoured: Favoured

    def csv_row(self) -> list:
        return [self.n, self.p, self.family, self.e_value, self.m_eff, self.wins,
                self.decision.value, self.favoured.value]


SCREEN_HEADER = ["n", "p", "family", "e_value", "m_eff", "wins", "decision", "favoured"]


def _require(elites: EliteBuffer, top: int | None = SCREEN_TOP) -> list:
    if elites is None or not elites.entries:
        raise EmptyElites("elite buffer is empty")
    entries = elites.entries
    return entries[:top] if top else list(entries)


def screen_family(elites: EliteBuffer, family: FamilyRef, top: int | None = SCREEN_TOP) -> ScreenResult:
    """E-value screen of ``family`` against the Hermite baseline."""
    entries = _require(elites, top)
    n = elites.n or entries[0].alpha.size
    hermite = family_reference(Family.HERMITE, n)
    wins = m_eff = 0
    for e in entries:
        r_fam = joint_residual(e.alpha, e.beta, family, "A")
        r_her = joint_residual(e.alpha, e.beta, hermite, "A")
        if abs(r_fam - r_her) <= TIE_TOL:
            continue
        m_eff += 1
        wins += r_fam < r_her
    e_val = evalue(wins, m_eff)
    decision = Decision.REJECT if e_val >= REJECT_THRESHOLD else Decision.NO_REJECT
    if decision is Decision.REJECT:
        favoured = Favoured.FAMILY
    elif e_val < 1.0:
        favoured = Favoured.HERMITE
    else:
        favoured = Favoured.INCONCLUSIVE
    return ScreenResult(n, float(elites.p), family.label, e_val, m_eff, wins, decision, favoured)


@dataclass
class EliteSummary:
    best_family: str
    median_d_joint: float
    consistency: float
    best_d_PQ: float
    best_D: float
    sym_fractions: dict = field(default_factory=dict)  # (flag, t) -> fraction
    size: int = 0
    caveat: str = CAVEAT

    def csv_row(self, n: int, p: float) -> list:
        s3 = self.sym_fractions.get(("S3", 0.1), math.nan)
        return [n, p, self.best_family, self.median_d_joint, self.consistency,
                self.best_d_PQ, self.best_D, s3]


SUMMARY_HEADER = ["n", "p", "best_family", "median_d_joint", "consistency",
                  "best_d_PQ", "best_D", "S3_t0.1"]


def summarize_elites(
    elites: EliteBuffer,
    library: list[FamilyRef] | None = None,
    t_list=SYMMETRY_THRESHOLDS,
    top: int | None = SCREEN_TOP,
) -> EliteSummary:
    """Majority best-fitting family and symmetry frequencies of an elite population."""
    entries = _require(elites, top)
    n = entries[0].alpha.size
    library = library or default_library(n)
    winners, best_resid = [], []
    for e in entries:
        resid = [joint_residual(e.alpha, e.beta, ref, "A") for ref in library]
        k = int(np.argmin(resid))
        winners.append(library[k].label)
        best_resid.append(resid[k])
    best_family, count = Counter(winners).most_common(1)[0]
    chosen = [r for w, r in zip(winners, best_resid) if w == best_family]
    sym = {}
    normed = [(normalize_shape(e.alpha).array(), normalize_shape(e.beta).array()) for e in entries]
    for t in t_list:
        flags = [classify_symmetries(a, b, t) for a, b in normed]
        m = len(flags)
        sym[("S1", t)] = sum(all(f.s1) for f in flags) / m
        sym[("S2", t)] = sum(all(f.s2) for f in flags) / m
        sym[("S3", t)] = sum(f.s3 for f in flags) / m
        sym[("S4", t)] = sum(f.s4 for f in flags) / m
    return EliteSummary(
        best_family=best_family,
        median_d_joint=float(median(chosen)),
        consistency=count / len(entries),
        best_d_PQ=min(float(e.diagnostics.d_PQ) for e in entries),
        best_D=min(float(e.diagnostics.D) for e in entries),
        sym_fractions=sym,
        size=len(entries),
    )


def gap_statistic(r) -> float:
    """Largest adjacent gap over the median of the remaining gaps."""
    x = np.sort(np.asarray(r.roots if hasattr(r, "roots") else r, dtype=float))
    if x.size < 3:
        raise ValueError("gap statistic needs n >= 3")
    gaps = np.diff(x)
    k = int(np.argmax(gaps))
    rest = np.delete(gaps, k)
    return float(gaps[k] / np.median(rest))


def order_statistic_bands(elites: EliteBuffer, which: str = "alpha",
                          quantiles=(0.1, 0.25, 0.5, 0.75, 0.9)) -> list[list]:
    """Per-index quantiles of the normalised sorted roots across the elites."""
    entries = _require(elites, None)
    mat = np.array([normalize_shape(getattr(e, which)).array() for e in entries])
    qs = np.quantile(mat, quantiles, axis=0)
    return [[i + 1, *map(float, qs[:, i])] for i in range(mat.shape[1])]


def band_header(quantiles=(0.1, 0.25, 0.5, 0.75, 0.9)) -> list[str]:
    return ["index"] + [f"q{int(round(100 * q)):02d}" for q in quantiles]
