"""Closed-loop derivative-free extremal search over pairs of root configurations.

Each restart runs a projected (1+1) random-perturbation descent with symmetry
moves and step decay, then a short random-direction refinement. Restarts feed
a top-K elite buffer; later rounds are reseeded from that buffer.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import FFStamError, ProjectionFailure
from .fisher import stam_deficit
from .realroot import DOUBLE, PrecisionContext, RootConfig
from .reference import PairDiagnostics, normalize_shape, pair_diagnostics

log = logging.getLogger(__name__)

SYMMETRY_MOVE_PROB = 0.25
REJECTION_STREAK = 10
REVALIDATION_DIGITS = 50


@dataclass(frozen=True)
class SearchConfig:
    n: int
    p: float
    objective: str = "g_p"  # or "rho_p"
    restarts: int = 16
    rounds: int = 3
    steps_per_restart: int = 400
    refine_steps: int = 150
    init_step: float = 0.2
    step_decay: float = 0.7
    min_step: float = 1e-9
    min_gap: float = 1e-4
    top_k: int = 64
    seed: int = 0
    gauge: str = "normalized"  # or "free"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.objective not in ("g_p", "rho_p"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.gauge not in ("free", "normalized"):
            raise ValueError(f"unknown gauge {self.gauge!r}")
        if not self.min_gap > 0 or self.top_k < 1 or self.restarts < 1 or self.rounds < 1:
            raise ValueError("need min_gap > 0, top_k >= 1, restarts >= 1, rounds >= 1")
        if not 0 < self.step_decay < 1:
            raise ValueError("step_decay must lie in (0, 1)")

    @classmethod
    def from_mapping(cls, data: dict) -> "SearchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown search settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class EliteEntry:
    alpha: np.ndarray
    beta: np.ndarray
    objective_value: float
    g_p: float
    rho_p: float
    diagnostics: PairDiagnostics

    def record(self, n: int, p: float) -> dict:
        return {
            "n": n,
            "p": p,
            "objective": self.objective_value,
            "alpha": [float(v) for v in self.alpha],
            "beta": [float(v) for v in self.beta],
            "g_p": self.g_p,
            "rho_p": self.rho_p,
            "D": self.diagnostics.D,
            "d_PQ": self.diagnostics.d_PQ,
        }


@dataclass(eq=False)
class EliteBuffer:
    """Top-K feasible pairs, ascending by objective value."""

    top_k: int
    n: int = 0
    p: float = 0.0
    entries: list = field(default_factory=list)
    round_best: list = field(default_factory=list)
    discarded: int = 0

    def add(self, entry: EliteEntry) -> None:
        self.entries.append(entry)
        self.entries.sort(key=lambda e: e.objective_value)
        del self.entries[self.top_k :]

    def merge(self, other: "EliteBuffer") -> "EliteBuffer":
        out = EliteBuffer(self.top_k, self.n or other.n, self.p or other.p)
        out.entries = sorted(self.entries + other.entries, key=lambda e: e.objective_value)
        del out.entries[self.top_k :]
        out.round_best = list(self.round_best)
        out.discarded = self.discarded + other.discarded
        return out

    @property
    def best(self) -> EliteEntry | None:
        return self.entries[0] if self.entries else None

    def __len__(self):
        return len(self.entries)

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.record(self.n, self.p)) + "\n")

    @classmethod
    def from_jsonl(cls, path: str | Path, top_k: int | None = None) -> "EliteBuffer":
        records = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        if not records:
            return cls(top_k or 1)
        buf = cls(top_k or len(records), records[0]["n"], records[0]["p"])
        for rec in records:
            a, b = np.asarray(rec["alpha"], float), np.asarray(rec["beta"], float)
            diag = PairDiagnostics(*_diag_values(a, b))
            buf.entries.append(
                EliteEntry(a, b, rec["objective"], rec["g_p"], rec["rho_p"], diag)
            )
        buf.entries.sort(key=lambda e: e.objective_value)
        return buf


def _diag_values(a, b):
    d = pair_diagnostics(normalize_shape(a), normalize_shape(b))
    return d.d_H_alpha, d.d_H_beta, d.D, d.d_PQ


def _isotonic(y: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators fit of a nondecreasing sequence."""
    vals, wts, sizes = [], [], []
    for v in y:
        vals.append(float(v))
        wts.append(1.0)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            w = wts[-2] + wts[-1]
            v = (vals[-2] * wts[-2] + vals[-1] * wts[-1]) / w
            s = sizes[-2] + sizes[-1]
            vals[-2:], wts[-2:], sizes[-2:] = [v], [w], [s]
    return np.repeat(vals, sizes)


def enforce_gap(x: np.ndarray, min_gap: float) -> np.ndarray:
    """Closest ascending vector (in l2) whose adjacent gaps are all >= min_gap.

    A colliding pair is spread symmetrically about its midpoint.
    """
    x = np.sort(np.asarray(x, dtype=float))
    if x.size < 2 or np.min(np.diff(x)) >= min_gap:
        return x
    shift = min_gap * np.arange(x.size)
    return _isotonic(x - shift) + shift


def _feasible(x: np.ndarray, min_gap: float) -> bool:
    return bool(np.all(np.isfinite(x)) and np.min(np.diff(x)) >= min_gap * (1 - 1e-9))


def _project_one(x: np.ndarray, cfg: SearchConfig) -> np.ndarray:
    x = enforce_gap(x, cfg.min_gap)
    if cfg.gauge == "free":
        return x
    for _ in range(10):
        x = normalize_shape(x).array()
        if _feasible(x, cfg.min_gap):
            return x
        x = enforce_gap(x, cfg.min_gap * (1 + 1e-6))
    raise ProjectionFailure(
        f"min_gap={cfg.min_gap} not reachable at unit variance for n={cfg.n}"
    )


def project_feasible(alpha, beta, cfg: SearchConfig) -> tuple[RootConfig, RootConfig]:
    """Sort, spread collisions to ``min_gap`` and (optionally) normalise each vector."""
    a = np.asarray(alpha.roots if isinstance(alpha, RootConfig) else alpha, dtype=float)
    b = np.asarray(beta.roots if isinstance(beta, RootConfig) else beta, dtype=float)
    return RootConfig(_project_one(a, cfg)), RootConfig(_project_one(b, cfg))


def evaluate_pair(a: np.ndarray, b: np.ndarray, cfg: SearchConfig, ctx=DOUBLE):
    """(objective, g_p, rho_p); non-finite objective if the oracle fails."""
    try:
        rep = stam_deficit(RootConfig(a), RootConfig(b), cfg.p, ctx)
    except (FFStamError, FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError):
        return math.inf, math.nan, math.nan
    obj = rep.g_p if cfg.objective == "g_p" else rep.rho_p
    if not math.isfinite(obj):
        return math.inf, math.nan, math.nan
    return obj, rep.g_p, rep.rho_p


def _symmetry_move(a: np.ndarray, b: np.ndarray, rng: np.random.Generator):
    move = rng.integers(3)
    if move == 0:
        return b, a
    if move == 1:
        if rng.random() < 0.5:
            return -a[::-1], b
        return a, -b[::-1]
    return a, a.copy()


def _random_pair(cfg: SearchConfig, rng: np.random.Generator):
    return rng.standard_normal(cfg.n), rng.standard_normal(cfg.n)


class _Counter:
    def __init__(self):
        self.discarded = 0


def _descend(a, b, cfg: SearchConfig, rng: np.random.Generator, counter: _Counter):
    n = cfg.n
    a, b = _project_one(a, cfg), _project_one(b, cfg)
    best, g, rho = evaluate_pair(a, b, cfg)
    if not math.isfinite(best):
        counter.discarded += 1
    step = cfg.init_step
    streak = 0
    for _ in range(cfg.steps_per_restart):
        if step < cfg.min_step:
            break
        noise = step * rng.standard_normal(2 * n)
        ca, cb = a + noise[:n], b + noise[n:]
        if rng.random() < SYMMETRY_MOVE_PROB:
            ca, cb = _symmetry_move(ca, cb, rng)
        try:
            ca, cb = _project_one(ca, cfg), _project_one(cb, cfg)
        except FFStamError:
            counter.discarded += 1
            continue
        val, cg, crho = evaluate_pair(ca, cb, cfg)
        if not math.isfinite(val):
            counter.discarded += 1
        if val < best:
            a, b, best, g, rho = ca, cb, val, cg, crho
            streak = 0
        else:
            streak += 1
            if streak >= REJECTION_STREAK:
                step *= cfg.step_decay
                streak = 0
    # random-direction refinement with step reduction
    step = max(step, cfg.min_step) if math.isfinite(best) else cfg.init_step
    fails = 0
    for _ in range(cfg.refine_steps):
        if step < cfg.min_step:
            break
        d = rng.standard_normal(2 * n)
        d /= np.linalg.norm(d)
        improved = False
        for sign in (1.0, -1.0):
            ca, cb = a + sign * step * d[:n], b + sign * step * d[n:]
            try:
                ca, cb = _project_one(ca, cfg), _project_one(cb, cfg)
            except FFStamError:
                continue
            val, cg, crho = evaluate_pair(ca, cb, cfg)
            if val < best:
                a, b, best, g, rho = ca, cb, val, cg, crho
                improved = True
                break
        if improved:
            fails = 0
        else:
            fails += 1
            if fails >= 4:
                step *= cfg.step_decay
                fails = 0
    return a, b, best, g, rho


def _entry(a, b, val, g, rho) -> EliteEntry:
    return EliteEntry(a, b, float(val), float(g), float(rho), PairDiagnostics(*_diag_values(a, b)))


def srp_search(cfg: SearchConfig, seed_pool: EliteBuffer | None = None,
               round_index: int = 0) -> EliteBuffer:
    """One round of restarts; deterministic in (cfg.seed, round_index, restart)."""
    pool = list(seed_pool.entries) if seed_pool is not None else []
    out = EliteBuffer(cfg.top_k, cfg.n, cfg.p)
    counter = _Counter()
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, round_index, r])
        if pool:
            src = pool[r % len(pool)]
            a, b = src.alpha.copy(), src.beta.copy()
        else:
            a, b = _random_pair(cfg, rng)
        try:
            a, b, val, g, rho = _descend(a, b, cfg, rng, counter)
        except FFStamError as exc:
            log.debug("restart %d failed: %s", r, exc)
            counter.discarded += 1
            continue
        if math.isfinite(val):
            out.add(_entry(a, b, val, g, rho))
    out.discarded = counter.discarded
    return out


def closed_loop_run(cfg: SearchConfig) -> EliteBuffer:
    """``cfg.rounds`` rounds of :func:`srp_search`, each reseeded from the buffer."""
    buffer = EliteBuffer(cfg.top_k, cfg.n, cfg.p)
    for rnd in range(cfg.rounds):
        fresh = srp_search(cfg, buffer if buffer.entries else None, rnd)
        buffer = buffer.merge(fresh)
        buffer.round_best.append(buffer.best.objective_value if buffer.best else math.inf)
        log.info("n=%d p=%g round %d best %.6g", cfg.n, cfg.p, rnd, buffer.round_best[-1])
    return buffer


def revalidate(entry: EliteEntry, p: float, digits: int = REVALIDATION_DIGITS) -> float:
    """g_p of an elite pair recomputed at ``digits`` decimal digits."""
    rep = stam_deficit(RootConfig(entry.alpha), RootConfig(entry.beta), p,
                       PrecisionContext(digits))
    return rep.g_p


SWEEP_HEADER = [
    "n", "p", "objective", "g_p_min", "rho_p", "D", "d_PQ", "g_p_50digits",
    "sign", "heat", "elapsed_s", "status",
]


@dataclass
class SweepCell:
    n: int
    p: float
    objective: float = math.nan
    g_p: float = math.nan
    rho_p: float = math.nan
    D: float = math.nan
    d_PQ: float = math.nan
    g_p_revalidated: float = math.nan
    elapsed: float = 0.0
    status: str = "ok"
    buffer: EliteBuffer | None = None

    @property
    def sign(self) -> int:
        """Sign of the cell minimum, taken from the 50-digit value when available."""
        g = self.g_p_revalidated if math.isfinite(self.g_p_revalidated) else self.g_p
        return 0 if not math.isfinite(g) else int(np.sign(g))

    @property
    def heat(self) -> float:
        """sgn(g) log10(1 + |g|), the phase-diagram colour value."""
        if not math.isfinite(self.g_p):
            return math.nan
        return math.copysign(math.log10(1 + abs(self.g_p)), self.g_p)

    def csv_row(self) -> list:
        return [self.n, self.p, self.objective, self.g_p, self.rho_p, self.D, self.d_PQ,
                self.g_p_revalidated, self.sign, self.heat, round(self.elapsed, 3), self.status]


@dataclass
class SweepReport:
    cells: list

    def sign_map(self) -> dict:
        return {(c.n, c.p): c.sign for c in self.cells}


def _run_cell(args) -> SweepCell:
    n, p, template = args
    cfg = replace(template, n=n, p=p)
    cell = SweepCell(n, p)
    t0 = time.perf_counter()
    try:
        buf = closed_loop_run(cfg)
        best = buf.best
        if best is None:
            cell.status = "no_feasible_samples"
        else:
            cell.objective, cell.g_p, cell.rho_p = best.objective_value, best.g_p, best.rho_p
            cell.D, cell.d_PQ = best.diagnostics.D, best.diagnostics.d_PQ
            cell.buffer = buf
            try:
                cell.g_p_revalidated = revalidate(best, p)
            except FFStamError as exc:
                cell.status = f"revalidation_failed: {exc.category}"
    except FFStamError as exc:
        cell.status = f"{exc.category}: {exc}"
    cell.elapsed = time.perf_counter() - t0
    return cell


def sweep(grid, cfg_template: SearchConfig, workers: int = 1) -> SweepReport:
    """Closed-loop run per (n, p) cell. Cell failures are recorded, not raised."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    jobs = [(int(n), float(p), cfg_template) for n, p in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    return SweepReport(cells)
