"""Hermite coupling matrix E_n and its mean-zero singular spectrum.

E_n is the Jacobian of gamma = Omega(alpha, h) in alpha at alpha = h. Each
column comes from implicit differentiation of P(gamma_i) = 0, where the
coefficient perturbation dP is assembled analytically from
d e_i(alpha) / d alpha_j = e_{i-1}(alpha without alpha_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import boxplus_weights
from .errors import PrecisionExhausted
from .fisher import score_vector
from .jacobi_svd import jacobi_svd
from .realroot import PrecisionContext, elementary_symmetric
from .reference import hermite_roots

AUDIT_DEGREES = (10, 20, 30, 40, 50, 60, 70, 80, 90)
CSV_HEADER = ["n", "digits"] + [f"sigma_{k}" for k in range(1, 11)] + [
    "max_rel_err",
    "symmetry_defect",
]


def digits_for(n: int) -> int:
    """60 digits up to n = 10, then 20 more per additional 10 in n."""
    if n <= 10:
        return 60
    return 60 + 20 * math.ceil((n - 10) / 10)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    n: int
    E: list  # rows of mpf
    digits: int
    stochasticity_defect: float

    def as_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.E])


@dataclass(frozen=True, eq=False)
class SpectrumAudit:
    n: int
    digits: int
    sigma: list  # descending, mpf
    max_rel_err_first10: float
    symmetry_defect: float
    eigenvalues: list = field(default_factory=list)

    def csv_row(self) -> list:
        head = [f"{float(s):.12g}" for s in self.sigma[:10]]
        head += [""] * (10 - len(head))
        return [self.n, self.digits, *head, f"{self.max_rel_err_first10:.3e}",
                f"{self.symmetry_defect:.3e}"]


@dataclass(frozen=True)
class JacobianCheck:
    sigma: list  # nonzero singular values of J restricted to V, descending
    kernel_dim: int
    antidiagonal_residual: float


def _mp_of(ctx: PrecisionContext):
    if ctx.is_float:
        raise ValueError("the spectral audit needs a multiprecision context (digits > 15)")
    return ctx.mp


def coupling_matrix(n: int, ctx: PrecisionContext | None = None) -> CouplingMatrix:
    """E_n at the Hermite diagonal, computed at ``ctx`` precision.

    Defaults to the audit schedule's precision for ``n``. Raises
    :class:`PrecisionExhausted` if row or column sums miss 1 by more than
    10^(-digits/4).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    ctx = ctx or PrecisionContext(digits_for(n))
    mp = _mp_of(ctx)
    h = list(ctx.convert(hermite_roots(n, ctx).roots))
    sqrt2 = mp.sqrt(2)
    gamma = [sqrt2 * v for v in h]
    b = elementary_symmetric(h, one=mp.one)
    w = [[mp.mpf(q.numerator) / q.denominator for q in row] for row in boxplus_weights(n)]
    # powers gamma_i^(n-k) with the (-1)^k sign folded in
    signed_pows = []
    dprime = []
    for i in range(n):
        pw = [mp.one]
        for _ in range(n):
            pw.append(pw[-1] * gamma[i])
        signed_pows.append([(-1) ** k * pw[n - k] for k in range(n + 1)])
        dprime.append(mp.fprod(gamma[i] - gamma[j] for j in range(n) if j != i))
    E = [[mp.zero] * n for _ in range(n)]
    for m in range(n):
        rest = elementary_symmetric(h[:m] + h[m + 1 :], one=mp.one)
        # d a_i / d alpha_m = e_{i-1}(h without h_m), i >= 1
        dc = [mp.zero] + [
            mp.fsum(w[i][k - i] * rest[i - 1] * b[k - i] for i in range(1, k + 1))
            for k in range(1, n + 1)
        ]
        for i in range(n):
            dP = mp.fsum(dc[k] * signed_pows[i][k] for k in range(1, n + 1))
            E[i][m] = -dP / dprime[i]
    defect = max(
        max(abs(mp.fsum(row) - 1) for row in E),
        max(abs(mp.fsum(E[i][j] for i in range(n)) - 1) for j in range(n)),
    )
    if defect > mp.mpf(10) ** (-ctx.digits / 4):
        raise PrecisionExhausted(
            f"stochasticity defect {mp.nstr(defect, 3)} at n={n}, {ctx.digits} digits"
        )
    return CouplingMatrix(n=n, E=E, digits=ctx.digits, stochasticity_defect=float(defect))


def helmert_basis(n: int, mp=None) -> list[list]:
    """Orthonormal basis of the mean-zero subspace, as n-1 column vectors."""
    sqrt = mp.sqrt if mp is not None else math.sqrt
    one = mp.one if mp is not None else 1.0
    basis = []
    for k in range(1, n):
        norm = sqrt(one * k * (k + 1))
        basis.append([one / norm] * k + [-one * k / norm] + [0 * one] * (n - k - 1))
    return basis


def _matrix_of(E) -> tuple[list, object]:
    if isinstance(E, CouplingMatrix):
        rows = E.E
    else:
        rows = [list(r) for r in E]
    mp = getattr(rows[0][0], "context", None)
    return rows, mp


def _restricted(rows, mp) -> list[list]:
    n = len(rows)
    Q = helmert_basis(n, mp)
    zero = mp.zero if mp is not None else 0.0
    EQ = [[sum((rows[i][l] * q[l] for l in range(n)), zero) for q in Q] for i in range(n)]
    return [[sum((Q[a][i] * EQ[i][b] for i in range(n)), zero) for b in range(n - 1)]
            for a in range(n - 1)]


def meanzero_svd(E):
    """SVD of E restricted to 1-perp, with singular vectors lifted to R^n."""
    rows, mp = _matrix_of(E)
    n = len(rows)
    B = _restricted(rows, mp)
    svd = jacobi_svd(B, mp)
    Q = helmert_basis(n, mp)
    zero = mp.zero if mp is not None else 0.0

    def lift(v):
        return [sum((v[k] * Q[k][i] for k in range(n - 1)), zero) for i in range(n)]

    return svd.sigma, [lift(u) for u in svd.U], [lift(v) for v in svd.V]


def meanzero_singular_values(E) -> list:
    """Descending singular values of E on the mean-zero subspace."""
    rows, mp = _matrix_of(E)
    return jacobi_svd(_restricted(rows, mp), mp).sigma


def symmetry_defect(E) -> float:
    rows, mp = _matrix_of(E)
    n = len(rows)
    sq = mp.sqrt if mp is not None else math.sqrt
    num = sq(sum((rows[i][j] - rows[j][i]) ** 2 for i in range(n) for j in range(n)))
    den = sq(sum(rows[i][j] ** 2 for i in range(n) for j in range(n)))
    return float(num / den)


def dyadic_targets(count: int, mp=None) -> list:
    if mp is None:
        return [2.0 ** (-k / 2) for k in range(1, count + 1)]
    return [mp.power(2, -mp.mpf(k) / 2) for k in range(1, count + 1)]


def max_relative_error(sigma, modes: int = 10) -> float:
    k = min(modes, len(sigma))
    mp = getattr(sigma[0], "context", None)
    targets = dyadic_targets(k, mp)
    return float(max(abs(s - t) / t for s, t in zip(sigma[:k], targets)))


def audit_degree(n: int, digits: int | None = None) -> SpectrumAudit:
    digits = digits or digits_for(n)
    cm = coupling_matrix(n, PrecisionContext(digits))
    sigma = meanzero_singular_values(cm)
    B = np.array([[float(v) for v in row] for row in _restricted(cm.E, cm.E[0][0].context)])
    eig = sorted(np.linalg.eigvals(B).real, reverse=True)
    return SpectrumAudit(
        n=n,
        digits=digits,
        sigma=sigma,
        max_rel_err_first10=max_relative_error(sigma),
        symmetry_defect=symmetry_defect(cm),
        eigenvalues=[float(v) for v in eig],
    )


def spectrum_audit(n_list, schedule: dict[int, int] | None = None) -> list[SpectrumAudit]:
    """Per-degree audit against the dyadic targets 2^(-k/2)."""
    schedule = schedule or {}
    return [audit_degree(n, schedule.get(n, digits_for(n))) for n in n_list]


def contraction_ratio(n: int, p: float, ctx: PrecisionContext | None = None) -> float:
    """||E_n s||_p / ||s||_p for the Hermite score vector s."""
    ctx = ctx or PrecisionContext(digits_for(n))
    mp = _mp_of(ctx)
    cm = coupling_matrix(n, ctx)
    s = list(score_vector(hermite_roots(n, ctx), ctx))
    Es = [mp.fsum(cm.E[i][j] * s[j] for j in range(n)) for i in range(n)]
    pp = mp.mpf(p)

    def norm(v):
        return mp.power(mp.fsum(mp.power(abs(x), pp) for x in v), 1 / pp)

    return float(norm(Es) / norm(s))


def score_eigen_residual(n: int, ctx: PrecisionContext | None = None) -> float:
    """||E s - 2^(-1/2) s||_2 / ||s||_2 at the Hermite point."""
    ctx = ctx or PrecisionContext(digits_for(n))
    mp = _mp_of(ctx)
    cm = coupling_matrix(n, ctx)
    s = list(score_vector(hermite_roots(n, ctx), ctx))
    lam = 1 / mp.sqrt(2)
    r = [mp.fsum(cm.E[i][j] * s[j] for j in range(n)) - lam * s[i] for i in range(n)]
    return float(mp.sqrt(mp.fsum(x * x for x in r)) / mp.sqrt(mp.fsum(x * x for x in s)))


def full_jacobian_svd_check(n: int, ctx: PrecisionContext | None = None) -> JacobianCheck:
    """Singular values of (u, v) -> E(u + v) on V = {u, v mean-zero}."""
    ctx = ctx or PrecisionContext(digits_for(n))
    mp = _mp_of(ctx)
    cm = coupling_matrix(n, ctx)
    B = _restricted(cm.E, mp)
    # V has the orthonormal basis {(q_k, 0)} u {(0, q_k)}, so J|_V = [B, B]
    JT = [list(col) for col in zip(*B)] + [list(col) for col in zip(*B)]
    sigma = jacobi_svd(JT, mp).sigma
    tol = mp.mpf(10) ** (-ctx.digits / 2)
    rank = sum(1 for s in sigma if s > tol)
    kernel_dim = 2 * (n - 1) - rank
    worst = mp.zero
    for q in helmert_basis(n, mp):
        w = q + [-x for x in q]
        Jw = [mp.fsum(cm.E[i][j] * (w[j] + w[n + j]) for j in range(n)) for i in range(n)]
        worst = max(worst, mp.sqrt(mp.fsum(x * x for x in Jw)))
    return JacobianCheck(sigma=sigma, kernel_dim=kernel_dim, antidiagonal_residual=float(worst))


def stability_margin(n: int, samples: int = 64, seed: int = 0,
                     ctx: PrecisionContext | None = None) -> float:
    """min over random w in V of ||w||^2 - ||J w||^2 - ||P_perp w||^2 / 2.

    P_perp removes the neutral mode (e_1, e_1)/sqrt(2), e_1 being the leading
    right singular vector of E on the mean-zero subspace. The quadratic-defect
    bound predicts a nonnegative result if the dyadic spectrum holds.
    """
    ctx = ctx or PrecisionContext(digits_for(n))
    cm = coupling_matrix(n, ctx)
    E = cm.as_float()
    _, _, V = meanzero_svd(cm)
    e1 = np.array([float(x) for x in V[0]])
    neutral = np.concatenate([e1, e1]) / math.sqrt(2)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(samples):
        w = rng.standard_normal(2 * n)
        w[:n] -= w[:n].mean()
        w[n:] -= w[n:].mean()
        Jw = E @ (w[:n] + w[n:])
        perp = w - (w @ neutral) * neutral
        worst = min(worst, w @ w - Jw @ Jw - 0.5 * perp @ perp)
    return float(worst)
