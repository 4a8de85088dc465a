"""Numerical checks of the linear algebra behind the delivery-time converse.

The converse argument reconstructs the signals of all users from ell channel
outputs plus (M-ell)+ cache contents. Its deterministic constituents are
verified here at double precision:

* the variance constant Lambda bounding the entropy of any ell outputs,
  computed from the literal channel expression max_k [sum_m h_km^2 +
  sum_{m != m~} h_km h_km~];
* the submatrix reconstruction identity built from the corner blocks H1
  (ell x ell, invertible almost surely), H2 and H3;
* the log-det residual term log det(I + Ht Ht^T) with Ht = H2 H1^-1, which
  is power independent;
* the covariance of the folded noise Ht n, which must match Ht Ht^T.

Entropy inequalities themselves are not estimated; only these deterministic
pieces are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import RangeError, SingularH1Error
from .model import SystemConfig, submatrix

H1_COND_LIMIT = 1e6  # draws beyond this conditioning are rejected as singular
RECONSTRUCTION_TOL = 1e-9
LOGDET_ORACLE_TOL = 1e-10
NOISE_COV_TOL = 0.05
NOISE_COV_SAMPLES = 100_000
MAX_REDRAWS = 16


@dataclass(frozen=True)
class SubmatrixTriple:
    """Corner blocks of the channel matrix for a cut parameter ell."""

    h1: np.ndarray  # ell x ell
    h2: np.ndarray  # (K-ell) x ell
    h3: np.ndarray  # (K-ell) x M
    ell: int


def lambda_constant(h: np.ndarray, ell: int) -> float:
    """Variance constant over the first ell receivers, literal expression."""
    k = h.shape[0]
    if not isinstance(ell, int) or not 1 <= ell <= k:
        raise RangeError(f"ell {ell!r} outside {{1..{k}}}")
    best = -math.inf
    for row in h[:ell]:
        squares = float((row ** 2).sum())
        cross = float(np.outer(row, row).sum()) - squares  # ordered m != m~
        best = max(best, squares + cross)
    return best


@dataclass(frozen=True)
class VarianceCheck:
    """Outcome of an empirical test of Var[Y_k] <= Lambda * P + 1."""

    holds: bool
    worst_margin: float
    bound: float
    empirical: np.ndarray


def variance_bound_check(h: np.ndarray, ell: int, power: float, trials: int,
                         seed: int = 0, correlated: bool = False,
                         rel_tol: float = 0.05) -> VarianceCheck:
    """Empirically probe the received-signal variance bound.

    Inputs are drawn at full per-EN power either independently or fully
    correlated (every EN transmits the same waveform, the equality case of
    the Cauchy-Schwarz step). Violations are reported, never hidden: for
    sign-mixed channel rows the literal constant can undershoot the
    independent-input variance, and the verdict will say so.
    """
    k, m = h.shape
    bound = lambda_constant(h, ell) * power + 1.0
    rng = np.random.default_rng(seed)
    if correlated:
        x = math.sqrt(power) * np.broadcast_to(
            rng.standard_normal(trials), (m, trials)
        )
    else:
        x = math.sqrt(power) * rng.standard_normal((m, trials))
    y = h @ x + rng.standard_normal((k, trials))
    empirical = np.var(y[:ell], axis=1)
    worst = float(bound - empirical.max())
    holds = bool(empirical.max() <= bound * (1.0 + rel_tol))
    return VarianceCheck(holds, worst, bound, empirical)


def build_submatrices(h: np.ndarray, ell: int) -> SubmatrixTriple:
    """Corner blocks H1, H2, H3 for the reconstruction identity."""
    k, m = h.shape
    if not isinstance(ell, int) or not 1 <= ell <= min(m, k):
        raise RangeError(f"ell {ell!r} outside {{1..{min(m, k)}}}")
    col_start = max(m - ell, 0) + 1
    h1 = submatrix(h, (1, ell), (col_start, m))
    if ell < k:
        h2 = submatrix(h, (ell + 1, k), (col_start, m))
        h3 = submatrix(h, (ell + 1, k), (1, m))
    else:
        h2 = np.empty((0, ell))
        h3 = np.empty((0, m))
    assert h1.shape == (ell, ell)
    return SubmatrixTriple(h1, h2, h3, ell)


def _solve_h1(h1: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if np.linalg.cond(h1) > H1_COND_LIMIT:
        raise SingularH1Error(
            f"H1 condition number exceeds {H1_COND_LIMIT:g}; redraw the channel"
        )
    try:
        return np.linalg.solve(h1, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularH1Error("H1 is singular") from exc


def reconstruction_residual(h: np.ndarray, ell: int, x: np.ndarray,
                            noise: np.ndarray) -> float:
    """Relative Frobenius mismatch of the two sides of the identity.

    Left side: the bottom channel outputs plus the folded top noise
    H2 H1^-1 n_top. Right side: H3 applied to the known inputs stacked on
    the interference-cancelled, H1-inverted top outputs, plus the bottom
    noise. Algebraically zero; numerically limited by the H1 solve.
    """
    k, m = h.shape
    blocks = build_submatrices(h, ell)
    if ell == k:
        return 0.0  # degenerate cut: both sides are empty
    known = max(m - ell, 0)
    y = h @ x + noise
    y_top, y_bot = y[:ell], y[ell:]
    n_top, n_bot = noise[:ell], noise[ell:]
    y_tilde = y_top - h[:ell, :known] @ x[:known]
    left = y_bot + blocks.h2 @ _solve_h1(blocks.h1, n_top)
    right = blocks.h3 @ np.vstack([x[:known], _solve_h1(blocks.h1, y_tilde)])
    right = right + n_bot
    scale = np.linalg.norm(left)
    diff = np.linalg.norm(left - right)
    return float(diff / scale) if scale > 0 else float(diff)


def folded_channel(h: np.ndarray, ell: int) -> np.ndarray:
    """Ht = H2 H1^-1, the matrix folding top noise into the bottom outputs."""
    blocks = build_submatrices(h, ell)
    if blocks.h2.shape[0] == 0:
        return np.empty((0, ell))
    return _solve_h1(blocks.h1.T, blocks.h2.T).T


def logdet_term(h: np.ndarray, ell: int) -> float:
    """log det(I + Ht Ht^T), finite and independent of any power level.

    Computed as sum log(1 + sigma_i^2) over the singular values of Ht,
    which stays accurate even when Ht is large (forming the Gram matrix
    explicitly would square its dynamic range).
    """
    ht = folded_channel(h, ell)
    if ht.shape[0] == 0:
        return 0.0
    svals = np.linalg.svd(ht, compute_uv=False)
    return float(np.sum(np.log1p(svals ** 2)))


def det_direct(rows) -> Fraction | float:
    """Cofactor-expansion determinant over the elements as given.

    An oracle independent of LAPACK; works elementwise, so feeding it
    Fraction entries yields an exact determinant.
    """
    rows = [list(r) for r in rows]
    n = len(rows)
    if n == 0:
        return 1
    if n == 1:
        return rows[0][0]
    total = 0
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * rows[0][j] * det_direct(minor)
    return total


def _inv_exact(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Exact Gauss-Jordan inverse over rationals."""
    n = len(rows)
    work = [
        list(row) + [Fraction(int(i == j)) for j in range(n)]
        for i, row in enumerate(rows)
    ]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(work[r][col]))
        if work[pivot][col] == 0:
            raise SingularH1Error("H1 is exactly singular in the oracle path")
        work[col], work[pivot] = work[pivot], work[col]
        inv_p = 1 / work[col][col]
        work[col] = [v * inv_p for v in work[col]]
        for r in range(n):
            if r != col and work[r][col]:
                f = work[r][col]
                work[r] = [v - f * w for v, w in zip(work[r], work[col])]
    return [row[n:] for row in work]


def logdet_oracle(h: np.ndarray, ell: int) -> float:
    """Brute-force log-det from explicitly formed Ht entries, exactly.

    Every float coefficient is a dyadic rational, so the inverse, the Gram
    matrix and the cofactor determinant are computed without rounding; only
    the final logarithm is floating point. This keeps the oracle honest on
    draws where Ht is huge and any fixed-precision determinant would cancel
    catastrophically.
    """
    blocks = build_submatrices(h, ell)
    if blocks.h2.shape[0] == 0:
        return 0.0
    if np.linalg.cond(blocks.h1) > H1_COND_LIMIT:
        raise SingularH1Error("H1 condition number too large; redraw the channel")
    h1 = [[Fraction(x) for x in row] for row in blocks.h1.tolist()]
    h2 = [[Fraction(x) for x in row] for row in blocks.h2.tolist()]
    inv = _inv_exact(h1)
    rows = len(h2)
    ht = [
        [sum(h2[i][t] * inv[t][j] for t in range(ell)) for j in range(ell)]
        for i in range(rows)
    ]
    gram = [
        [
            Fraction(int(i == j)) + sum(ht[i][t] * ht[j][t] for t in range(ell))
            for j in range(rows)
        ]
        for i in range(rows)
    ]
    det = det_direct(gram)
    return math.log(det.numerator) - math.log(det.denominator)


def noise_cov_check(h: np.ndarray, ell: int, trials: int, seed: int = 0,
                    normalized: bool = False) -> float:
    """Max entry error between the empirical covariance of Ht n and Ht Ht^T.

    With `normalized` the folding matrix is rescaled to unit spectral norm
    first. The covariance law is scale equivariant, so this checks the same
    identity while keeping the absolute error comparable across draws (the
    raw entries of Ht are ratio distributed and can be arbitrarily large).
    """
    ht = folded_channel(h, ell)
    if ht.shape[0] == 0:
        return 0.0
    if normalized:
        ht = ht / np.linalg.svd(ht, compute_uv=False)[0]
    rng = np.random.default_rng(seed)
    n_top = rng.standard_normal((ell, trials))
    folded = ht @ n_top
    empirical = folded @ folded.T / trials
    return float(np.abs(empirical - ht @ ht.T).max())


def sample_regular_channel(rng: np.random.Generator, num_users: int,
                           num_ens: int, ell: int) -> np.ndarray:
    """Standard-normal K x M draw with a well-conditioned H1 block."""
    for _ in range(MAX_REDRAWS + 1):
        h = rng.standard_normal((num_users, num_ens))
        blocks = build_submatrices(h, ell)
        if np.linalg.cond(blocks.h1) <= H1_COND_LIMIT:
            return h
    raise SingularH1Error(
        f"no well-conditioned H1 after {MAX_REDRAWS} redraws (RNG misuse?)"
    )


@dataclass(frozen=True)
class ConverseReport:
    """Aggregate residuals for one cut parameter ell."""

    ell: int
    trials: int
    lambda_max: float
    max_reconstruction_residual: float
    max_logdet: float
    max_logdet_oracle_error: float
    noise_cov_error: float
    noise_cov_samples: int
    config: SystemConfig


def verify_converse(config: SystemConfig, ells=None, trials: int = 1000,
                    seed: int = 0, time_columns: int = 8) -> list[ConverseReport]:
    """Monte-Carlo verification of the identities for each requested ell."""
    m, k = config.num_ens, config.num_users
    if ells is None:
        ells = range(1, min(m, k) + 1)
    reports = []
    for ell in ells:
        rng = np.random.default_rng((seed, ell))
        lam = -math.inf
        worst_residual = 0.0
        worst_logdet = 0.0
        worst_oracle = 0.0
        for _ in range(trials):
            h = sample_regular_channel(rng, k, m, ell)
            x = rng.standard_normal((m, time_columns))
            noise = rng.standard_normal((k, time_columns))
            lam = max(lam, lambda_constant(h, ell))
            worst_residual = max(
                worst_residual, reconstruction_residual(h, ell, x, noise)
            )
            value = logdet_term(h, ell)
            worst_logdet = max(worst_logdet, abs(value))
            worst_oracle = max(worst_oracle, abs(value - logdet_oracle(h, ell)))
        cov_h = sample_regular_channel(
            np.random.default_rng((seed, ell, 1)), k, m, ell
        )
        cov_err = noise_cov_check(cov_h, ell, NOISE_COV_SAMPLES, seed=(seed + 1),
                                  normalized=True)
        reports.append(
            ConverseReport(
                ell=ell,
                trials=trials,
                lambda_max=lam,
                max_reconstruction_residual=worst_residual,
                max_logdet=worst_logdet,
                max_logdet_oracle_error=worst_oracle,
                noise_cov_error=cov_err,
                noise_cov_samples=NOISE_COV_SAMPLES,
                config=config,
            )
        )
    return reports


def report_passes(report: ConverseReport,
                  reconstruction_tol: float = RECONSTRUCTION_TOL,
                  logdet_tol: float = LOGDET_ORACLE_TOL,
                  noise_tol: float = NOISE_COV_TOL) -> bool:
    return (
        report.max_reconstruction_residual < reconstruction_tol
        and report.max_logdet_oracle_error < logdet_tol
        and report.noise_cov_error < noise_tol
        and math.isfinite(report.max_logdet)
    )
