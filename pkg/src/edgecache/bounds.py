"""Delivery-time bounds, achievable points and tradeoff envelopes.

Everything here is exact rational arithmetic over the fractional cache size
mu. The converse is a family of affine lower bounds on the normalized
delivery time (NDT), indexed by a cut parameter ell in {1..min(M,K)}:

    delta(mu) >= (K - (M-ell)+ (K-ell)+ mu) / ell

Achievability comes from two corner schemes (interference alignment over
the induced X-channel at mu = 1/M; zero-forcing broadcast at mu = 1), plus
known literature points for specific networks, glued together by the
cache/time-sharing convex envelope.
"""

from __future__ import annotations

import enum
import itertools
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from .errors import ArgumentError, EmptyInputError, RangeError, UnsupportedError
from .model import SystemConfig, as_fraction

PROVENANCE_TAGS = (
    "lower-bound",
    "x-channel-corner",
    "zf-corner",
    "literature-point",
    "envelope",
)


@dataclass(frozen=True)
class NdtPoint:
    """One (mu, delta) point with a tag recording where it came from."""

    mu: Fraction
    ndt: Fraction
    provenance: str = "envelope"

    def __post_init__(self):
        object.__setattr__(self, "mu", as_fraction(self.mu))
        object.__setattr__(self, "ndt", as_fraction(self.ndt))
        if not 0 < self.mu <= 1:
            raise RangeError(f"mu {self.mu} outside (0, 1]")
        if self.ndt < 1:
            raise ArgumentError(
                f"ndt {self.ndt} < 1: nothing beats the interference-free baseline"
            )
        if self.provenance not in PROVENANCE_TAGS:
            raise ArgumentError(f"unknown provenance tag {self.provenance!r}")


class CsiMode(enum.Enum):
    """Channel knowledge available at the ENs."""

    PERFECT = "perfect"
    DELAYED = "delayed"
    NO_CSI = "nocsi"


@dataclass(frozen=True)
class TradeoffCurve:
    """Piecewise-linear NDT curve given by breakpoints increasing in mu."""

    points: tuple[NdtPoint, ...]
    kind: str  # "lower" | "upper"

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise ArgumentError(f"kind must be 'lower' or 'upper', got {self.kind!r}")
        if not self.points:
            raise EmptyInputError("a curve needs at least one breakpoint")
        mus = [p.mu for p in self.points]
        if any(b <= a for a, b in zip(mus, mus[1:])):
            raise ArgumentError("breakpoints must be strictly increasing in mu")
        slopes = [
            (q.ndt - p.ndt) / (q.mu - p.mu)
            for p, q in zip(self.points, self.points[1:])
        ]
        if any(s > 0 for s in slopes):
            raise ArgumentError("curve must be non-increasing in mu")
        if any(s2 < s1 for s1, s2 in zip(slopes, slopes[1:])):
            raise ArgumentError("curve must be convex in mu")

    @property
    def mu_min(self) -> Fraction:
        return self.points[0].mu

    @property
    def mu_max(self) -> Fraction:
        return self.points[-1].mu

    def value_at(self, mu) -> Fraction:
        """Exact chord interpolation between the bracketing breakpoints."""
        mu = as_fraction(mu)
        if not self.mu_min <= mu <= self.mu_max:
            raise RangeError(
                f"mu {mu} outside curve span [{self.mu_min}, {self.mu_max}]"
            )
        mus = [p.mu for p in self.points]
        idx = bisect_right(mus, mu) - 1
        if idx == len(self.points) - 1:
            return self.points[-1].ndt
        p, q = self.points[idx], self.points[idx + 1]
        alpha = (q.mu - mu) / (q.mu - p.mu)
        return alpha * p.ndt + (1 - alpha) * q.ndt


def _check_mu_range(config: SystemConfig, mu: Fraction) -> None:
    if not Fraction(1, config.num_ens) <= mu <= 1:
        raise RangeError(
            f"mu {mu} outside feasible range [1/{config.num_ens}, 1]"
        )


def ndt_lower_bound_at(config: SystemConfig, mu, ell: int) -> Fraction:
    """One member of the bound family: (K - (M-ell)+ (K-ell)+ mu) / ell."""
    m, k = config.num_ens, config.num_users
    if not isinstance(ell, int) or not 1 <= ell <= min(m, k):
        raise RangeError(f"ell {ell!r} outside {{1..{min(m, k)}}}")
    mu = as_fraction(mu)
    _check_mu_range(config, mu)
    return Fraction(k - max(m - ell, 0) * max(k - ell, 0) * mu, ell)


def ndt_lower_bound(config: SystemConfig, mu) -> tuple[Fraction, int]:
    """Exact max of the bound family and the smallest maximizing ell."""
    mu = as_fraction(mu)
    best: Fraction | None = None
    best_ell = 0
    for ell in range(1, min(config.num_ens, config.num_users) + 1):
        value = ndt_lower_bound_at(config, mu, ell)
        if best is None or value > best:
            best, best_ell = value, ell
    return best, best_ell


def corner_point_xchannel(config: SystemConfig) -> NdtPoint:
    """Interference-alignment corner: mu = 1/M, delta = (M+K-1)/M."""
    m, k = config.num_ens, config.num_users
    return NdtPoint(Fraction(1, m), Fraction(m + k - 1, m), "x-channel-corner")


def corner_point_zero_forcing(config: SystemConfig) -> NdtPoint:
    """Full-caching corner: mu = 1, delta = K/min(M,K) via cooperative ZF."""
    m, k = config.num_ens, config.num_users
    return NdtPoint(Fraction(1), Fraction(k, min(m, k)), "zf-corner")


def achievable_points(config: SystemConfig,
                      csi_mode: CsiMode = CsiMode.PERFECT) -> list[NdtPoint]:
    """Known achievable (mu, delta) points for the given CSI regime.

    Perfect CSI yields the two corner points for any (M, K), plus the
    published inner point (2/3, 7/6) for the 3x3 network. Delayed and
    absent CSI carry published points for the 2x2 network only; other
    sizes are rejected rather than extrapolated.
    """
    m, k = config.num_ens, config.num_users
    if csi_mode is CsiMode.PERFECT:
        points = [corner_point_xchannel(config), corner_point_zero_forcing(config)]
        if (m, k) == (3, 3):
            points.append(NdtPoint(Fraction(2, 3), Fraction(7, 6), "literature-point"))
        return points
    if (m, k) != (2, 2):
        raise UnsupportedError(
            f"{csi_mode.value} CSI points are only available for M=K=2, "
            f"got M={m}, K={k}"
        )
    if csi_mode is CsiMode.DELAYED:
        # 2x2 X-channel sum-DoF 6/5 and 2x2 broadcast sum-DoF 4/3 under delay.
        return [
            NdtPoint(Fraction(1, 2), Fraction(5, 3), "literature-point"),
            NdtPoint(Fraction(1), Fraction(3, 2), "literature-point"),
        ]
    # No CSI: time division, sum-DoF 1, flat NDT of K.
    return [
        NdtPoint(Fraction(1, 2), Fraction(k), "literature-point"),
        NdtPoint(Fraction(1), Fraction(k), "literature-point"),
    ]


def convex_envelope(points) -> TradeoffCurve:
    """Lower convex hull of (mu, delta) points, as an ordered breakpoint list.

    Duplicated points are tolerated; of several points sharing a mu only the
    lowest survives; collinear interior points are dropped so the breakpoint
    list is canonical (invariant to input order and duplication).
    """
    by_mu: dict[Fraction, NdtPoint] = {}
    for p in points:
        kept = by_mu.get(p.mu)
        if kept is None or p.ndt < kept.ndt:
            by_mu[p.mu] = p
    if not by_mu:
        raise EmptyInputError("convex_envelope needs at least one point")
    ordered = [by_mu[mu] for mu in sorted(by_mu)]
    hull: list[NdtPoint] = []
    for p in ordered:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return TradeoffCurve(tuple(hull), "upper")


def _cross(o: NdtPoint, a: NdtPoint, b: NdtPoint) -> Fraction:
    return (a.mu - o.mu) * (b.ndt - o.ndt) - (a.ndt - o.ndt) * (b.mu - o.mu)


def _lower_bound_candidates(config: SystemConfig) -> list[Fraction]:
    """Points where the active piece of the bound family can change."""
    m, k = config.num_ens, config.num_users
    lo, hi = Fraction(1, m), Fraction(1)
    candidates = {lo, hi}
    pieces = {}
    for ell in range(1, min(m, k) + 1):
        coeff = max(m - ell, 0) * max(k - ell, 0)
        pieces[ell] = (Fraction(k, ell), Fraction(-coeff, ell))  # intercept, slope
    for e1, e2 in itertools.combinations(pieces, 2):
        (i1, s1), (i2, s2) = pieces[e1], pieces[e2]
        if s1 == s2:
            continue
        mu_star = (i2 - i1) / (s1 - s2)
        if lo <= mu_star <= hi:
            candidates.add(mu_star)
    return sorted(candidates)


def lower_bound_curve(config: SystemConfig) -> TradeoffCurve:
    """The exact converse as a piecewise-linear curve over [1/M, 1]."""
    xs = _lower_bound_candidates(config)
    pts = [
        NdtPoint(x, ndt_lower_bound(config, x)[0], "lower-bound") for x in xs
    ]
    if len(pts) <= 2:
        return TradeoffCurve(tuple(pts), "lower")
    kept = [pts[0]]
    for i in range(1, len(pts) - 1):
        if _cross(kept[-1], pts[i], pts[i + 1]) != 0:
            kept.append(pts[i])
    kept.append(pts[-1])
    return TradeoffCurve(tuple(kept), "lower")


@dataclass(frozen=True)
class TradeoffRow:
    """One grid point of a sweep; converse columns empty outside perfect CSI."""

    mu: Fraction
    lower: Fraction | None
    ell_star: int | None
    upper: Fraction
    gap: Fraction | None
    tight: bool | None


@dataclass(frozen=True)
class TradeoffTable:
    config: SystemConfig
    csi_mode: CsiMode
    rows: tuple[TradeoffRow, ...]


def default_mu_grid(config: SystemConfig, step=None) -> list[Fraction]:
    """Grid over [1/M, 1]; the default step 1/(12*M*K) hits every known corner."""
    m, k = config.num_ens, config.num_users
    step = Fraction(1, 12 * m * k) if step is None else as_fraction(step)
    if step <= 0:
        raise ArgumentError(f"grid step must be positive, got {step}")
    grid = []
    mu = Fraction(1, m)
    while mu < 1:
        grid.append(mu)
        mu += step
    grid.append(Fraction(1))
    return grid


def tradeoff_sweep(config: SystemConfig, mu_grid,
                   csi_mode: CsiMode = CsiMode.PERFECT) -> TradeoffTable:
    """Evaluate converse and achievable envelope over a mu grid.

    Delayed and no-CSI modes report achievability only; the converse is
    proved for perfect CSI and emitting it elsewhere would invent results.
    """
    grid = [as_fraction(mu) for mu in mu_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ArgumentError("mu_grid must be sorted and duplicate-free")
    envelope = convex_envelope(achievable_points(config, csi_mode))
    rows = []
    for mu in grid:
        _check_mu_range(config, mu)
        upper = envelope.value_at(mu)
        if csi_mode is CsiMode.PERFECT:
            lower, ell_star = ndt_lower_bound(config, mu)
            gap = upper - lower
            rows.append(TradeoffRow(mu, lower, ell_star, upper, gap, gap == 0))
        else:
            rows.append(TradeoffRow(mu, None, None, upper, None, None))
    return TradeoffTable(config, csi_mode, tuple(rows))


def optimality_regions(config: SystemConfig) -> list[tuple[Fraction, Fraction]]:
    """Maximal mu-intervals where the converse meets the achievable envelope.

    Returned as (lo, hi) pairs with lo == hi for isolated touching points.
    Both curves are piecewise linear with rational breakpoints, so on any
    cell of the common refinement the gap is affine and non-negative: it
    vanishes on a cell interior only if it vanishes at both ends.
    """
    envelope = convex_envelope(achievable_points(config, CsiMode.PERFECT))
    candidates = sorted(
        set(_lower_bound_candidates(config)) | {p.mu for p in envelope.points}
    )
    zero_flags = []
    for mu in candidates:
        gap = envelope.value_at(mu) - ndt_lower_bound(config, mu)[0]
        if gap < 0:
            raise ArgumentError(
                f"achievable envelope below converse at mu={mu}: gap {gap}"
            )
        zero_flags.append(gap == 0)
    regions: list[tuple[Fraction, Fraction]] = []
    start: Fraction | None = None
    for mu, is_zero in zip(candidates, zero_flags):
        if is_zero and start is None:
            start = mu
        elif not is_zero and start is not None:
            regions.append((start, prev_mu))
            start = None
        prev_mu = mu
    if start is not None:
        regions.append((start, candidates[-1]))
    return regions
