"""Finite-SNR Monte-Carlo simulation of the delivery schemes.

Per-user rates come from post-equalization SINRs, rate = log2(1 + SINR),
divided by the symbol-extension length where one is used; channel coding is
deliberately not simulated since the delivery-time metric is a high-SNR
rate-slope object. The Monte-Carlo averaging is over channel draws, and the
empirical NDT is the ratio K / slope of mean sum-rate against log2(P).

Every trial owns two independent RNG substreams derived from its seed: one
for the full-interval channel draw (zero-forcing, TDMA and the replicated
part of the hybrid) and one for the slot-varying 3-symbol extension used by
the X-channel alignment scheme. Trials with the same seed therefore see the
same channels regardless of the scheme, which pairs corner-scheme and
hybrid campaigns for sharp time-sharing comparisons.

The alignment scheme needs slot-varying coefficients within its extension:
with constant slots the desired receive vectors collapse onto the aligned
interference direction and the receive basis is singular. The simulator
draws the three extension slots independently for exactly this reason.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .caching import CacheAllocation, DeliveryAssignment, assignment_for_demand
from .errors import (
    AlignmentDegeneracyError,
    ArgumentError,
    InsufficientDataError,
    SingularChannelError,
    UnsupportedError,
)
from .model import DemandVector, SystemConfig

EXTENSION_SLOTS = 3
MAX_RESAMPLES = 16
DEFAULT_SNR_GRID_DB = (20.0, 30.0, 40.0, 50.0, 60.0)
DEFAULT_TRIALS_PER_SNR = 200


class Scheme(enum.Enum):
    """Edge transmission policies the simulator implements."""

    ZERO_FORCING = "zf"
    IA_XCHANNEL_2X2 = "ia"
    TDMA = "tdma"
    HYBRID_SHARE = "hybrid"


@dataclass(frozen=True)
class TrialResult:
    scheme: Scheme
    snr_db: float
    achieved_sum_rate: float
    per_user_rates: tuple[float, ...]
    delivery_time_per_bit: float
    seed: int


@dataclass(frozen=True)
class EmpiricalNdt:
    """DoF slope and NDT estimated by regressing sum-rate on log2(P)."""

    dof_estimate: float
    ndt_estimate: float
    fit_residual: float
    snr_grid: tuple[float, ...]


def snr_db_to_power(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def awgn_channel(x: np.ndarray, h: np.ndarray, seed: int,
                 noiseless: bool = False) -> np.ndarray:
    """y = h @ x plus unit-variance Gaussian noise, deterministic per seed."""
    y = h @ x
    if noiseless:
        return y
    rng = np.random.default_rng(seed)
    return y + rng.standard_normal(y.shape)


def zf_precode(h: np.ndarray, power: float) -> np.ndarray:
    """Zero-forcing precoder for a K x M channel with M >= K.

    The pseudo-inverse is scaled by a single factor chosen so the busiest
    EN transmits at exactly the power budget under unit-power user symbols;
    every other EN stays below it. The effective channel h @ w is then a
    positive multiple of the identity.
    """
    k, m = h.shape
    if m < k:
        raise ArgumentError(f"zero-forcing needs M >= K, got M={m}, K={k}")
    if np.linalg.matrix_rank(h) < k:
        raise SingularChannelError("channel matrix is row-rank deficient")
    w0 = np.linalg.pinv(h)
    per_en = (w0 ** 2).sum(axis=1)  # ensemble power per EN for unit symbols
    return w0 * math.sqrt(power / per_en.max())


def zf_sinrs(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Post-equalization SINR per user for precoder w (unit noise power)."""
    g = h @ w
    desired = np.diag(g) ** 2
    interference = (g ** 2).sum(axis=1) - desired
    return desired / (1.0 + interference)


def zf_per_en_power(w: np.ndarray) -> np.ndarray:
    """Ensemble average transmit power per EN under unit-power symbols."""
    return (w ** 2).sum(axis=1)


@dataclass(frozen=True)
class IaSolution:
    """Beamformers and receive bases for the 2x2 X-channel over 3 slots.

    beams[m, k] is the unit-norm length-3 vector EN m+1 uses for its message
    to user k+1; receive_bases[k] has columns [desired from EN1 | desired
    from EN2 | aligned interference direction] seen by user k+1 (amplitudes
    not included); amplitudes[m] is the symbol scaling of EN m+1 that meets
    its own per-slot power budget.
    """

    beams: np.ndarray          # (2, 2, 3)
    receive_bases: np.ndarray  # (2, 3, 3)
    amplitudes: np.ndarray     # (2,)
    reference: np.ndarray      # (3,) aligned interference direction


def ia_beamformers(h_slots: np.ndarray, power: float) -> IaSolution:
    """Closed-form alignment for the 2x2 X-channel over a 3-slot extension.

    The two interfering messages at each user are forced onto a common
    reference direction by inverting the per-slot diagonal channels, so
    each user zero-forces one interference dimension and decodes its two
    desired symbols in the remaining plane: 4 symbols per 3 channel uses.
    Alignment fixes beam directions only, so each beam is normalized to
    unit norm; the interference stays collinear and the power budget stays
    conditioned.
    """
    if h_slots.shape != (EXTENSION_SLOTS, 2, 2):
        raise ArgumentError(
            f"expected ({EXTENSION_SLOTS}, 2, 2) slot channels, got {h_slots.shape}"
        )
    if np.abs(h_slots).min() < 1e-12:
        raise SingularChannelError("a slot coefficient is numerically zero")
    ref = np.ones(EXTENSION_SLOTS)
    beams = np.empty((2, 2, EXTENSION_SLOTS))
    # Messages for user 2 land on `ref` at user 1 and vice versa.
    beams[0, 1] = ref / h_slots[:, 0, 0]
    beams[1, 1] = ref / h_slots[:, 0, 1]
    beams[0, 0] = ref / h_slots[:, 1, 0]
    beams[1, 0] = ref / h_slots[:, 1, 1]
    beams /= np.linalg.norm(beams, axis=2, keepdims=True)
    slot_power = (beams ** 2).sum(axis=1)  # (en, slot), unit-power symbols
    amplitudes = np.sqrt(power / slot_power.max(axis=1))
    bases = np.empty((2, EXTENSION_SLOTS, EXTENSION_SLOTS))
    for k in range(2):
        desired = [h_slots[:, k, m] * beams[m, k] for m in range(2)]
        bases[k] = np.column_stack(desired + [ref])
        svals = np.linalg.svd(bases[k], compute_uv=False)
        if svals[-1] <= svals[0] * 1e-9:
            raise AlignmentDegeneracyError(
                f"receive basis of user {k + 1} is rank deficient"
            )
    return IaSolution(beams, bases, amplitudes, ref)


def ia_alignment_error(h_slots: np.ndarray, solution: IaSolution) -> float:
    """Worst relative collinearity error of the aligned interference pair."""
    worst = 0.0
    for k in range(2):
        other = 1 - k
        v1 = h_slots[:, k, 0] * solution.beams[0, other]
        v2 = h_slots[:, k, 1] * solution.beams[1, other]
        sine = np.linalg.norm(np.cross(v1, v2))
        sine /= np.linalg.norm(v1) * np.linalg.norm(v2)
        worst = max(worst, float(sine))
    return worst


def _interference_null_basis(reference: np.ndarray) -> np.ndarray:
    """Orthonormal basis (3 x 2) of the reference direction's complement."""
    seedling = np.column_stack([reference, np.eye(EXTENSION_SLOTS)[:, :2]])
    q, _ = np.linalg.qr(seedling)
    return q[:, 1:]


def ia_message_sinrs(solution: IaSolution) -> np.ndarray:
    """Per-message SINRs, indexed [user, sending EN].

    Each user projects its 3-dimensional receive vector onto the plane
    orthogonal to the aligned interference (zero-forcing it), then decodes
    its two messages successively; the stream SINRs come from the Cholesky
    factor of the resulting 2x2 Gram matrix, so that log2(1 + SINR) summed
    over messages equals the plane's exact log-det rate.
    """
    q_null = _interference_null_basis(solution.reference)
    sinrs = np.empty((2, 2))
    for k in range(2):
        scaled = solution.receive_bases[k][:, :2] * solution.amplitudes
        g = q_null.T @ scaled
        gram = np.eye(2) + g.T @ g
        chol = np.linalg.cholesky(gram)
        sinrs[k] = np.diag(chol) ** 2 - 1.0
    return sinrs


def ia_per_en_power(solution: IaSolution) -> np.ndarray:
    """Per-slot ensemble transmit power of each EN, shape (en, slot)."""
    return solution.amplitudes[:, None] ** 2 * (solution.beams ** 2).sum(axis=1)


def ia_xchannel_2x2(h_slots: np.ndarray, symbols: np.ndarray, power: float,
                    solution: IaSolution | None = None) -> np.ndarray:
    """Transmit matrix (2 x 3) carrying the 4 messages symbols[m, k]."""
    if symbols.shape != (2, 2):
        raise ArgumentError(f"expected (2, 2) message symbols, got {symbols.shape}")
    sol = ia_beamformers(h_slots, power) if solution is None else solution
    x = np.zeros((2, EXTENSION_SLOTS))
    for m in range(2):
        for k in range(2):
            x[m] += sol.amplitudes[m] * symbols[m, k] * sol.beams[m, k]
    return x


def ia_rates(solution: IaSolution) -> np.ndarray:
    """Per-user rates in bits per channel use (2 messages over 3 slots)."""
    sinrs = ia_message_sinrs(solution)
    return np.log2(1.0 + sinrs).sum(axis=1) / EXTENSION_SLOTS


def tdma_delivery(h: np.ndarray, assignment: DeliveryAssignment,
                  file_bits: int, power: float) -> tuple[float, list]:
    """Serve users one at a time with no CSI at the transmitters.

    Each owed fragment is sent by the EN that caches it; fragments every EN
    holds go to a round-robin EN (a CSI-free choice). The link runs at
    log2(1 + h_km^2 P). Returns (delivery time per bit, schedule) where the
    schedule lists (user, en, bits, rate) entries in transmission order.
    """
    num_users, num_ens = h.shape
    schedule = []
    total_uses = 0.0
    for user in range(1, num_users + 1):
        for frag, en in assignment.fragments_for_user(user):
            if en is None:
                en = (user - 1) % num_ens + 1
            rate = math.log2(1.0 + h[user - 1, en - 1] ** 2 * power)
            if rate <= 0.0:
                raise SingularChannelError(
                    f"dead link EN {en} -> user {user}: rate is zero"
                )
            schedule.append((user, en, frag.num_bits, rate))
            total_uses += frag.num_bits / rate
    return total_uses / file_bits, schedule


def _check_compatibility(config: SystemConfig, allocation: CacheAllocation,
                         scheme: Scheme) -> None:
    m, k = config.num_ens, config.num_users
    if allocation.num_ens != m:
        raise ArgumentError(
            f"allocation spans {allocation.num_ens} ENs, config has {m}"
        )
    if scheme is Scheme.ZERO_FORCING:
        if allocation.policy != "full":
            raise UnsupportedError("zero-forcing requires full replication (mu = 1)")
        if m < k:
            raise UnsupportedError(f"zero-forcing needs M >= K, got M={m}, K={k}")
    elif scheme is Scheme.IA_XCHANNEL_2X2:
        if allocation.policy != "split":
            raise UnsupportedError("the alignment scheme requires split placement")
        if (m, k) != (2, 2):
            raise UnsupportedError(
                f"the alignment scheme is implemented for M=K=2, got M={m}, K={k}"
            )
    elif scheme is Scheme.HYBRID_SHARE:
        if allocation.policy != "hybrid":
            raise UnsupportedError("hybrid time sharing requires shared placement")
        if (m, k) != (2, 2):
            raise UnsupportedError(
                f"hybrid time sharing is implemented for M=K=2, got M={m}, K={k}"
            )


def _zf_solve(config: SystemConfig, rng: np.random.Generator, power: float):
    k, m = config.num_users, config.num_ens
    for _ in range(MAX_RESAMPLES + 1):
        h = rng.standard_normal((k, m))
        try:
            w = zf_precode(h, power)
        except SingularChannelError:
            continue
        return h, w
    raise SingularChannelError(
        f"no full-rank channel after {MAX_RESAMPLES} resamples (RNG misuse?)"
    )


def _ia_solve(rng: np.random.Generator, power: float):
    for _ in range(MAX_RESAMPLES + 1):
        h_slots = rng.standard_normal((EXTENSION_SLOTS, 2, 2))
        try:
            sol = ia_beamformers(h_slots, power)
        except SingularChannelError:
            continue
        return h_slots, sol
    raise SingularChannelError(
        f"no usable extension channel after {MAX_RESAMPLES} resamples"
    )


def run_trial_detailed(config: SystemConfig, allocation: CacheAllocation,
                       scheme: Scheme, demand: DemandVector, snr_db: float,
                       seed: int) -> tuple[TrialResult, dict]:
    """One Monte-Carlo trial; also returns per-scheme internals.

    The details dict carries the channel draw(s), precoder or alignment
    solution, per-EN ensemble transmit power and, for the alignment scheme,
    the measured collinearity error, so tests and reports can audit the
    power and alignment contracts trial by trial.
    """
    _check_compatibility(config, allocation, scheme)
    demand.validate(config)
    power = snr_db_to_power(snr_db)
    k = config.num_users
    rng_main = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    rng_ext = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    details: dict = {}

    if scheme is Scheme.ZERO_FORCING:
        h, w = _zf_solve(config, rng_main, power)
        rates = np.log2(1.0 + zf_sinrs(h, w))
        sum_rate = float(rates.sum())
        delta = k / sum_rate
        per_user = tuple(float(r) for r in rates)
        details.update(channel=h, precoder=w, per_en_power=zf_per_en_power(w))
    elif scheme is Scheme.IA_XCHANNEL_2X2:
        h_slots, sol = _ia_solve(rng_ext, power)
        rates = ia_rates(sol)
        sum_rate = float(rates.sum())
        delta = k / sum_rate
        per_user = tuple(float(r) for r in rates)
        details.update(
            slot_channels=h_slots,
            ia_solution=sol,
            per_en_power=ia_per_en_power(sol).max(axis=1),
            alignment_error=ia_alignment_error(h_slots, sol),
        )
    elif scheme is Scheme.TDMA:
        h = rng_main.standard_normal((k, config.num_ens))
        assignment = assignment_for_demand(allocation, demand)
        delta, schedule = tdma_delivery(h, assignment, allocation.file_bits, power)
        sum_rate = k / delta
        per_user = tuple(sum_rate / k for _ in range(k))
        details.update(
            channel=h,
            schedule=schedule,
            per_en_power=np.full(config.num_ens, power),
        )
    elif scheme is Scheme.HYBRID_SHARE:
        h, w = _zf_solve(config, rng_main, power)
        h_slots, sol = _ia_solve(rng_ext, power)
        zf_rate = float(np.log2(1.0 + zf_sinrs(h, w)).sum())
        ia_rate = float(ia_rates(sol).sum())
        split_frac = allocation.split_bits / allocation.file_bits
        # Time-shared delivery: split prefix over the X-channel, replicated
        # tail via cooperative ZF; delta adds the two phases' uses per bit.
        delta = k * split_frac / ia_rate + k * (1.0 - split_frac) / zf_rate
        sum_rate = k / delta
        per_user = tuple(sum_rate / k for _ in range(k))
        details.update(
            channel=h,
            precoder=w,
            slot_channels=h_slots,
            ia_solution=sol,
            split_fraction=split_frac,
            sub_rates={"zf": zf_rate, "ia": ia_rate},
            per_en_power=np.maximum(
                zf_per_en_power(w), ia_per_en_power(sol).max(axis=1)
            ),
            alignment_error=ia_alignment_error(h_slots, sol),
        )
    else:  # pragma: no cover - exhaustive over Scheme
        raise UnsupportedError(f"unknown scheme {scheme!r}")

    result = TrialResult(scheme, float(snr_db), sum_rate, per_user,
                         float(delta), seed)
    return result, details


def run_trial(config: SystemConfig, allocation: CacheAllocation,
              scheme: Scheme, demand: DemandVector, snr_db: float,
              seed: int) -> TrialResult:
    return run_trial_detailed(config, allocation, scheme, demand, snr_db, seed)[0]


def trial_seed(master_seed: int, index: int) -> int:
    """Deterministic per-trial seed; independent of execution order."""
    ss = np.random.SeedSequence((master_seed, index))
    return int(ss.generate_state(1, np.uint64)[0])


def run_campaign(config: SystemConfig, allocation: CacheAllocation,
                 scheme: Scheme, demand: DemandVector, snr_grid_db,
                 trials_per_snr: int, master_seed: int,
                 workers: int = 1) -> list[TrialResult]:
    """Monte-Carlo campaign over an SNR grid.

    Each trial has its own seed derived from (master seed, trial index), so
    results are bit-identical for any number of workers; the returned list
    is ordered by (snr index, trial index).
    """
    jobs = []
    for si, snr in enumerate(snr_grid_db):
        for ti in range(trials_per_snr):
            seed = trial_seed(master_seed, si * trials_per_snr + ti)
            jobs.append((snr, seed))

    def _one(job):
        snr, seed = job
        return run_trial(config, allocation, scheme, demand, snr, seed)

    if workers <= 1:
        return [_one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one, jobs))


def estimate_ndt(trials) -> EmpiricalNdt:
    """Least-squares DoF slope of mean sum-rate against log2(P).

    Needs at least 3 distinct SNR points spanning 20 dB or more, with at
    least 50 trials each.
    """
    groups: dict[float, list[float]] = {}
    for t in trials:
        groups.setdefault(t.snr_db, []).append(t.achieved_sum_rate)
    if len(groups) < 3:
        raise InsufficientDataError(
            f"need >= 3 distinct SNR points, got {len(groups)}"
        )
    snrs = sorted(groups)
    if snrs[-1] - snrs[0] < 20.0:
        raise InsufficientDataError(
            f"SNR grid spans {snrs[-1] - snrs[0]:.1f} dB, need >= 20"
        )
    short = [s for s in snrs if len(groups[s]) < 50]
    if short:
        raise InsufficientDataError(
            f"fewer than 50 trials at SNR points {short}"
        )
    x = np.array([math.log2(snr_db_to_power(s)) for s in snrs])
    y = np.array([float(np.mean(groups[s])) for s in snrs])
    slope, intercept = np.polyfit(x, y, 1)
    if slope <= 0:
        raise InsufficientDataError(f"non-positive rate slope {slope:.3g}")
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    k = len(trials[0].per_user_rates)
    return EmpiricalNdt(float(slope), k / float(slope), residual, tuple(snrs))
