"""Concrete caching policies and per-demand delivery assignments.

Three placements cover the feasible range of the fractional cache size:

* split (mu = 1/M): every file is cut into M contiguous equal fragments
  and EN m stores fragment m of every file;
* full (mu = 1): every EN replicates the whole library;
* hybrid (1/M < mu < 1): the first alpha*L bits of every file follow the
  split rules and the tail is replicated, with alpha = (1-mu)/(1-1/M) so
  the per-EN budget mu*N*L is met.

Placement happens before any demand or channel is known, so allocations
never depend on either. Fragments are contiguous bit slices, which keeps
reconstruction tests bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ArgumentError, CoverageError
from .model import DemandVector, FileLibrary, SystemConfig


@dataclass(frozen=True)
class Fragment:
    """A contiguous bit-slice [start_bit, start_bit + num_bits) of one file."""

    file_index: int  # 1-based
    start_bit: int
    num_bits: int

    @property
    def end_bit(self) -> int:
        return self.start_bit + self.num_bits


@dataclass(frozen=True)
class CachedFragment:
    """A fragment together with the bits an EN actually stores for it."""

    fragment: Fragment
    bits: np.ndarray


@dataclass(frozen=True)
class CacheAllocation:
    """Per-EN stored fragments realizing one caching policy."""

    per_en_content: tuple[tuple[CachedFragment, ...], ...]
    policy: str  # "split" | "full" | "hybrid"
    file_bits: int
    alpha: Fraction | None = None
    split_bits: int | None = None  # per-file prefix length placed by split rules

    @property
    def num_ens(self) -> int:
        return len(self.per_en_content)

    def en_bits(self, en: int) -> int:
        """Total stored bits at EN `en` (1-based)."""
        return sum(cf.fragment.num_bits for cf in self.per_en_content[en - 1])

    def en_file_bits(self, en: int, file_index: int) -> int:
        return sum(
            cf.fragment.num_bits
            for cf in self.per_en_content[en - 1]
            if cf.fragment.file_index == file_index
        )

    def cached_fragments(self, en: int, file_index: int) -> tuple[CachedFragment, ...]:
        return tuple(
            cf for cf in self.per_en_content[en - 1]
            if cf.fragment.file_index == file_index
        )


def _frozen(bits: np.ndarray) -> np.ndarray:
    out = np.array(bits, dtype=np.uint8, copy=True)
    out.flags.writeable = False
    return out


def split_placement(library: FileLibrary, config: SystemConfig) -> CacheAllocation:
    """Fragment-split placement for mu = 1/M; needs M | L."""
    m, l = config.num_ens, config.file_bits
    if config.frac_cache != Fraction(1, m):
        raise ArgumentError(
            f"split placement requires mu = 1/{m}, got {config.frac_cache}"
        )
    if l % m != 0:
        raise ArgumentError(f"file_bits {l} not divisible by num_ens {m}")
    frag_len = l // m
    content = []
    for en in range(1, m + 1):
        start = (en - 1) * frag_len
        stored = tuple(
            CachedFragment(
                Fragment(n, start, frag_len),
                _frozen(library.file(n)[start:start + frag_len]),
            )
            for n in range(1, config.library_size + 1)
        )
        content.append(stored)
    return CacheAllocation(tuple(content), "split", l)


def full_placement(library: FileLibrary, config: SystemConfig) -> CacheAllocation:
    """Whole-library replication at every EN; requires mu = 1."""
    if config.frac_cache != 1:
        raise ArgumentError(f"full placement requires mu = 1, got {config.frac_cache}")
    l = config.file_bits
    stored = tuple(
        CachedFragment(Fragment(n, 0, l), _frozen(library.file(n)))
        for n in range(1, config.library_size + 1)
    )
    return CacheAllocation(tuple(stored for _ in range(config.num_ens)), "full", l)


def shared_placement(library: FileLibrary, config: SystemConfig,
                     mu=None) -> CacheAllocation:
    """Cache-sharing hybrid for 1/M < mu < 1.

    The split prefix length is alpha*L rounded up to the next multiple of M
    (rounding down would grow the replicated tail and break the budget), so
    per-EN storage never exceeds mu*N*L.
    """
    m, l = config.num_ens, config.file_bits
    mu = config.frac_cache if mu is None else Fraction(mu)
    if not Fraction(1, m) < mu < 1:
        raise ArgumentError(
            f"shared placement requires 1/{m} < mu < 1, got {mu}"
        )
    if l % m != 0:
        raise ArgumentError(f"file_bits {l} not divisible by num_ens {m}")
    alpha = (1 - mu) / (1 - Fraction(1, m))
    split_exact = alpha * l
    split_bits = int(-(-split_exact // m)) * m  # ceil to a multiple of M
    frag_len = split_bits // m
    tail = l - split_bits
    content = []
    for en in range(1, m + 1):
        stored = []
        for n in range(1, config.library_size + 1):
            if frag_len:
                start = (en - 1) * frag_len
                stored.append(
                    CachedFragment(
                        Fragment(n, start, frag_len),
                        _frozen(library.file(n)[start:start + frag_len]),
                    )
                )
            if tail:
                stored.append(
                    CachedFragment(
                        Fragment(n, split_bits, tail),
                        _frozen(library.file(n)[split_bits:]),
                    )
                )
        content.append(tuple(stored))
    return CacheAllocation(tuple(content), "hybrid", l, alpha=alpha,
                           split_bits=split_bits)


def verify_cache_budget(allocation: CacheAllocation,
                        config: SystemConfig) -> bool:
    """True iff every EN respects mu*N*L overall and mu*L per file."""
    en_budget = config.cache_bits
    file_budget = config.frac_cache * config.file_bits
    for en in range(1, allocation.num_ens + 1):
        if allocation.en_bits(en) > en_budget:
            return False
        for n in range(1, config.library_size + 1):
            if allocation.en_file_bits(en, n) > file_budget:
                return False
    return True


@dataclass(frozen=True)
class DeliveryAssignment:
    """Who delivers which bits of each requested file.

    `unicast` maps (en, user) to fragments EN `en` alone owes user `user`
    (the X-channel messages); `cooperative` maps a user to fragments every
    EN caches and can beamform jointly.
    """

    unicast: dict[tuple[int, int], tuple[Fragment, ...]]
    cooperative: dict[int, tuple[Fragment, ...]]
    outstanding_bits: tuple[int, ...]

    def fragments_for_user(self, user: int) -> list[tuple[Fragment, int | None]]:
        """All (fragment, serving EN) pairs for a user; EN None = cooperative."""
        pairs = [(f, None) for f in self.cooperative.get(user, ())]
        for (en, k), frags in self.unicast.items():
            if k == user:
                pairs.extend((f, en) for f in frags)
        return sorted(pairs, key=lambda item: item[0].start_bit)


def assignment_for_demand(allocation: CacheAllocation,
                          demand: DemandVector) -> DeliveryAssignment:
    """Map every requested bit to the EN (or EN set) that caches it."""
    unicast: dict[tuple[int, int], tuple[Fragment, ...]] = {}
    cooperative: dict[int, tuple[Fragment, ...]] = {}
    for user, file_index in enumerate(demand.demands, start=1):
        for en in range(1, allocation.num_ens + 1):
            exclusive = []
            for cf in allocation.cached_fragments(en, file_index):
                frag = cf.fragment
                held_by_all = all(
                    _covers(allocation, other, frag)
                    for other in range(1, allocation.num_ens + 1)
                )
                if held_by_all:
                    existing = cooperative.get(user, ())
                    if frag not in existing:
                        cooperative[user] = existing + (frag,)
                else:
                    exclusive.append(frag)
            if exclusive:
                unicast[(en, user)] = tuple(exclusive)
    assignment = DeliveryAssignment(unicast, cooperative, ())
    outstanding = []
    for user, file_index in enumerate(demand.demands, start=1):
        frags = [frag for frag, _ in assignment.fragments_for_user(user)]
        _check_partition(frags, user, file_index, allocation.file_bits)
        outstanding.append(sum(f.num_bits for f in frags))
    return DeliveryAssignment(unicast, cooperative, tuple(outstanding))


def _covers(allocation: CacheAllocation, en: int, frag: Fragment) -> bool:
    return any(
        cf.fragment.start_bit <= frag.start_bit
        and cf.fragment.end_bit >= frag.end_bit
        for cf in allocation.cached_fragments(en, frag.file_index)
    )


def _check_partition(frags, user, file_index, file_bits) -> None:
    """Assigned fragments must tile [0, L) exactly once."""
    cursor = 0
    for frag in sorted(frags, key=lambda f: f.start_bit):
        if frag.start_bit != cursor:
            raise CoverageError(
                f"user {user}: bits [{cursor}, {frag.start_bit}) of file "
                f"{file_index} are cached nowhere or assigned twice"
            )
        cursor = frag.end_bit
    if cursor != file_bits:
        raise CoverageError(
            f"user {user}: bits [{cursor}, {file_bits}) of file {file_index} "
            "are cached nowhere"
        )
