"""System parameters, channel model, file library and demand vectors.

Conventions used throughout the package: M edge nodes (ENs) serve K
single-antenna users over a shared real-valued AWGN channel. The library
holds N files of L bits each and every EN caches at most mu*N*L bits, with
mu in [1/M, 1] so the ENs can collectively store the whole library. Channel
coefficients are real standard-normal draws, i.i.d. across (user, EN) pairs
and constant within a transmission interval.

The fractional cache size mu is kept as an exact rational everywhere, never
a float, so downstream bound maximisation and envelope corner matching are
exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ArgumentError, DemandError, FeasibilityError, RangeError


def as_fraction(value) -> Fraction:
    """Coerce to an exact rational. Floats are rejected on purpose."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ArgumentError(f"cannot parse rational from {value!r}") from exc
    raise ArgumentError(
        f"expected Fraction, int or 'p/q' string, got {type(value).__name__}"
    )


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of an M x K cache-aided network."""

    num_ens: int          # M
    num_users: int        # K
    library_size: int     # N
    frac_cache: Fraction  # mu
    file_bits: int        # L

    @property
    def cache_bits(self) -> Fraction:
        """Per-EN cache budget mu*N*L, exact."""
        return self.frac_cache * self.library_size * self.file_bits


def validate_config(num_ens, num_users, library_size, frac_cache,
                    file_bits) -> SystemConfig:
    """Validate network parameters and return an immutable config.

    Raises ArgumentError for non-positive sizes, DemandError when the
    library cannot supply K distinct files, and FeasibilityError when the
    collective cache of the M ENs cannot hold the library (mu < 1/M) or
    mu exceeds 1.
    """
    for name, value in (("num_ens", num_ens), ("num_users", num_users),
                        ("library_size", library_size), ("file_bits", file_bits)):
        if not isinstance(value, int) or value < 1:
            raise ArgumentError(f"{name} must be a positive integer, got {value!r}")
    mu = as_fraction(frac_cache)
    if library_size < num_users:
        raise DemandError(
            f"library_size {library_size} < num_users {num_users}: "
            "no worst-case demand of distinct files exists"
        )
    if mu < Fraction(1, num_ens):
        raise FeasibilityError(
            f"frac_cache {mu} < 1/{num_ens}: collective cache cannot hold the library"
        )
    if mu > 1:
        raise FeasibilityError(f"frac_cache {mu} > 1: cache larger than the library")
    return SystemConfig(num_ens, num_users, library_size, mu, file_bits)


@dataclass(frozen=True)
class ChannelRealization:
    """One K x M matrix of channel coefficients plus the seed that drew it."""

    coefficients: np.ndarray
    seed: int

    @property
    def num_users(self) -> int:
        return self.coefficients.shape[0]

    @property
    def num_ens(self) -> int:
        return self.coefficients.shape[1]


def sample_channel(config: SystemConfig, seed: int) -> ChannelRealization:
    """Draw a K x M matrix of i.i.d. standard-normal coefficients.

    Deterministic for a fixed seed; entries are always finite.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((config.num_users, config.num_ens))
    if not np.all(np.isfinite(coeffs)):
        raise ArgumentError("channel sampling produced a non-finite entry")
    coeffs.flags.writeable = False
    return ChannelRealization(coeffs, seed)


@dataclass(frozen=True)
class DemandVector:
    """File indices (1-based) requested by users 1..K."""

    demands: tuple[int, ...]

    @classmethod
    def worst_case(cls, config: SystemConfig) -> "DemandVector":
        """K distinct files; possible since N >= K."""
        return cls(tuple(range(1, config.num_users + 1)))

    def validate(self, config: SystemConfig) -> None:
        if len(self.demands) != config.num_users:
            raise ArgumentError(
                f"demand vector has {len(self.demands)} entries, expected "
                f"{config.num_users}"
            )
        for d in self.demands:
            if not isinstance(d, int) or not 1 <= d <= config.library_size:
                raise ArgumentError(
                    f"demand {d!r} outside library range [1, {config.library_size}]"
                )


@dataclass(frozen=True)
class FileLibrary:
    """N files of exactly L bits each, stored as read-only 0/1 uint8 arrays."""

    files: tuple[np.ndarray, ...]

    @classmethod
    def random(cls, config: SystemConfig, seed: int) -> "FileLibrary":
        rng = np.random.default_rng(seed)
        files = []
        for _ in range(config.library_size):
            bits = rng.integers(0, 2, size=config.file_bits, dtype=np.uint8)
            bits.flags.writeable = False
            files.append(bits)
        return cls(tuple(files))

    @property
    def num_files(self) -> int:
        return len(self.files)

    @property
    def file_bits(self) -> int:
        return len(self.files[0])

    def file(self, index: int) -> np.ndarray:
        """1-based file lookup."""
        if not 1 <= index <= self.num_files:
            raise RangeError(f"file index {index} outside [1, {self.num_files}]")
        return self.files[index - 1]


def submatrix(matrix: np.ndarray, row_range: tuple[int, int],
              col_range: tuple[int, int]) -> np.ndarray:
    """Extract the 1-based inclusive block rows [a:b] x cols [c:d].

    Entry (i, j) of the result is matrix[a+i-1, c+j-1], matching the
    analytical sub-matrix notation used by the converse machinery.
    """
    a, b = row_range
    c, d = col_range
    rows, cols = matrix.shape
    if not (1 <= a <= b <= rows):
        raise RangeError(f"row range [{a}:{b}] invalid for {rows} rows")
    if not (1 <= c <= d <= cols):
        raise RangeError(f"col range [{c}:{d}] invalid for {cols} cols")
    return matrix[a - 1:b, c - 1:d].copy()
