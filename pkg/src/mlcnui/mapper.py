"""
Deterministic mappers from m uniform bits to a channel symbol.

A word ``(w_1, ..., w_m)`` is identified with the integer whose most
significant bit is ``w_1``; ``table[j]`` is the symbol for the word with
value ``j``. Level 1 is therefore the MSB and is decoded first by MSD.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DeterministicMapper:
    m: int
    table: tuple[int, ...]
    output_alphabet_size: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("mapper needs at least one bit level")
        table = tuple(int(t) for t in self.table)
        if len(table) != 2 ** self.m:
            raise ValueError(f"table must have 2^{self.m} entries, got {len(table)}")
        if any(t < 0 or t >= self.output_alphabet_size for t in table):
            raise ValueError("table entry outside the output alphabet")
        object.__setattr__(self, "table", table)

    @property
    def p1(self) -> float:
        """P(X = 1) under uniform words (binary-output mappers)."""
        return float(induced_distribution(self)[1])

    def word_bits(self) -> np.ndarray:
        """``(2^m, m)`` array; row ``j`` holds the level bits of word ``j``."""
        j = np.arange(2 ** self.m)
        shifts = np.arange(self.m - 1, -1, -1)
        return ((j[:, None] >> shifts) & 1).astype(np.uint8)

    def map_bits(self, levels: np.ndarray) -> np.ndarray:
        """Map an ``(m, n)`` array of level bits to ``n`` channel symbols."""
        levels = np.asarray(levels, dtype=np.int64)
        if levels.ndim != 2 or levels.shape[0] != self.m:
            raise ValueError(f"expected ({self.m}, n) level bits")
        idx = np.zeros(levels.shape[1], dtype=np.int64)
        for row in levels:
            idx = (idx << 1) | (row & 1)
        return np.asarray(self.table, dtype=np.uint8)[idx]

    def to_line(self) -> str:
        return f"m={self.m} table={','.join(map(str, self.table))}"

    @classmethod
    def from_line(cls, line: str) -> "DeterministicMapper":
        match = re.fullmatch(r"\s*m=(\d+)\s+table=([\d,\s]+?)\s*", line)
        if match is None:
            raise ValueError(f"cannot parse mapper line {line!r}")
        table = tuple(int(t) for t in match.group(2).split(","))
        size = max(2, max(table) + 1)
        return cls(int(match.group(1)), table, size)


@dataclass(frozen=True)
class TimeShareSplit:
    """``lam`` of the symbols use the k/2^m mapper, the rest (k+1)/2^m."""

    k: int
    m: int
    lam: float

    def __post_init__(self):
        if not 0 <= self.k <= 2 ** self.m:
            raise ValueError("k out of range")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("time-sharing fraction must lie in [0, 1]")

    @property
    def p_low(self) -> float:
        return self.k / 2 ** self.m

    @property
    def p_high(self) -> float:
        return (self.k + 1) / 2 ** self.m

    @property
    def p_mix(self) -> float:
        return self.lam * self.p_low + (1.0 - self.lam) * self.p_high


def build_threshold_mapper(m: int, k: int) -> DeterministicMapper:
    """Binary mapper sending the ``k`` largest words to 1, so P(X=1) = k/2^m.

    The all-zero word always maps to 0 (for k < 2^m).
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    size = 2 ** m
    if not 0 <= k <= size:
        raise ValueError(f"k must lie in [0, {size}], got {k}")
    table = tuple(1 if j >= size - k else 0 for j in range(size))
    return DeterministicMapper(m, table, 2)


def induced_distribution(mapper: DeterministicMapper) -> np.ndarray:
    counts = np.bincount(mapper.table, minlength=mapper.output_alphabet_size)
    # counts / 2^m is an exact dyadic float
    return counts / float(2 ** mapper.m)


def dyadic_approximation(p_target: float, m: int) -> int:
    """Nearest k/2^m to ``p_target``; ties go to the smaller k."""
    if not 0.0 <= p_target <= 1.0:
        raise ValueError("p_target must lie in [0, 1]")
    scaled = p_target * 2 ** m
    k = math.ceil(scaled - 0.5)
    return int(min(max(k, 0), 2 ** m))


def is_dyadic(p: float, m: int) -> bool:
    scaled = p * 2 ** m
    return scaled == math.floor(scaled)


def timeshare_split(p_target: float, m: int) -> TimeShareSplit:
    if not 0.0 <= p_target <= 1.0:
        raise ValueError("p_target must lie in [0, 1]")
    scaled = p_target * 2 ** m
    k = math.floor(scaled)
    if k == scaled:
        return TimeShareSplit(k, m, 1.0)
    return TimeShareSplit(k, m, (k + 1) - scaled)
