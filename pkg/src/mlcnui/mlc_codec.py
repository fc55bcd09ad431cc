"""
Multilevel encoder and multistage decoder for a binary-output mapper.

Level i carries an independent linear code; symbol t is the mapper applied
to the i-th bits of all codewords at position t. The decoder walks the
levels in order, feeding hard decisions of earlier levels to the demapper.

Level codes are either regular LDPC codes (belief propagation) or polar
codes (list decoding) constructed for the exact level channel.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .codes import DecodeResult, LinearCode, bp_decode, encode, make_regular_ldpc
from .infotheory import Dmc, bsc_nui_rate
from .mapper import DeterministicMapper, build_threshold_mapper, timeshare_split
from .polar import PolarCode, construct_polar, polar_decode
from .rate_analysis import layer_rates

DEFAULT_BACKOFF = 0.25
FAMILIES = ("ldpc", "polar")
LEVEL_CRC_MIN_K = 64

LevelCode = Union[LinearCode, PolarCode]


@dataclass
class MlcConfig:
    mapper: DeterministicMapper
    codes: Sequence[LevelCode]
    design_h: float
    backoff: float = DEFAULT_BACKOFF
    # known per-level offsets; each level then sends a coset of its code
    dither: np.ndarray | None = None

    def __post_init__(self):
        self.codes = list(self.codes)
        if len(self.codes) != self.mapper.m:
            raise ValueError("need one code per mapper level")
        if len({c.n for c in self.codes}) != 1:
            raise ValueError("all level codes must share the block length")
        if not 0.0 <= self.backoff < 1.0:
            raise ValueError("back-off must lie in [0, 1)")
        if self.mapper.output_alphabet_size != 2:
            raise ValueError("only binary-output mappers are supported")
        if self.dither is not None:
            self.dither = np.asarray(self.dither, dtype=np.uint8) & 1
            if self.dither.shape != (self.mapper.m, self.n):
                raise ValueError("dither must have shape (levels, n)")

    @property
    def offsets(self) -> np.ndarray:
        if self.dither is None:
            return np.zeros((self.mapper.m, self.n), dtype=np.uint8)
        return self.dither

    @property
    def n(self) -> int:
        return self.codes[0].n

    @property
    def ks(self) -> list[int]:
        return [c.k for c in self.codes]

    @property
    def rate(self) -> float:
        return sum(self.ks) / self.n

    @property
    def coded_ks(self) -> list[int]:
        """Information channels per level: payload plus any level CRC."""
        return [c.k + getattr(c, "crc_bits", 0) if c.k else 0 for c in self.codes]


def _backed_off_code(n: int, target: float, col_weight: int, seed: int) -> LinearCode:
    """LDPC code with exactly floor(n * target) information bits."""
    k_target = int(math.floor(n * target + 1e-9))
    if k_target < 1:
        return LinearCode.frozen(n)
    code = make_regular_ldpc(n, k_target / n, col_weight, seed)
    if code.k > k_target:
        code = shorten(code, k_target)
    return code


def shorten(code: LinearCode, k: int) -> LinearCode:
    """Subcode fixing the trailing info bits to zero (degree-1 checks)."""
    if not 0 <= k <= code.k:
        raise ValueError("cannot shorten to a larger dimension")
    drop = code.info_positions[k:]
    extra = sp.csr_matrix((np.ones(len(drop), dtype=np.uint8),
                           (np.arange(len(drop)), drop)), shape=(len(drop), code.n))
    return LinearCode(code.generator[:k], sp.vstack([code.parity, extra]).tocsr(),
                      code.info_positions[:k])


def _symbol_llrs(channel: Dmc, received) -> np.ndarray:
    T = channel.transition
    with np.errstate(divide="ignore"):
        table = np.log(T[0]) - np.log(T[1])
    return table[np.asarray(received, dtype=np.int64)]


def _sample_channel(channel: Dmc, symbols: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(channel.transition, axis=1)
    draw = rng.random(symbols.shape)
    return (draw[..., None] > cdf[symbols][..., :-1]).sum(axis=-1)


def level_sampler(mapper: DeterministicMapper, level: int, channel: Dmc):
    """LLR sampler of the genie-aided level channel (``level`` 0-based).

    Earlier levels are known to the decoder, later ones are uniform
    nuisance bits; used to rank polar bit channels.
    """
    table = np.asarray(mapper.table, dtype=np.int64)
    m = mapper.m

    def sample(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        B, n = x.shape
        bits = rng.integers(0, 2, size=(m, B, n), dtype=np.int64)
        bits[level] = x
        index = np.zeros((B, n), dtype=np.int64)
        for row in bits:
            index = (index << 1) | row
        y = _sample_channel(channel, table[index], rng)
        lam = np.clip(_symbol_llrs(channel, y), -60.0, 60.0).ravel()
        known = bits[:level].reshape(level, B * n)
        return demap_soft(mapper, lam, level, known).reshape(B, n)

    return sample


def provision_mlc(mapper: DeterministicMapper, n: int, design_h: float,
                  backoff: float = DEFAULT_BACKOFF, col_weight: int = 3,
                  seed: int = 0, channel: Dmc | None = None, family: str = "ldpc",
                  list_size: int = 8, trials: int = 1000,
                  min_level_bits: int = 1, dither: bool = False,
                  level_crc: bool = False) -> MlcConfig:
    """Build level codes at rate (1 - backoff) * I(W_i; Y | W_<i).

    Levels whose backed-off rate gives fewer than ``min_level_bits``
    information bits are frozen to zeros. ``family="polar"`` needs a power-of-two ``n``; its codes
    are ranked on ``trials`` sampled frames of each level channel. With
    ``dither`` every level is offset by a seeded uniform sequence, so frozen
    levels still carry uniform (known) bits and the symbol law is kept.
    ``level_crc`` spends 16 of the information channels of every polar level
    but the last informative one on a CRC that steers its list decoder; only
    levels with at least LEVEL_CRC_MIN_K channels get one.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown code family {family!r}")
    channel = channel if channel is not None else Dmc.bsc(design_h)
    rates = layer_rates(mapper, channel).per_layer_rates
    ks = [int(math.floor(n * (1.0 - backoff) * r + 1e-9)) for r in rates]
    ks = [k if k >= max(min_level_bits, 1) else 0 for k in ks]
    last = max((i for i, k in enumerate(ks) if k), default=-1)
    codes: list[LevelCode] = []
    for i, (k, r) in enumerate(zip(ks, rates)):
        if k == 0:
            codes.append(LinearCode.frozen(n))
        elif family == "ldpc":
            codes.append(_backed_off_code(n, (1.0 - backoff) * r, col_weight, seed + 7919 * i))
        else:
            crc = 16 if level_crc and i != last and k >= LEVEL_CRC_MIN_K else 0
            codes.append(construct_polar(n, k - crc, level_sampler(mapper, i, channel),
                                         trials, seed + 7919 * i, crc_bits=crc,
                                         list_size=list_size, interleave=True))
    offsets = None
    if dither:
        offsets = np.random.default_rng([seed, n, 1]).integers(0, 2, (mapper.m, n), dtype=np.uint8)
    return MlcConfig(mapper, codes, design_h, backoff, offsets)


def encode_level(code: LevelCode, message) -> np.ndarray:
    if isinstance(code, PolarCode):
        return code.encode(message)
    return encode(code, message)


def decode_level(code: LevelCode, llr, max_iters: int = 100) -> DecodeResult:
    if isinstance(code, PolarCode):
        return polar_decode(code, llr)
    return bp_decode(code, llr, max_iters)


def mlc_encode(config: MlcConfig, messages: Sequence) -> np.ndarray:
    codewords = level_codewords(config, messages)
    return config.mapper.map_bits(codewords ^ config.offsets)


def level_codewords(config: MlcConfig, messages: Sequence) -> np.ndarray:
    if len(messages) != config.mapper.m:
        raise ValueError("need one message per level")
    return np.stack([encode_level(c, msg) for c, msg in zip(config.codes, messages)])


def random_messages(config: MlcConfig, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.integers(0, 2, c.k, dtype=np.uint8) for c in config.codes]


@functools.lru_cache(maxsize=256)
def _ones_fraction(mapper: DeterministicMapper, level: int) -> np.ndarray:
    """frac[d, b]: share of completions mapping to 1, given prefix d and bit b.

    ``level`` is 0-based; ``d`` indexes the earlier levels MSB first.
    """
    table = np.asarray(mapper.table, dtype=float)
    return table.reshape(2 ** level, 2, -1).mean(axis=2)


def _log_mix(frac: np.ndarray, l0: np.ndarray, l1: np.ndarray) -> np.ndarray:
    """log((1 - frac) e^l0 + frac e^l1) without log(0) warnings."""
    with np.errstate(divide="ignore"):
        a = np.where(frac < 1.0, np.log1p(-frac) + l0, -np.inf)
        b = np.where(frac > 0.0, np.log(frac) + l1, -np.inf)
    return np.logaddexp(a, b)


def demap_soft(mapper: DeterministicMapper, symbol_llrs, level: int,
               decided: np.ndarray | None = None) -> np.ndarray:
    """Per-position LLRs of level bit ``level`` (0-based).

    ``symbol_llrs`` are log P(obs | X=0) / P(obs | X=1). Earlier levels are
    fixed to ``decided`` (shape ``(level, n)``); later levels are averaged
    uniformly through the mapper table.
    """
    lam = np.asarray(symbol_llrs, dtype=float)
    frac = _ones_fraction(mapper, level)
    if level == 0:
        prefix = np.zeros(lam.shape, dtype=np.int64)
    else:
        decided = np.asarray(decided, dtype=np.int64).reshape(level, -1)
        prefix = np.zeros(decided.shape[1], dtype=np.int64)
        for row in decided:
            prefix = (prefix << 1) | (row & 1)
    l0 = -np.logaddexp(0.0, -lam)
    l1 = -np.logaddexp(0.0, lam)
    out = _log_mix(frac[prefix, 0], l0, l1) - _log_mix(frac[prefix, 1], l0, l1)
    # both hypotheses impossible only at infinite symbol LLRs; treat as erasure
    return np.nan_to_num(out, nan=0.0)


def bsc_symbol_llrs(received, h: float) -> np.ndarray:
    if not 0.0 < h < 0.5:
        raise ValueError("need 0 < h < 1/2")
    y = np.asarray(received, dtype=float)
    return (1.0 - 2.0 * y) * math.log((1.0 - h) / h)


def demap_llr(mapper: DeterministicMapper, received: int, h: float, level: int,
              decided: Sequence[int] = ()) -> float:
    """LLR of level bit ``level`` (1-based) for one hard BSC output."""
    if not 1 <= level <= mapper.m:
        raise ValueError("level out of range")
    decided = list(decided)
    if len(decided) != level - 1:
        raise ValueError("need decisions for every earlier level")
    lam = bsc_symbol_llrs([received], h)
    dec = np.asarray(decided, dtype=np.int64).reshape(level - 1, 1)
    return float(demap_soft(mapper, lam, level - 1, dec)[0])


@dataclass
class MsdResult:
    messages: list[np.ndarray]
    codewords: np.ndarray
    converged: list[bool]

    @property
    def success(self) -> bool:
        return all(self.converged)


def msd_decode_soft(config: MlcConfig, symbol_llrs, max_iters: int = 100,
                    genie: np.ndarray | None = None,
                    check: Callable[[list], bool] | None = None) -> MsdResult:
    """Multistage decoding from per-symbol LLRs.

    Every level is attempted even when an earlier one fails. With ``genie``
    (true level codewords) the demapper conditions on the true bits instead
    of the decisions. ``check`` receives the list of all level messages; the
    last informative level then keeps the best list candidate it accepts,
    and that level's flag reports the verdict.
    """
    lam = np.asarray(symbol_llrs, dtype=float)
    if lam.size != config.n:
        raise ValueError("received length does not match the block length")
    m = config.mapper.m
    words = np.zeros((m, config.n), dtype=np.uint8)
    offsets = config.offsets
    msgs, flags = [], []
    last = max((i for i, c in enumerate(config.codes) if c.k), default=-1)
    for i, code in enumerate(config.codes):
        cond = (genie[:i] if genie is not None else words[:i]) ^ offsets[:i]
        if code.k == 0:
            flags.append(True)
            msgs.append(np.zeros(0, dtype=np.uint8))
            continue
        llr = demap_soft(config.mapper, lam, i, cond) * (1.0 - 2.0 * offsets[i])
        if check is not None and i == last:
            word, ok = _checked_level(code, llr, max_iters, msgs, check)
        else:
            res = decode_level(code, llr, max_iters)
            word, ok = res.codeword, res.converged
        words[i] = word
        msgs.append(code.message_of(word))
        flags.append(ok)
    if check is not None and last < 0:
        flags = [f and check(msgs) for f in flags]
    return MsdResult(msgs, words, flags)


def _checked_level(code: LevelCode, llr, max_iters: int, earlier: list,
                   check: Callable[[list], bool]):
    if isinstance(code, PolarCode) and code.list_size > 1:
        cands = code.candidates(llr)
        for c in cands:
            if check(earlier + [code.message_of(c)]):
                return c, True
        return cands[0], False
    res = decode_level(code, llr, max_iters)
    ok = res.converged and check(earlier + [code.message_of(res.codeword)])
    return res.codeword, ok


def msd_decode(config: MlcConfig, received, h: float, max_iters: int = 100,
               genie: np.ndarray | None = None,
               check: Callable[[list], bool] | None = None) -> MsdResult:
    """Multistage decoding of hard BSC outputs with crossover ``h``."""
    return msd_decode_soft(config, bsc_symbol_llrs(received, h), max_iters, genie, check)


def rate_budget(config: MlcConfig) -> float:
    """(1 - backoff) times the design-point channel rate: the provisioning cap."""
    return (1.0 - config.backoff) * bsc_nui_rate(config.mapper.p1, config.design_h)


@dataclass
class TimeShareConfig:
    """Two MLC configs on disjoint symbol ranges: ``low`` first, then ``high``.

    Either part may be None when the split puts every symbol on one side.
    """

    low: MlcConfig | None
    high: MlcConfig | None

    @property
    def parts(self) -> list[MlcConfig | None]:
        return [self.low, self.high]

    @property
    def n(self) -> int:
        return sum(c.n for c in self.parts if c is not None)

    @property
    def rate(self) -> float:
        return sum(sum(c.ks) for c in self.parts if c is not None) / self.n

    @property
    def p1(self) -> float:
        return sum(c.n * c.mapper.p1 for c in self.parts if c is not None) / self.n


def provision_timeshare(p_target: float, m: int, n: int, design_h: float,
                        backoff: float = DEFAULT_BACKOFF, **kwargs) -> TimeShareConfig:
    """Split n symbols between the k/2^m and (k+1)/2^m threshold mappers.

    The ranges follow ``timeshare_split``; keyword arguments go to
    ``provision_mlc`` for both parts, the high part with an offset seed.
    """
    split = timeshare_split(p_target, m)
    n_low = int(round(split.lam * n))
    seed = kwargs.pop("seed", 0)
    low = high = None
    if n_low:
        low = provision_mlc(build_threshold_mapper(m, split.k), n_low, design_h, backoff,
                            seed=seed, **kwargs)
    if n - n_low:
        high = provision_mlc(build_threshold_mapper(m, min(split.k + 1, 2 ** m)), n - n_low,
                             design_h, backoff, seed=seed + 1, **kwargs)
    return TimeShareConfig(low, high)


def timeshare_encode(config: TimeShareConfig, messages: Sequence) -> np.ndarray:
    """``messages`` holds one per-level message list per present part."""
    present = [c for c in config.parts if c is not None]
    if len(messages) != len(present):
        raise ValueError("need one message list per part")
    return np.concatenate([mlc_encode(c, msgs) for c, msgs in zip(present, messages)])


def timeshare_decode(config: TimeShareConfig, received, h: float,
                     max_iters: int = 100) -> list[MsdResult]:
    y = np.asarray(received)
    if y.size != config.n:
        raise ValueError("received length does not match the block length")
    out, start = [], 0
    for c in config.parts:
        if c is None:
            continue
        out.append(msd_decode(c, y[start:start + c.n], h, max_iters))
        start += c.n
    return out
