"""
Rateless transmission over a BSC by layering, interleaving and stacking.

Each layer is an MLC frame with a biased symbol distribution. Blocks are
the XOR of freshly interleaved copies of every layer; the receiver adds
block LLRs per layer and peels layers off from the top one down.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .infotheory import binary_convolve, binary_entropy, bsc_nui_rate, stack_convolve
from .mapper import build_threshold_mapper, is_dyadic
from .mlc_codec import (DEFAULT_BACKOFF, MlcConfig, mlc_encode, msd_decode_soft,
                        provision_mlc)
from .polar import crc16

CRC_CHOICES = (0, 16)
TRIAL_COLUMNS = ("true_h", "seed", "blocks_used", "realized_rate", "ideal_m", "success")


@dataclass
class RatelessConfig:
    layer_p: Sequence[float]
    h_min: float
    layer_mlc: Sequence[MlcConfig]
    base_seed: int = 0
    crc_bits: int = 16
    max_blocks: int = 32

    def __post_init__(self):
        self.layer_p = [float(p) for p in self.layer_p]
        self.layer_mlc = list(self.layer_mlc)
        if not self.layer_p or len(self.layer_p) != len(self.layer_mlc):
            raise ValueError("need one MLC configuration per layer")
        if any(not 0.0 < p < 0.5 for p in self.layer_p):
            raise ValueError("layer probabilities must lie in (0, 1/2)")
        for p, cfg in zip(self.layer_p, self.layer_mlc):
            if abs(cfg.mapper.p1 - p) > 1e-12:
                raise ValueError("layer mapper does not realise its probability")
        if len({cfg.n for cfg in self.layer_mlc}) != 1:
            raise ValueError("all layers must share the block length")
        if self.crc_bits not in CRC_CHOICES:
            raise ValueError("crc_bits must be 0 or 16")
        if any(sum(cfg.ks) <= self.crc_bits for cfg in self.layer_mlc):
            raise ValueError("a layer has no room for payload beside its CRC")
        if not 0.0 < self.h_min < 0.5:
            raise ValueError("need 0 < h_min < 1/2")
        if self.r_max > 1.0 - binary_entropy(self.h_min) + 1e-9:
            raise ValueError("mother rate exceeds the capacity at h_min")
        if self.max_blocks < 1:
            raise ValueError("max_blocks must be positive")

    @property
    def N(self) -> int:
        return len(self.layer_p)

    @property
    def n(self) -> int:
        return self.layer_mlc[0].n

    @property
    def r_max(self) -> float:
        """Provisioned mother rate, CRC bits included."""
        return sum(sum(cfg.coded_ks) for cfg in self.layer_mlc) / self.n

    @property
    def payload_rate(self) -> float:
        return sum(sum(cfg.ks) for cfg in self.layer_mlc) / self.n - self.N * self.crc_bits / self.n

    @property
    def p_all(self) -> float:
        return stack_convolve(self.layer_p)


def layer_design_h(layer_p: Sequence[float], h_min: float, layer: int) -> float:
    """Crossover seen by ``layer`` (0-based) once every higher layer is gone."""
    return binary_convolve(stack_convolve(list(layer_p)[:layer]), h_min)


def provision_rateless(layer_p: Sequence[float], h_min: float, n: int, levels: int = 2,
                       backoff: float = DEFAULT_BACKOFF, family: str = "polar",
                       base_seed: int = 0, crc_bits: int = 16, max_blocks: int = 32,
                       list_size: int = 8, trials: int = 2000,
                       min_level_bits: int = 1) -> RatelessConfig:
    """Threshold-mapper MLC per layer, sized for its genie-order channel.

    Layer rates then add up to I(X_all; Y) at h_min by the layering chain
    rule, before back-off. Levels worth fewer than ``min_level_bits`` are
    frozen: a short code fails often and its errors propagate upward.
    """
    mlcs = []
    for i, p in enumerate(layer_p):
        if not is_dyadic(p, levels):
            raise ValueError(f"layer probability {p} is not a multiple of 2^-{levels}")
        mapper = build_threshold_mapper(levels, int(round(p * 2 ** levels)))
        mlcs.append(provision_mlc(mapper, n, layer_design_h(layer_p, h_min, i), backoff,
                                  seed=base_seed + 104729 * (i + 1), family=family,
                                  list_size=list_size, trials=trials,
                                  min_level_bits=min_level_bits, dither=True,
                                  level_crc=True))
    return RatelessConfig(layer_p, h_min, mlcs, base_seed, crc_bits, max_blocks)


def interleaver(base_seed: int, layer: int, block: int, n: int) -> np.ndarray:
    return np.random.default_rng([base_seed, layer, block]).permutation(n)


def _split_levels(bits: np.ndarray, ks: Sequence[int]) -> list[np.ndarray]:
    return np.split(bits, np.cumsum(ks)[:-1])


def _frame_bits(payload: np.ndarray, crc_bits: int) -> np.ndarray:
    if not crc_bits:
        return payload
    return np.concatenate([payload, crc16(payload)])


def _crc_check(crc_bits: int):
    def check(msgs: list) -> bool:
        bits = np.concatenate(msgs)
        if not crc_bits:
            return True
        return bool(np.array_equal(crc16(bits[:-crc_bits]), bits[-crc_bits:]))
    return check


@dataclass
class DecodeReport:
    layer_success: list[bool]
    payloads: list[np.ndarray | None]
    realized_rate: float

    @property
    def success(self) -> bool:
        return all(self.layer_success)


@dataclass
class RatelessSession:
    """Transmitter and receiver state of one rateless frame."""

    config: RatelessConfig
    payloads: list[np.ndarray]
    symbols: np.ndarray
    blocks_sent: int = 0
    received: list[np.ndarray] = field(default_factory=list)
    residual: list[np.ndarray] = field(default_factory=list)
    decoded: list[bool] = field(default_factory=list)
    recovered: list[np.ndarray | None] = field(default_factory=list)
    # receiver-side re-encodings of decoded layers
    reencoded: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.decoded:
            self.decoded = [False] * self.config.N
            self.recovered = [None] * self.config.N

    @classmethod
    def start(cls, config: RatelessConfig, seed) -> "RatelessSession":
        """Draw random payloads and encode every layer once."""
        rng = np.random.default_rng(seed)
        payloads, rows = [], []
        for cfg in config.layer_mlc:
            payload = rng.integers(0, 2, sum(cfg.ks) - config.crc_bits, dtype=np.uint8)
            payloads.append(payload)
            frame = _frame_bits(payload, config.crc_bits)
            rows.append(mlc_encode(cfg, _split_levels(frame, cfg.ks)))
        return cls(config, payloads, np.stack(rows).astype(np.uint8))

    def receive(self, block) -> None:
        block = np.asarray(block, dtype=np.uint8)
        if len(self.received) >= self.blocks_sent:
            raise RuntimeError("more blocks received than sent")
        if block.shape != (self.config.n,):
            raise ValueError("block length mismatch")
        b = len(self.received)
        self.received.append(block)
        res = block.copy()
        for i, done in enumerate(self.decoded):
            if done:
                res ^= self.reencoded[i][interleaver(self.config.base_seed, i, b, self.config.n)]
        self.residual.append(res)


def next_block(session: RatelessSession) -> np.ndarray:
    cfg = session.config
    if session.blocks_sent >= cfg.max_blocks:
        raise RuntimeError("block cap reached")
    b = session.blocks_sent
    block = np.zeros(cfg.n, dtype=np.uint8)
    for i in range(cfg.N):
        block ^= session.symbols[i][interleaver(cfg.base_seed, i, b, cfg.n)]
    session.blocks_sent += 1
    return block


def transmit_bsc(block, h: float, seed) -> np.ndarray:
    if not 0.0 <= h <= 0.5:
        raise ValueError("need 0 <= h <= 1/2")
    block = np.asarray(block, dtype=np.uint8)
    flips = np.random.default_rng(seed).random(block.shape) < h
    return block ^ flips.astype(np.uint8)


def blocks_needed(r_max: float, per_block_rate: float, cap: int | None = None) -> int | None:
    """Smallest m with m * per_block_rate >= r_max; None when unreachable."""
    if per_block_rate <= 0.0:
        return None
    m = max(1, math.ceil(r_max / per_block_rate - 1e-12))
    return m if cap is None or m <= cap else None


def stopping_check(blocks: int, h: float, config: RatelessConfig) -> bool:
    if blocks < 1:
        raise ValueError("need at least one block")
    return blocks * bsc_nui_rate(config.p_all, h) >= config.r_max - 1e-12


def ideal_blocks(config: RatelessConfig, h: float) -> int | None:
    return blocks_needed(config.r_max, bsc_nui_rate(config.p_all, h), config.max_blocks)


def layer_llrs(session: RatelessSession, layer: int, h: float) -> np.ndarray:
    """Symbol LLRs of ``layer`` summed over all residual blocks."""
    cfg = session.config
    others = [p for j, p in enumerate(cfg.layer_p) if j != layer and not session.decoded[j]]
    h_eff = binary_convolve(stack_convolve(others), h)
    if h_eff >= 0.5:
        return np.zeros(cfg.n)
    if h_eff <= 0.0:
        weight = 60.0
    else:
        weight = math.log((1.0 - h_eff) / h_eff)
    acc = np.zeros(cfg.n)
    for b, res in enumerate(session.residual):
        perm = interleaver(cfg.base_seed, layer, b, cfg.n)
        seen = np.empty(cfg.n, dtype=np.int64)
        seen[perm] = res
        acc += weight * (1.0 - 2.0 * seen)
    return acc


def combine_and_decode(session: RatelessSession, h: float,
                       max_iters: int = 100) -> DecodeReport:
    """Try every undecoded layer, top layer first, peeling off successes."""
    cfg = session.config
    if not session.residual:
        raise ValueError("no blocks received")
    check = _crc_check(cfg.crc_bits)
    for i in reversed(range(cfg.N)):
        if session.decoded[i]:
            continue
        mlc = cfg.layer_mlc[i]
        res = msd_decode_soft(mlc, layer_llrs(session, i, h), max_iters, check=check)
        if not (res.success and check(res.messages)):
            continue
        bits = np.concatenate(res.messages)
        session.recovered[i] = bits[:bits.size - cfg.crc_bits]
        symbols = mlc_encode(mlc, res.messages)
        session.reencoded[i] = symbols
        for b in range(len(session.residual)):
            session.residual[b] ^= symbols[interleaver(cfg.base_seed, i, b, cfg.n)]
        session.decoded[i] = True
    blocks = max(len(session.residual), 1)
    return DecodeReport(list(session.decoded), list(session.recovered),
                        cfg.payload_rate / blocks)


@dataclass
class TrialRecord:
    true_h: float
    seed: int
    blocks_used: int
    realized_rate: float
    ideal_m: int | None
    success: bool

    def row(self) -> dict:
        return {"true_h": self.true_h, "seed": self.seed, "blocks_used": self.blocks_used,
                "realized_rate": self.realized_rate,
                "ideal_m": "" if self.ideal_m is None else self.ideal_m,
                "success": int(self.success)}


def run_trial(config: RatelessConfig, true_h: float, seed: int) -> TrialRecord:
    """Send blocks until every layer passes its CRC or the cap is hit.

    A successful trial also requires the recovered payloads to be correct,
    so undetected CRC errors count as failures.
    """
    if true_h < config.h_min:
        raise ValueError("true crossover below h_min")
    session = RatelessSession.start(config, [seed, 0])
    report = None
    while session.blocks_sent < config.max_blocks:
        block = next_block(session)
        session.receive(transmit_bsc(block, true_h, [seed, 1, session.blocks_sent]))
        report = combine_and_decode(session, true_h)
        if report.success:
            break
    correct = report is not None and report.success and all(
        np.array_equal(a, b) for a, b in zip(report.payloads, session.payloads))
    m = session.blocks_sent
    rate = config.payload_rate / m if correct else 0.0
    return TrialRecord(true_h, seed, m, rate, ideal_blocks(config, true_h), correct)


def run_batch(config: RatelessConfig, h_list: Sequence[float], trials: int,
              base_seed: int = 0) -> list[TrialRecord]:
    return [run_trial(config, h, base_seed + t) for h in h_list for t in range(trials)]


def write_trials_csv(records: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRIAL_COLUMNS)
        w.writeheader()
        for rec in records:
            row = rec.row()
            for key in ("true_h", "realized_rate"):
                row[key] = format(row[key], ".15g")
            w.writerow(row)
