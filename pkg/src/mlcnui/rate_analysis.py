"""
Per-level MLC rates, competing baselines and the analytical rate curves.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .infotheory import (
    Dmc,
    JointTable,
    binary_convolve,
    binary_entropy,
    bsc_nui_rate,
    conditional_mutual_information,
    mutual_information,
    stack_convolve,
)
from .mapper import (
    DeterministicMapper,
    build_threshold_mapper,
    is_dyadic,
    timeshare_split,
)

MAX_LEVELS = 16
MAX_STACK = 12


@dataclass(frozen=True)
class LayerRateReport:
    per_layer_rates: tuple[float, ...]
    total: float
    channel_rate: float


def _word_joint(mapper: DeterministicMapper, channel: Dmc) -> np.ndarray:
    """P(w_1, ..., w_m, y) as an array of shape (2,)*m + (|Y|,)."""
    if mapper.m > MAX_LEVELS:
        raise ValueError(f"at most {MAX_LEVELS} levels supported")
    if mapper.output_alphabet_size != channel.num_inputs:
        raise ValueError("mapper output alphabet does not match channel inputs")
    rows = channel.transition[np.asarray(mapper.table)] / 2 ** mapper.m
    return rows.reshape((2,) * mapper.m + (channel.num_outputs,))


def _level_tables(joint: np.ndarray, m: int):
    """Yield, per level i, the (W_i, Y, W_<i) joint table."""
    ny = joint.shape[-1]
    for i in range(m):
        # marginalise the levels above i
        p = joint.sum(axis=tuple(range(i + 1, m))) if i + 1 < m else joint
        p = p.reshape(2 ** i, 2, ny)
        yield np.transpose(p, (1, 2, 0))


def layer_rates(mapper: DeterministicMapper, channel: Dmc) -> LayerRateReport:
    """R_i = I(W_i; Y | W_1..W_{i-1}) for uniform independent levels."""
    joint = _word_joint(mapper, channel)
    rates = tuple(conditional_mutual_information(JointTable(t))
                  for t in _level_tables(joint, mapper.m))
    px = np.bincount(mapper.table, minlength=channel.num_inputs) / 2 ** mapper.m
    channel_rate = mutual_information(channel.joint(px))
    return LayerRateReport(rates, float(sum(rates)), channel_rate)


def bicm_rate(mapper: DeterministicMapper, channel: Dmc) -> float:
    """Sum of per-level marginal rates, ignoring inter-level correlation."""
    joint = _word_joint(mapper, channel)
    total = 0.0
    for t in _level_tables(joint, mapper.m):
        total += mutual_information(JointTable(t.sum(axis=2)))
    return total


def timeshare_zeros_rate(p1: float, h: float) -> float:
    """Uniform capacity-achieving code on a 2*p1 fraction of uses, zeros elsewhere."""
    if not 0.0 <= p1 <= 0.5:
        raise ValueError("time sharing with zeros needs 0 <= p1 <= 1/2")
    return 2.0 * p1 * (1.0 - binary_entropy(h))


def _check_grid(grid: Iterable[float], name: str) -> list[float]:
    values = [float(v) for v in grid]
    for v in values:
        if not 0.0 <= v <= 0.5:
            raise ValueError(f"{name} grid value {v} outside [0, 1/2]")
    return values


def sweep_h(p1: float, m: int, h_grid: Sequence[float]) -> list[dict]:
    """Rows of (h, mlc, bicm, ts_zeros) for a fixed dyadic p1."""
    if not is_dyadic(p1, m):
        raise ValueError(f"p1={p1} is not of the form k/2^{m}")
    mapper = build_threshold_mapper(m, round(p1 * 2 ** m))
    rows = []
    for h in _check_grid(h_grid, "h"):
        channel = Dmc.bsc(h)
        rows.append({
            "h": h,
            "mlc": layer_rates(mapper, channel).total,
            "bicm": bicm_rate(mapper, channel),
            "ts_zeros": timeshare_zeros_rate(p1, h),
        })
    return rows


def envelope_rate(p1: float, h: float, m: int) -> float:
    """Rate of time sharing the two neighbouring dyadic MLC schemes."""
    split = timeshare_split(p1, m)
    rate = split.lam * bsc_nui_rate(split.p_low, h)
    if split.lam < 1.0:
        rate += (1.0 - split.lam) * bsc_nui_rate(split.p_high, h)
    return rate


def sweep_p(h: float, m: int, p_grid: Sequence[float]) -> list[dict]:
    """Rows of (p1, mlc, envelope, ts_zeros) at a fixed crossover."""
    if not 0.0 <= h <= 0.5:
        raise ValueError("h outside [0, 1/2]")
    return [{
        "p1": p,
        "mlc": bsc_nui_rate(p, h),
        "envelope": envelope_rate(p, h, m),
        "ts_zeros": timeshare_zeros_rate(p, h),
    } for p in _check_grid(p_grid, "p1")]


def write_curve_csv(rows: Sequence[dict], path, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{row[c]:.15g}" for c in columns])


@dataclass(frozen=True)
class ChainIdentityReport:
    layered_sum: float
    conditional_chain: float
    stacked_rate: float

    @property
    def max_discrepancy(self) -> float:
        vals = (self.layered_sum, self.conditional_chain, self.stacked_rate)
        return max(vals) - min(vals)


def _stack_joint(p_list: Sequence[float], h: float) -> np.ndarray:
    """P(x_1, ..., x_n, y_n) by enumerating all inputs and the noise bit."""
    n = len(p_list)
    joint = np.zeros((2,) * n + (2,))
    for bits in itertools.product((0, 1), repeat=n):
        px = 1.0
        for b, p in zip(bits, p_list):
            px *= p if b else 1.0 - p
        parity = sum(bits) & 1
        for e, pe in ((0, 1.0 - h), (1, h)):
            joint[bits + (parity ^ e,)] += px * pe
    return joint


def layering_chain_identity(p_list: Sequence[float], h: float) -> ChainIdentityReport:
    """Check that XOR stacking of independent layers loses no rate.

    Compares the sum of per-layer rates over their effective channels, the
    conditional chain sum decoded from the top layer down, and the rate of
    the stacked input, all for ``Y_n = X_1 ^ ... ^ X_n ^ E``.
    """
    n = len(p_list)
    if not 1 <= n <= MAX_STACK:
        raise ValueError(f"need 1 <= n <= {MAX_STACK} layers, got {n}")
    joint = _stack_joint(p_list, h)

    layered = 0.0
    for i, p in enumerate(p_list):
        layered += bsc_nui_rate(p, binary_convolve(stack_convolve(p_list[:i]), h))

    chain = 0.0
    for i in range(n):
        # (X_i, Y_n, X_{i+1..n}) with the lower layers marginalised out
        p = joint.sum(axis=tuple(range(i))) if i else joint
        p = np.moveaxis(p, -1, 1)  # (X_i, Y, X_{i+1}, ..., X_n)
        chain += conditional_mutual_information(JointTable(p.reshape(2, 2, -1)))

    x_all = np.zeros((2, 2))
    for bits in itertools.product((0, 1), repeat=n):
        x_all[sum(bits) & 1] += joint[bits]
    stacked = mutual_information(JointTable(x_all))
    return ChainIdentityReport(layered, chain, stacked)
