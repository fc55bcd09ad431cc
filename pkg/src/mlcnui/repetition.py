"""
m-fold repetition of a non-uniform binary input over the BSC.

Repeated outputs are grouped by Hamming weight, so I(X; Y^m) costs O(m)
instead of O(2^m). A brute-force enumeration is kept for cross-checking.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .infotheory import JointTable, binary_convolve, bsc_nui_rate, mutual_information


@dataclass(frozen=True)
class TypeCoefficients:
    """Type probabilities ``p_i(p) = A[i] * p + B[i]`` for i = 0..m."""

    m: int
    h: float
    A: np.ndarray
    B: np.ndarray

    def type_probs(self, p: float) -> np.ndarray:
        return self.A * p + self.B

    def multiplicities(self) -> np.ndarray:
        return np.array([math.comb(self.m, i) for i in range(self.m + 1)], dtype=float)


def _check_h(h: float) -> float:
    h = float(h)
    if not 0.0 < h < 1.0:
        raise ValueError(f"crossover must lie strictly inside (0, 1), got {h}")
    return h


def type_coefficients(m: int, h: float) -> TypeCoefficients:
    if m < 1:
        raise ValueError("need at least one repetition")
    h = _check_h(h)
    i = np.arange(m + 1)
    B = h ** (m - i) * (1.0 - h) ** i
    A = h ** i * (1.0 - h) ** (m - i) - B
    return TypeCoefficients(m, h, A, B)


def _log_binom(m: int) -> np.ndarray:
    i = np.arange(m + 1)
    return gammaln(m + 1) - gammaln(i + 1) - gammaln(m - i + 1)


def repetition_rate(p: float, h: float, m: int) -> float:
    """Exact I(X; Y^m) in bits from the m+1 output types.

    Evaluated as the average divergence between each conditional output law
    and the output law, which avoids cancelling two O(m) entropies.
    """
    if m < 1:
        raise ValueError("need at least one repetition")
    h = _check_h(h)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    i = np.arange(m + 1)
    lh, l1h = math.log(h), math.log1p(-h)
    # log P(vector of type i | X = 1) and | X = 0), per vector
    log_a = i * lh + (m - i) * l1h
    log_b = (m - i) * lh + i * l1h
    log_py = np.logaddexp(math.log(p) + log_a, math.log1p(-p) + log_b)
    log_c = _log_binom(m)
    term1 = p * np.exp(log_c + log_a) * (log_a - log_py)
    term0 = (1.0 - p) * np.exp(log_c + log_b) * (log_b - log_py)
    return max(float(np.sum(term1 + term0)) / math.log(2.0), 0.0)


def repetition_rate_bruteforce(p: float, h: float, m: int) -> float:
    """I(X; Y^m) by enumerating all 2^m output vectors (small m only)."""
    if m > 16:
        raise ValueError("brute force limited to m <= 16")
    joint = np.zeros((2, 2 ** m))
    for idx, y in enumerate(itertools.product((0, 1), repeat=m)):
        w = sum(y)
        joint[0, idx] = (1 - p) * h ** w * (1 - h) ** (m - w)
        joint[1, idx] = p * h ** (m - w) * (1 - h) ** w
    return mutual_information(JointTable(joint))


def rate_loss(p: float, h: float, m: int) -> float:
    """m * I(X;Y) - I(X;Y^m): information lost by repeating instead of coding."""
    return m * bsc_nui_rate(p, h) - repetition_rate(p, h, m)


def stack_probability(p: float, N: int) -> float:
    """P(XOR of N independent Bern(p) bits = 1)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0.0 <= p <= 0.5:
        raise ValueError("p must lie in [0, 1/2]")
    if p == 0.5:
        return 0.5
    return -0.5 * math.expm1(N * math.log1p(-2.0 * p))


def per_layer_probability(p_N: float, N: int) -> float:
    """Per-layer Bern parameter whose N-fold XOR has P(1) = p_N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0.0 <= p_N < 0.5:
        raise ValueError("stacked probability must lie in [0, 1/2)")
    return -0.5 * math.expm1(math.log1p(-2.0 * p_N) / N)


@dataclass
class LossScanReport:
    h: float
    m: int
    p_target: float
    rows: list[dict] = field(default_factory=list)

    columns = ("N", "p", "exact_rate", "m_times_single", "delta", "total_delta")

    def total_losses(self) -> list[float]:
        return [r["total_delta"] for r in self.rows]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for r in self.rows:
                writer.writerow([r["N"]] + [f"{r[c]:.15g}" for c in self.columns[1:]])


def loss_scaling_scan(h: float, m: int, N_list: Sequence[int],
                      p_target: float = 0.4) -> LossScanReport:
    """Total repetition loss when a fixed stacked density is split over N layers.

    Layer j (1-based) sees the noise plus the j-1 layers stacked beneath it,
    i.e. crossover ``stack_probability(p, j-1) (x) h``. ``delta`` is the
    per-layer average of the loss and ``total_delta`` its sum.
    """
    if not 0.0 < h < 0.5:
        raise ValueError("need 0 < h < 1/2")
    report = LossScanReport(h, m, p_target)
    for N in N_list:
        N = int(N)
        p = per_layer_probability(p_target, N)
        exact = single = 0.0
        for j in range(N):
            h_j = binary_convolve(stack_probability(p, j) if j else 0.0, h)
            exact += repetition_rate(p, h_j, m)
            single += m * bsc_nui_rate(p, h_j)
        total = single - exact
        report.rows.append({
            "N": N, "p": p, "exact_rate": exact, "m_times_single": single,
            "delta": total / N, "total_delta": total,
        })
    return report


def taylor_bound_check(b: float, a: float, x_grid: Sequence[float]) -> bool:
    """Check the second-order sandwich of log(b + a x) on a grid (natural log).

    The upper bound is tested everywhere; the lower bound only where
    ``|a x / b| <= 1``.
    """
    if b <= 0:
        raise ValueError("b must be positive")
    for x in x_grid:
        arg = b + a * x
        if arg <= 0:
            raise ValueError(f"b + a*x must be positive, got {arg} at x={x}")
        t = a * x / b
        exact = math.log(arg)
        upper = math.log(b) + t
        if exact > upper + 1e-15 * max(1.0, abs(upper)):
            return False
        if abs(t) <= 1.0:
            lower = math.log(b) + t - 0.5 * t * t
            if exact < lower - 1e-15 * max(1.0, abs(lower)):
                return False
    return True


def theorem_limit_deficiency(p: float, h: float, m: int) -> float:
    """1 - I(X;Y^m) / (m I(X;Y)): relative shortfall of repetition."""
    return 1.0 - repetition_rate(p, h, m) / (m * bsc_nui_rate(p, h))

