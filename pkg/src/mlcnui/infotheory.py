"""
Exact discrete information-theoretic primitives.

All quantities are in bits. Probabilities closer than ``PROB_TOL`` to a
valid value are snapped; anything further out raises ``ValueError``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PROB_TOL = 1e-12
TINY = 1e-300


def _check_prob(q: float, name: str = "probability") -> float:
    q = float(q)
    if not (-PROB_TOL <= q <= 1.0 + PROB_TOL):
        raise ValueError(f"{name} must lie in [0, 1], got {q!r}")
    return min(max(q, 0.0), 1.0)


def _xlog2x(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > TINY
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def entropy(probs) -> float:
    """Shannon entropy of a probability vector (any shape, flattened)."""
    return float(-_xlog2x(np.asarray(probs, dtype=float).ravel()).sum())


@dataclass(frozen=True)
class JointTable:
    """Joint pmf over a product of finite alphabets; axis ``i`` is variable ``i``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim == 0:
            raise ValueError("joint table needs at least one variable")
        if np.any(p < -PROB_TOL):
            raise ValueError("joint table has negative entries")
        total = p.sum()
        if abs(total - 1.0) > PROB_TOL * max(1, p.size):
            raise ValueError(f"joint table sums to {total!r}, not 1")
        p = np.clip(p, 0.0, None) / total
        object.__setattr__(self, "probs", p)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.probs.shape

    def marginal(self, axes: Sequence[int]) -> np.ndarray:
        """Marginal over the variables in ``axes`` (kept in the given order)."""
        axes = list(axes)
        drop = tuple(i for i in range(self.probs.ndim) if i not in axes)
        m = self.probs.sum(axis=drop)
        kept = sorted(axes)
        return np.transpose(m, [kept.index(a) for a in axes])


@dataclass(frozen=True)
class Dmc:
    """Discrete memoryless channel, ``transition[x, y] = P(y | x)``."""

    transition: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        if t.ndim != 2 or 0 in t.shape:
            raise ValueError("transition must be a non-empty 2-D table")
        if np.any(t < -PROB_TOL) or np.any(t > 1 + PROB_TOL):
            raise ValueError("transition entries must lie in [0, 1]")
        rows = t.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > PROB_TOL * t.shape[1]):
            raise ValueError("transition rows must sum to 1")
        t = np.clip(t, 0.0, 1.0)
        object.__setattr__(self, "transition", t / t.sum(axis=1, keepdims=True))

    @property
    def num_inputs(self) -> int:
        return self.transition.shape[0]

    @property
    def num_outputs(self) -> int:
        return self.transition.shape[1]

    @classmethod
    def bsc(cls, h: float) -> "Dmc":
        h = _check_prob(h, "crossover")
        return cls(np.array([[1.0 - h, h], [h, 1.0 - h]]))

    def joint(self, input_probs) -> JointTable:
        px = np.asarray(input_probs, dtype=float)
        if px.shape != (self.num_inputs,):
            raise ValueError("input distribution does not match channel inputs")
        return JointTable(px[:, None] * self.transition)


def binary_entropy(q: float) -> float:
    q = _check_prob(q)
    return entropy([q, 1.0 - q])


def binary_convolve(p: float, h: float) -> float:
    """P(A xor B = 1) for independent A ~ Bern(p), B ~ Bern(h)."""
    p = _check_prob(p)
    h = _check_prob(h)
    return p * (1.0 - h) + (1.0 - p) * h


def stack_convolve(probs: Sequence[float]) -> float:
    """Iterated binary convolution; 0 for an empty sequence."""
    # (1 - 2 p_all) = prod(1 - 2 p_i) keeps this exact to rounding
    prod = 1.0
    for p in probs:
        prod *= 1.0 - 2.0 * _check_prob(p)
    return 0.5 * (1.0 - prod)


def mutual_information(joint: JointTable) -> float:
    p = joint.probs
    if p.ndim != 2:
        raise ValueError(f"expected a 2-variable joint table, got {p.ndim}")
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    mi = entropy(pa) + entropy(pb) - entropy(p)
    return max(mi, 0.0)


def conditional_mutual_information(joint: JointTable) -> float:
    """I(A;B|C) for a table over (A, B, C) as sum_c P(c) I(A;B | C=c)."""
    p = joint.probs
    if p.ndim != 3:
        raise ValueError(f"expected a 3-variable joint table, got {p.ndim}")
    # I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C)
    cmi = (entropy(p.sum(axis=1)) + entropy(p.sum(axis=0))
           - entropy(p) - entropy(p.sum(axis=(0, 1))))
    return max(cmi, 0.0)


def bsc_nui_rate(p: float, h: float) -> float:
    """I(X;Y) for X ~ Bern(p) through a BSC with crossover ``h``."""
    return binary_entropy(binary_convolve(p, h)) - binary_entropy(h)


def low_rate_asymptote(p: float, h: float) -> float:
    """First-order small-``p`` behaviour of :func:`bsc_nui_rate`."""
    p = _check_prob(p)
    h = _check_prob(h, "crossover")
    if not 0.0 < h < 0.5:
        raise ValueError("low-rate asymptote needs 0 < h < 1/2")
    if p >= 0.5:
        raise ValueError("low-rate asymptote needs p < 1/2")
    return p * (1.0 - 2.0 * h) * np.log2((1.0 - h) / h)
