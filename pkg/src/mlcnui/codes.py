"""
Binary linear block codes: LDPC construction, encoding, sum-product
decoding and an exhaustive ML oracle for small codes.

LLRs are natural-log ``log P(bit=0) / P(bit=1)``; positive favours 0.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import gf2

LLR_CLAMP = 30.0
MAX_ML_K = 20


@dataclass(eq=False)
class LinearCode:
    """Binary linear code with a systematic generator.

    ``parity`` is kept sparse and may contain redundant rows; its rank is
    ``n - k``. ``info_positions`` are the codeword coordinates that carry
    the message bits verbatim.
    """

    generator: np.ndarray
    parity: sp.csr_matrix
    info_positions: np.ndarray
    _graph: "_TannerGraph | None" = field(default=None, repr=False)

    def __post_init__(self):
        self.generator = np.asarray(self.generator, dtype=np.uint8)
        self.parity = sp.csr_matrix(self.parity, dtype=np.uint8)
        self.info_positions = np.asarray(self.info_positions, dtype=np.int64)
        if self.generator.shape[1] != self.parity.shape[1]:
            raise ValueError("generator and parity disagree on block length")
        if self.generator.shape[0]:
            prod = (self.parity @ self.generator.T.astype(np.int64))
            if np.any(np.asarray(prod) % 2):
                raise ValueError("generator rows violate the parity checks")

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @classmethod
    def from_parity(cls, H) -> "LinearCode":
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        G, free = gf2.nullspace_basis(Hd)
        return cls(G, sp.csr_matrix(Hd), np.asarray(free))

    @classmethod
    def from_generator(cls, G) -> "LinearCode":
        G = np.asarray(G, dtype=np.uint8)
        R, piv = gf2.rref(G)
        if len(piv) != G.shape[0]:
            raise ValueError("generator is rank deficient")
        if not np.array_equal(G[:, piv], np.eye(len(piv), dtype=np.uint8)):
            G = R
        H, _ = gf2.nullspace_basis(G)
        return cls(G, sp.csr_matrix(H), np.asarray(piv))

    @classmethod
    def frozen(cls, n: int) -> "LinearCode":
        """The k=0 code {0^n}; carries no information."""
        return cls(np.zeros((0, n), dtype=np.uint8), sp.identity(n, format="csr"),
                   np.zeros(0, dtype=np.int64))

    def syndrome(self, word) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        return np.asarray(self.parity @ word) % 2

    def is_codeword(self, word) -> bool:
        return not np.any(self.syndrome(word))

    def message_of(self, codeword) -> np.ndarray:
        return np.asarray(codeword, dtype=np.uint8)[self.info_positions]

    @property
    def graph(self) -> "_TannerGraph":
        if self._graph is None:
            self._graph = _TannerGraph(self.parity)
        return self._graph


@dataclass(frozen=True)
class SoftObservation:
    llrs: np.ndarray

    def __post_init__(self):
        llr = np.asarray(self.llrs, dtype=float)
        if np.isnan(llr).any():
            raise ValueError("LLRs must not be NaN")
        object.__setattr__(self, "llrs", np.clip(llr, -LLR_CLAMP, LLR_CLAMP))


def _as_llrs(obs) -> np.ndarray:
    if isinstance(obs, SoftObservation):
        return obs.llrs
    return SoftObservation(obs).llrs


def hamming_7_4() -> LinearCode:
    G = np.array([
        [1, 0, 0, 0, 1, 1, 0],
        [0, 1, 0, 0, 1, 0, 1],
        [0, 0, 1, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1, 1],
    ])
    return LinearCode.from_generator(G)


def repetition_code(n: int) -> LinearCode:
    return LinearCode.from_generator(np.ones((1, n), dtype=np.uint8))


def _row_degrees(n_edges: int, rows: int) -> np.ndarray:
    base, extra = divmod(n_edges, rows)
    deg = np.full(rows, base)
    deg[:extra] += 1
    return deg


def _four_cycle_columns(H: sp.csr_matrix) -> tuple[np.ndarray, int]:
    """Columns sharing two or more checks with another column, and the 4-cycle count."""
    Hi = H.astype(np.int32)
    overlap = (Hi.T @ Hi).tocoo()
    bad = (overlap.row != overlap.col) & (overlap.data > 1)
    d = overlap.data[bad].astype(np.int64)
    return np.unique(overlap.row[bad]), int(np.sum(d * (d - 1) // 2)) // 2


def _sample_parity(n: int, rows: int, col_weight: int,
                   rng: np.random.Generator, cycle_passes: int) -> sp.csr_matrix:
    n_edges = n * col_weight
    row_deg = _row_degrees(n_edges, rows)
    col_of = np.repeat(np.arange(n), col_weight)
    row_sockets = np.repeat(np.arange(rows), row_deg)
    row_of = rng.permutation(row_sockets)

    def dup_edges(rw):
        key = col_of * rows + rw
        _, first = np.unique(key, return_index=True)
        mask = np.ones(len(key), dtype=bool)
        mask[first] = False
        return np.flatnonzero(mask)

    for _ in range(200):
        dups = dup_edges(row_of)
        if dups.size == 0:
            break
        partners = rng.integers(0, n_edges, size=dups.size)
        for a, b in zip(dups, partners):
            row_of[a], row_of[b] = row_of[b], row_of[a]
    else:
        raise RuntimeError("could not remove parallel edges from the Tanner graph")

    def build(rw):
        return sp.csr_matrix((np.ones(n_edges, dtype=np.uint8), (rw, col_of)),
                             shape=(rows, n))

    H = build(row_of)
    # short codes cannot always be made 4-cycle free; keep the best seen
    best, best_cycles = H, None
    for _ in range(cycle_passes):
        bad, cycles = _four_cycle_columns(H)
        if best_cycles is None or cycles < best_cycles:
            best, best_cycles = H, cycles
        if bad.size == 0:
            break
        present = set(zip(row_of.tolist(), col_of.tolist()))
        # re-deal one edge of every offending column with a random partner edge
        for c in bad:
            a = c * col_weight + int(rng.integers(col_weight))
            b = int(rng.integers(n_edges))
            ra, rb, ca, cb = row_of[a], row_of[b], col_of[a], col_of[b]
            if ra == rb or (rb, ca) in present or (ra, cb) in present:
                continue
            present -= {(ra, ca), (rb, cb)}
            present |= {(rb, ca), (ra, cb)}
            row_of[a], row_of[b] = rb, ra
        H = build(row_of)
    else:
        if _four_cycle_columns(H)[1] < best_cycles:
            best = H
    return best


@functools.lru_cache(maxsize=64)
def make_regular_ldpc(n: int, rate: float, col_weight: int = 3,
                      seed: int = 0, cycle_passes: int = 20) -> LinearCode:
    """Random column-regular LDPC code with near-regular check degrees.

    ``n * (1 - rate)`` checks are created (rounded); check degrees differ by
    at most one. 4-cycles are broken by edge swaps when possible. Redundant
    checks raise the true dimension above ``n * rate``; ``code.k`` is
    authoritative.
    """
    if col_weight < 2:
        raise ValueError("column weight must be at least 2")
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must lie in [0, 1)")
    rows = int(round(n * (1.0 - rate)))
    if rows == n:
        return LinearCode.frozen(n)
    if rows < col_weight:
        raise ValueError("too few checks for the requested column weight")
    rng = np.random.default_rng(seed)
    H = _sample_parity(n, rows, col_weight, rng, cycle_passes)
    return LinearCode.from_parity(H)


def encode(code: LinearCode, message) -> np.ndarray:
    msg = np.asarray(message, dtype=np.uint8).ravel()
    if msg.size != code.k:
        raise ValueError(f"message length {msg.size} != k = {code.k}")
    if code.k == 0:
        return np.zeros(code.n, dtype=np.uint8)
    rows = code.generator[msg.astype(bool)]
    if rows.shape[0] == 0:
        return np.zeros(code.n, dtype=np.uint8)
    return np.bitwise_xor.reduce(rows, axis=0)


class _TannerGraph:
    """Edge lists of a parity-check matrix, sorted by check."""

    def __init__(self, H: sp.csr_matrix):
        H = sp.csr_matrix(H)
        H.sum_duplicates()
        self.rows, self.n = H.shape
        self.chk = np.repeat(np.arange(self.rows), np.diff(H.indptr))
        self.var = H.indices.astype(np.int64)


class DecodeResult(NamedTuple):
    codeword: np.ndarray
    converged: bool
    iterations: int


def _phi(x: np.ndarray) -> np.ndarray:
    # phi(x) = -log tanh(x/2), an involution on (0, inf)
    x = np.clip(x, 1e-12, 2 * LLR_CLAMP)
    return -np.log(np.tanh(0.5 * x))


def bp_decode(code: LinearCode, obs, max_iters: int = 100) -> DecodeResult:
    """Flooding sum-product decoding.

    Stops as soon as the hard decision satisfies every check. A zero
    posterior LLR decides 0.
    """
    llr = _as_llrs(obs)
    if llr.size != code.n:
        raise ValueError("observation length does not match the code")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if code.k == 0:
        return DecodeResult(np.zeros(code.n, dtype=np.uint8), True, 0)
    g = code.graph
    chk, var = g.chk, g.var
    v2c = llr[var].copy()
    hard = (llr < 0).astype(np.uint8)
    for it in range(1, max_iters + 1):
        mag = _phi(np.abs(v2c))
        neg = (v2c < 0).astype(np.int64)
        mag_sum = np.bincount(chk, weights=mag, minlength=g.rows)
        neg_sum = np.bincount(chk, weights=neg, minlength=g.rows).astype(np.int64)
        c2v = _phi(mag_sum[chk] - mag)
        sign = 1 - 2 * ((neg_sum[chk] - neg) & 1)
        c2v = np.clip(sign * c2v, -LLR_CLAMP, LLR_CLAMP)

        total = llr + np.bincount(var, weights=c2v, minlength=g.n)
        hard = (total < 0).astype(np.uint8)
        synd = np.bincount(chk, weights=hard[var], minlength=g.rows).astype(np.int64) & 1
        if not synd.any():
            return DecodeResult(hard, True, it)
        v2c = np.clip(total[var] - c2v, -LLR_CLAMP, LLR_CLAMP)
    return DecodeResult(hard, False, max_iters)


def ml_decode_exact(code: LinearCode, obs) -> np.ndarray:
    """Maximum-likelihood codeword by enumerating all 2^k messages.

    Ties go to the lexicographically smallest message (first bit most
    significant).
    """
    llr = _as_llrs(obs)
    if code.k > MAX_ML_K:
        raise ValueError(f"exhaustive ML limited to k <= {MAX_ML_K}")
    if llr.size != code.n:
        raise ValueError("observation length does not match the code")
    k = code.k
    if k == 0:
        return np.zeros(code.n, dtype=np.uint8)
    G = code.generator.astype(np.int64)
    shifts = np.arange(k - 1, -1, -1)
    best_metric, best_word = -np.inf, None
    chunk = 1 << min(k, 14)
    for start in range(0, 1 << k, chunk):
        idx = np.arange(start, min(start + chunk, 1 << k))
        msgs = (idx[:, None] >> shifts) & 1
        words = (msgs @ G) & 1
        metric = (1 - 2 * words) @ llr
        j = int(np.argmax(metric))
        if metric[j] > best_metric:
            best_metric, best_word = metric[j], words[j]
    return best_word.astype(np.uint8)


def write_alist(code_or_H, path) -> None:
    H = code_or_H.parity if isinstance(code_or_H, LinearCode) else sp.csr_matrix(code_or_H)
    H = sp.csr_matrix(H)
    rows, n = H.shape
    Hc = H.tocsc()
    col_lists = [Hc.indices[Hc.indptr[j]:Hc.indptr[j + 1]] for j in range(n)]
    row_lists = [H.indices[H.indptr[i]:H.indptr[i + 1]] for i in range(rows)]
    max_c = max((len(c) for c in col_lists), default=0)
    max_r = max((len(r) for r in row_lists), default=0)
    lines = [f"{n} {rows}", f"{max_c} {max_r}",
             " ".join(str(len(c)) for c in col_lists),
             " ".join(str(len(r)) for r in row_lists)]
    for lst, width in [(c, max_c) for c in col_lists] + [(r, max_r) for r in row_lists]:
        entries = [str(int(v) + 1) for v in sorted(lst)] + ["0"] * (width - len(lst))
        lines.append(" ".join(entries))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_alist(path) -> sp.csr_matrix:
    with open(path) as fh:
        tokens = [line.split() for line in fh if line.strip()]
    n, rows = map(int, tokens[0])
    col_deg = list(map(int, tokens[2]))
    r_idx, c_idx = [], []
    for j in range(n):
        entries = [int(v) for v in tokens[4 + j] if int(v) > 0]
        if len(entries) != col_deg[j]:
            raise ValueError(f"alist column {j + 1} degree mismatch")
        r_idx += [v - 1 for v in entries]
        c_idx += [j] * len(entries)
    H = sp.csr_matrix((np.ones(len(r_idx), dtype=np.uint8), (r_idx, c_idx)),
                      shape=(rows, n))
    return H
