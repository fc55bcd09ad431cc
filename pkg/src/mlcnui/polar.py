"""
Polar codes with successive-cancellation decoding.

Used for the low-rate MLC levels where column-regular LDPC codes under BP
sit far from capacity. The transform is ``x = u F^{(x)log2 n}`` in natural
order (no bit reversal). Bit-channel reliabilities come from a genie-aided
Monte Carlo run over whatever channel the caller samples, so asymmetric
level channels and repetition mixtures are handled alike.
"""
from __future__ import annotations

import binascii
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .codes import LLR_CLAMP, DecodeResult

LlrSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x = u F^{(x)n} over GF(2) along the last axis. Involutory."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError("block length must be a power of two")
    lead = x.shape[:-1]
    half = n // 2
    while half >= 1:
        v = x.reshape(lead + (-1, 2, half))
        v[..., 0, :] ^= v[..., 1, :]
        half //= 2
    return x


def _f(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact box-plus; the clamp keeps arctanh finite
    t = np.tanh(0.5 * a) * np.tanh(0.5 * b)
    t = np.clip(t, -1 + 1e-15, 1 - 1e-15)
    return 2.0 * np.arctanh(t)


def _g(a: np.ndarray, b: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return b + (1.0 - 2.0 * bits) * a


RATE0, RATE1, REP, SPC, SPLIT = range(5)


def crc16(bits) -> np.ndarray:
    """CRC-16/CCITT (init 0, so the map is GF(2)-linear) of a bit vector."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    pad = (-bits.size) % 8
    # leading zeros leave a zero-initialised CRC unchanged
    data = np.packbits(np.concatenate([np.zeros(pad, dtype=np.uint8), bits]))
    value = binascii.crc_hqx(data.tobytes(), 0)
    return np.array([(value >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


@dataclass(eq=False)
class PolarCode:
    """Polar code on the bit channels ``info``.

    With ``crc_bits=16`` the last 16 information bits carry a CRC of the
    payload; ``k`` counts payload bits only. ``list_size > 1`` selects
    CRC-aided successive-cancellation list decoding. An optional ``perm``
    interleaves the output, ``codeword[j] = x[perm[j]]``; stacked levels need
    it so that one level's structure does not line up with another's.
    """

    n: int
    info: np.ndarray
    crc_bits: int = 0
    list_size: int = 1
    perm: np.ndarray | None = None
    _frozen: np.ndarray = field(init=False, repr=False)
    _kinds: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("block length must be a power of two >= 2")
        if self.crc_bits not in (0, 16):
            raise ValueError("crc_bits must be 0 or 16")
        if self.list_size < 1:
            raise ValueError("list size must be positive")
        self.info = np.unique(np.asarray(self.info, dtype=np.int64))
        if self.info.size and (self.info[0] < 0 or self.info[-1] >= self.n):
            raise ValueError("information index out of range")
        if self.info.size and self.info.size <= self.crc_bits:
            raise ValueError("no room for payload after the CRC")
        if self.perm is not None:
            self.perm = np.asarray(self.perm, dtype=np.int64)
            if not np.array_equal(np.sort(self.perm), np.arange(self.n)):
                raise ValueError("perm must be a permutation of range(n)")
        self._frozen = np.ones(self.n, dtype=bool)
        self._frozen[self.info] = False
        self._kinds = {}
        self._classify(0, self.n)

    @property
    def k(self) -> int:
        return max(int(self.info.size) - self.crc_bits, 0)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def _classify(self, start: int, size: int) -> int:
        frz = self._frozen[start:start + size]
        if frz.all():
            kind = RATE0
        elif not frz.any():
            kind = RATE1
        elif size > 1 and frz[:-1].all():
            kind = REP
        elif size > 1 and frz[0] and not frz[1:].any():
            kind = SPC
            # the list decoder splits SPC nodes, so it needs the children too
            self._classify(start, size // 2)
            self._classify(start + size // 2, size // 2)
        else:
            kind = SPLIT
            self._classify(start, size // 2)
            self._classify(start + size // 2, size // 2)
        self._kinds[(start, size)] = kind
        return kind

    def encode(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.uint8)
        if msg.shape[-1] != self.k:
            raise ValueError(f"message length {msg.shape[-1]} != k = {self.k}")
        if self.crc_bits and self.info.size:
            if msg.ndim == 1:
                msg = np.concatenate([msg, crc16(msg)])
            else:
                msg = np.concatenate([msg, np.stack([crc16(r) for r in msg])], axis=-1)
        u = np.zeros(msg.shape[:-1] + (self.n,), dtype=np.uint8)
        u[..., self.info] = msg
        return self._out(polar_transform(u))

    def _out(self, x: np.ndarray) -> np.ndarray:
        return x if self.perm is None else x[..., self.perm]

    def _in(self, c: np.ndarray) -> np.ndarray:
        if self.perm is None:
            return c
        x = np.empty_like(c)
        x[..., self.perm] = c
        return x

    def message_of(self, codeword) -> np.ndarray:
        return polar_transform(self._in(np.asarray(codeword)))[..., self.info[:self.k]]

    def is_codeword(self, word) -> bool:
        u = polar_transform(self._in(np.asarray(word)))
        if u[..., self._frozen].any():
            return False
        return self._crc_ok(u[self.info])

    def _crc_ok(self, info_bits: np.ndarray) -> bool:
        if not self.crc_bits or not info_bits.size:
            return True
        return bool(np.array_equal(crc16(info_bits[:self.k]), info_bits[self.k:]))

    def decode(self, llr) -> np.ndarray:
        """Hard codeword decisions; accepts (n,) or (batch, n) LLRs."""
        llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLAMP, LLR_CLAMP)
        if llr.shape[-1] != self.n:
            raise ValueError("observation length does not match the code")
        if self.list_size > 1 or self.crc_bits:
            if llr.ndim == 1:
                return self.decode_list(llr)[0]
            return np.stack([self.decode_list(row)[0] for row in llr])
        single = llr.ndim == 1
        L = self._in(llr[None, :] if single else llr)
        x = self._out(self._sc(L, 0, self.n))
        return x[0] if single else x

    def candidates(self, llr) -> np.ndarray:
        """Surviving list codewords of one frame, best path metric first."""
        llr = np.clip(np.asarray(llr, dtype=float), -LLR_CLAMP, LLR_CLAMP)
        if llr.shape != (self.n,):
            raise ValueError("candidates takes a single frame")
        self._pm = np.zeros(1)
        x, _ = self._scl(self._in(llr)[None, :], 0, self.n)
        order = np.argsort(self._pm, kind="stable")
        return self._out(x[order])

    def decode_list(self, llr) -> tuple[np.ndarray, bool]:
        """List decoding of one frame; the flag reports a CRC match."""
        cands = self.candidates(llr)
        for c in cands:
            if self._crc_ok(polar_transform(self._in(c))[self.info]):
                return c, True
        return cands[0], not self.crc_bits

    def _sc(self, L: np.ndarray, start: int, size: int) -> np.ndarray:
        kind = self._kinds[(start, size)]
        if kind == RATE0:
            return np.zeros(L.shape, dtype=np.uint8)
        if kind == RATE1:
            return (L < 0).astype(np.uint8)
        if kind == REP:
            bit = (L.sum(axis=-1, keepdims=True) < 0).astype(np.uint8)
            return np.broadcast_to(bit, L.shape).copy()
        if kind == SPC:
            x = (L < 0).astype(np.uint8)
            bad = (x.sum(axis=-1) & 1).astype(bool)
            if bad.any():
                rows = np.flatnonzero(bad)
                weakest = np.abs(L[rows]).argmin(axis=-1)
                x[rows, weakest] ^= 1
            return x
        half = size // 2
        L1, L2 = L[:, :half], L[:, half:]
        xa = self._sc(_f(L1, L2), start, half)
        xb = self._sc(_g(L1, L2, xa), start + half, half)
        return np.concatenate([xa ^ xb, xb], axis=-1)

    def _prune(self, pm: np.ndarray):
        keep = np.argsort(pm, kind="stable")[:self.list_size]
        return keep

    def _scl(self, L: np.ndarray, start: int, size: int):
        """List SC on one node; returns (codewords, surviving parent paths)."""
        kind = self._kinds[(start, size)]
        P = L.shape[0]
        if kind == RATE0:
            self._pm = self._pm + _softplus(-L).sum(axis=1)
            return np.zeros(L.shape, dtype=np.uint8), np.arange(P)
        if kind == REP and size > 1:
            pm = np.concatenate([self._pm + _softplus(-L).sum(axis=1),
                                 self._pm + _softplus(L).sum(axis=1)])
            keep = self._prune(pm)
            self._pm = pm[keep]
            bits = (keep >= P).astype(np.uint8)
            x = np.repeat(bits[:, None], size, axis=1)
            return x, keep % P
        if kind == RATE1:
            x = (L < 0).astype(np.uint8)
            mag = np.abs(L)
            self._pm = self._pm + _softplus(-mag).sum(axis=1)
            parents = np.arange(P)
            steps = min(self.list_size - 1, size) if self.list_size > 1 else 0
            weak = np.argsort(mag, axis=1)[:, :steps]
            for j in range(steps):
                pos = weak[:, j]
                rows = np.arange(x.shape[0])
                flip_cost = mag[rows, pos]
                pm = np.concatenate([self._pm, self._pm + flip_cost])
                keep = self._prune(pm)
                src = keep % x.shape[0]
                flip = keep >= x.shape[0]
                x = x[src]
                x[np.arange(len(src))[flip], pos[src][flip]] ^= 1
                mag, weak, parents = mag[src], weak[src], parents[src]
                self._pm = pm[keep]
            return x, parents
        half = size // 2
        L1, L2 = L[:, :half], L[:, half:]
        xa, pa = self._scl(_f(L1, L2), start, half)
        L1, L2 = L1[pa], L2[pa]
        xb, pb = self._scl(_g(L1, L2, xa), start + half, half)
        xa = xa[pb]
        return np.concatenate([xa ^ xb, xb], axis=-1), pa[pb]


def polar_decode(code: PolarCode, llr) -> DecodeResult:
    """``converged`` is the CRC verdict, or always True without a CRC."""
    if code.list_size > 1 or code.crc_bits:
        x, ok = code.decode_list(llr)
        return DecodeResult(x, ok, 1)
    return DecodeResult(code.decode(llr), True, 1)


def genie_bit_llrs(L: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Leaf LLRs of every bit channel when SC is fed the true earlier bits.

    ``L`` and ``u`` have shape (batch, n). Runs breadth-first, so the whole
    tree costs log2(n) vectorised stages.
    """
    B, n = L.shape
    seg = n
    cur = L[:, None, :]
    while seg > 1:
        half = seg // 2
        # true re-encoded bits of each left child
        ublk = u.reshape(B, -1, half)[:, 0::2, :]
        xa = polar_transform(ublk)
        L1, L2 = cur[..., :half], cur[..., half:]
        left = _f(L1, L2)
        right = _g(L1, L2, xa)
        cur = np.stack([left, right], axis=2).reshape(B, -1, half)
        seg = half
    return cur.reshape(B, n)


def bit_channel_errors(n: int, sampler: LlrSampler, trials: int = 2000,
                       seed: int = 0, batch: int = 250) -> np.ndarray:
    """Estimated error probability of each synthetic bit channel.

    Uses the mean wrong-bit posterior ``1 / (1 + exp(|L| ...))``, which
    resolves far smaller probabilities than counting hard errors.
    """
    rng = np.random.default_rng(seed)
    acc = np.zeros(n)
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        u = rng.integers(0, 2, size=(b, n), dtype=np.uint8)
        x = polar_transform(u)
        L = np.clip(sampler(x, rng), -LLR_CLAMP, LLR_CLAMP)
        leaf = genie_bit_llrs(L, u)
        signed = leaf * (1.0 - 2.0 * u)
        acc += (0.5 * (1.0 - np.tanh(0.5 * signed))).sum(axis=0)
        done += b
    return acc / trials


def construct_polar(n: int, k: int, sampler: LlrSampler, trials: int = 2000,
                    seed: int = 0, crc_bits: int = 0, list_size: int = 1,
                    interleave: bool = False) -> PolarCode:
    """Pick the k (+ CRC) most reliable bit channels for the sampled channel.

    The sampled channel is memoryless, so an output interleaver (drawn from
    ``seed`` when ``interleave``) leaves the ranking valid.
    """
    if not 0 <= k + crc_bits <= n:
        raise ValueError("k out of range")
    if k == 0:
        return PolarCode(n, np.zeros(0, dtype=np.int64))
    err = bit_channel_errors(n, sampler, trials, seed)
    # stable sort: ties resolved toward higher indices, which are more reliable
    order = np.argsort(err[::-1], kind="stable")
    best = (n - 1 - order)[:k + crc_bits]
    perm = np.random.default_rng([seed, n]).permutation(n) if interleave else None
    return PolarCode(n, best, crc_bits, list_size, perm)
