import binascii
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlcnui.codes import LinearCode, ml_decode_exact
from mlcnui.polar import (PolarCode, bit_channel_errors, construct_polar, crc16,
                          genie_bit_llrs, polar_decode, polar_transform)


def bsc_sampler(h):
    w = np.log((1 - h) / h)

    def sample(x, rng):
        y = x ^ (rng.random(x.shape) < h)
        return w * (1 - 2 * y.astype(float))
    return sample


def bec_sampler(eps):
    def sample(x, rng):
        keep = rng.random(x.shape) >= eps
        return keep * 30.0 * (1 - 2 * x.astype(float))
    return sample


def generator(code: PolarCode):
    rows = []
    for j in range(code.k):
        msg = np.zeros(code.k, dtype=np.uint8)
        msg[j] = 1
        rows.append(code.encode(msg))
    return np.array(rows)


def test_transform_examples():
    assert polar_transform(np.array([1, 0])).tolist() == [1, 0]
    assert polar_transform(np.array([0, 1])).tolist() == [1, 1]
    # u F^{(x)2}: last input touches every output
    assert polar_transform(np.array([0, 0, 0, 1])).tolist() == [1, 1, 1, 1]
    with pytest.raises(ValueError):
        polar_transform(np.zeros(6, dtype=np.uint8))


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_transform_involution(log_n, seed):
    u = np.random.default_rng(seed).integers(0, 2, (3, 2 ** log_n), dtype=np.uint8)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_bec_construction():
    code = construct_polar(8, 4, bec_sampler(0.5), trials=2000, seed=1)
    assert code.info.tolist() == [3, 5, 6, 7]


def test_bit_channel_errors_bec_ordering():
    err = bit_channel_errors(8, bec_sampler(0.5), trials=4000, seed=2)
    # exact erasure probabilities 0.004, 0.121, 0.191, 0.316 for 7, 6, 5, 3
    assert np.argsort(err).tolist()[:4] == [7, 6, 5, 3]
    assert err[0] > err[7]


def test_genie_llrs_noiseless():
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2, (4, 16), dtype=np.uint8)
    L = 20.0 * (1 - 2 * polar_transform(u).astype(float))
    assert np.array_equal(genie_bit_llrs(L, u) < 0, u.astype(bool))


def test_crc_reference():
    data = b"123456789"
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    value = int("".join(map(str, crc16(bits))), 2)
    assert value == 0x31C3 == binascii.crc_hqx(data, 0)


@given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
def test_crc_linear(n, seed):
    a, b = np.random.default_rng(seed).integers(0, 2, (2, n), dtype=np.uint8)
    assert np.array_equal(crc16(a ^ b), crc16(a) ^ crc16(b))


def test_code_validation():
    with pytest.raises(ValueError):
        PolarCode(6, [1])
    with pytest.raises(ValueError):
        PolarCode(8, [8])
    with pytest.raises(ValueError):
        PolarCode(32, range(10), crc_bits=16)
    with pytest.raises(ValueError):
        PolarCode(8, [7], perm=[0] * 8)


@pytest.mark.parametrize("crc,perm", [(0, False), (16, False), (16, True)])
def test_encode_round_trip(crc, perm):
    rng = np.random.default_rng(4)
    p = rng.permutation(64) if perm else None
    code = PolarCode(64, np.arange(24, 64), crc_bits=crc, list_size=4, perm=p)
    msg = rng.integers(0, 2, code.k, dtype=np.uint8)
    c = code.encode(msg)
    assert code.is_codeword(c)
    assert np.array_equal(code.message_of(c), msg)
    for L in (1, 4):
        decoded = PolarCode(64, code.info, crc, L, p).decode(20.0 * (1 - 2 * c.astype(float)))
        assert np.array_equal(decoded, c)


def test_polar_is_linear_code():
    code = PolarCode(16, [7, 11, 13, 14, 15], crc_bits=0)
    G = generator(code)
    lin = LinearCode.from_generator(G)
    rng = np.random.default_rng(0)
    for _ in range(10):
        msg = rng.integers(0, 2, code.k, dtype=np.uint8)
        assert lin.is_codeword(code.encode(msg))


def test_large_list_matches_ml():
    # a list as large as the codebook makes SCL exhaustive
    code = PolarCode(16, [7, 11, 13, 14, 15], list_size=32)
    lin = LinearCode.from_generator(generator(code))
    rng = np.random.default_rng(5)
    agree = 0
    for _ in range(200):
        llr = rng.normal(1.0, 1.5, 16)
        agree += np.array_equal(code.candidates(llr)[0], ml_decode_exact(lin, llr))
    assert agree >= 190


def test_sc_decodes_bsc():
    code = construct_polar(512, 128, bsc_sampler(0.05), trials=500, seed=0)
    rng = np.random.default_rng(9)
    ok = 0
    for _ in range(20):
        c = code.encode(rng.integers(0, 2, code.k, dtype=np.uint8))
        y = c ^ (rng.random(c.size) < 0.05)
        res = polar_decode(code, np.log(19.0) * (1 - 2 * y.astype(float)))
        ok += np.array_equal(res.codeword, c)
    assert ok >= 19


def test_list_with_crc_flags_failure():
    code = construct_polar(256, 100, bsc_sampler(0.1), trials=300, seed=0, crc_bits=16,
                           list_size=4)
    res = polar_decode(code, np.zeros(256))
    assert res.codeword.shape == (256,)
    c = code.encode(np.ones(code.k, dtype=np.uint8))
    res = polar_decode(code, 20.0 * (1 - 2 * c.astype(float)))
    assert res.converged and np.array_equal(res.codeword, c)


def test_list_helps_over_sc():
    sampler = bsc_sampler(0.08)
    sc = construct_polar(256, 100, sampler, trials=400, seed=1)
    scl = construct_polar(256, 84, sampler, trials=400, seed=1, crc_bits=16, list_size=8)
    rng = np.random.default_rng(3)
    err_sc = err_scl = 0
    for _ in range(60):
        for code in (sc, scl):
            c = code.encode(rng.integers(0, 2, code.k, dtype=np.uint8))
            y = c ^ (rng.random(256) < 0.08)
            wrong = not np.array_equal(code.decode(np.log(0.92 / 0.08) * (1 - 2 * y.astype(float))), c)
            if code is sc:
                err_sc += wrong
            else:
                err_scl += wrong
    assert err_scl <= err_sc


def test_construct_zero_k():
    code = construct_polar(16, 0, bsc_sampler(0.1))
    assert code.k == 0 and not code.encode(np.zeros(0, dtype=np.uint8)).any()
    with pytest.raises(ValueError):
        construct_polar(16, 17, bsc_sampler(0.1))
