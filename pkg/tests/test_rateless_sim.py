import csv
import dataclasses
import math
from types import SimpleNamespace

import numpy as np
import pytest

from mlcnui.infotheory import binary_convolve, binary_entropy, bsc_nui_rate, stack_convolve
from mlcnui.mlc_codec import provision_mlc
from mlcnui.mapper import build_threshold_mapper
from mlcnui.rateless_sim import (TRIAL_COLUMNS, RatelessConfig, RatelessSession,
                                 blocks_needed, combine_and_decode, ideal_blocks,
                                 interleaver, layer_design_h, layer_llrs, next_block,
                                 provision_rateless, run_batch, run_trial, stopping_check,
                                 transmit_bsc, write_trials_csv)

BIG_N = 100_000


@pytest.fixture(scope="module")
def config():
    return provision_rateless([0.25, 0.25], 0.05, 512, trials=300)


def big_session(layer_p, seed=0):
    """Session on long random layer symbols, for statistical checks of stacking."""
    cfg = SimpleNamespace(n=BIG_N, N=len(layer_p), base_seed=seed, max_blocks=8)
    rng = np.random.default_rng([seed, 99])
    symbols = np.stack([(rng.random(BIG_N) < p).astype(np.uint8) for p in layer_p])
    return RatelessSession(cfg, [], symbols)


def within_3_sigma(fraction, p, n):
    return abs(fraction - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_config_properties(config):
    assert config.N == 2 and config.n == 512
    assert config.r_max == sum(sum(c.coded_ks) for c in config.layer_mlc) / 512
    payload = sum(sum(c.ks) for c in config.layer_mlc) - 2 * 16
    assert config.payload_rate == pytest.approx(payload / 512)
    # the large first level steers its list decoder with its own CRC
    assert config.layer_mlc[0].codes[0].crc_bits == 16
    assert config.payload_rate < config.r_max - 2 * 16 / 512
    assert config.r_max <= 1 - binary_entropy(0.05)
    assert config.p_all == pytest.approx(0.375)


def test_config_validation(config):
    mlc = config.layer_mlc
    with pytest.raises(ValueError):
        RatelessConfig([0.25], 0.05, mlc)
    with pytest.raises(ValueError):
        RatelessConfig([0.25, 0.5], 0.05, mlc)
    with pytest.raises(ValueError):
        RatelessConfig([0.25, 0.125], 0.05, mlc)
    with pytest.raises(ValueError):
        RatelessConfig([0.25, 0.25], 0.05, mlc, crc_bits=8)
    with pytest.raises(ValueError):
        RatelessConfig([0.25, 0.25], 0.3, mlc)
    with pytest.raises(ValueError):
        dataclasses.replace(config, max_blocks=0)
    with pytest.raises(ValueError):
        provision_rateless([0.3], 0.05, 64)


def test_layer_design_h():
    assert layer_design_h([0.25, 0.25, 0.25], 0.05, 0) == 0.05
    assert layer_design_h([0.25, 0.25, 0.25], 0.05, 2) == pytest.approx(
        binary_convolve(binary_convolve(0.25, 0.25), 0.05))


def test_single_layer_block_is_permutation(config):
    one = RatelessConfig([0.25], 0.05, config.layer_mlc[:1])
    session = RatelessSession.start(one, 3)
    for b in range(3):
        block = next_block(session)
        assert np.array_equal(block, session.symbols[0][interleaver(0, 0, b, one.n)])


def test_zero_layers_give_zero_blocks():
    session = big_session([0.0, 0.0])
    assert not any(next_block(session).any() for _ in range(3))


def test_blocks_deterministic(config):
    a = RatelessSession.start(config, 5)
    b = RatelessSession.start(config, 5)
    for _ in range(4):
        assert np.array_equal(next_block(a), next_block(b))


def test_block_cap(config):
    capped = dataclasses.replace(config, max_blocks=2)
    session = RatelessSession.start(capped, 0)
    next_block(session)
    next_block(session)
    with pytest.raises(RuntimeError):
        next_block(session)


def test_receive_guards(config):
    session = RatelessSession.start(config, 0)
    with pytest.raises(RuntimeError):
        session.receive(np.zeros(config.n))
    next_block(session)
    with pytest.raises(ValueError):
        session.receive(np.zeros(config.n + 1))


def test_transmit_bsc():
    block = np.random.default_rng(0).integers(0, 2, BIG_N, dtype=np.uint8)
    assert np.array_equal(transmit_bsc(block, 0.0, 1), block)
    y = transmit_bsc(block, 0.2, 1)
    assert within_3_sigma(np.mean(y != block), 0.2, BIG_N)
    assert np.array_equal(y, transmit_bsc(block, 0.2, 1))
    with pytest.raises(ValueError):
        transmit_bsc(block, 0.7, 1)


def test_stopping_rule(config):
    assert stopping_check(1, 0.05, config)
    assert not any(stopping_check(m, 0.5, config) for m in (1, 10, 1000))
    assert ideal_blocks(config, 0.5) is None
    assert blocks_needed(0.7136, 0.2) == 4
    assert blocks_needed(0.5, 0.0) is None
    assert blocks_needed(1.0, 0.01, cap=10) is None
    m = ideal_blocks(config, 0.2)
    assert stopping_check(m, 0.2, config) and not stopping_check(m - 1, 0.2, config)
    with pytest.raises(ValueError):
        stopping_check(0, 0.1, config)


def test_stack_distribution():
    p = [0.25, 0.125, 0.375]
    session = big_session(p)
    block = next_block(session)
    assert within_3_sigma(block.mean(), stack_convolve(p), BIG_N)


def test_interference_decorrelated():
    p = [0.25, 0.25, 0.25]
    session = big_session(p, seed=4)
    layer = 2
    views = []
    for b in range(2):
        interference = np.zeros(BIG_N, dtype=np.uint8)
        for j in range(len(p)):
            if j != layer:
                interference ^= session.symbols[j][interleaver(0, j, b, BIG_N)]
        # as seen in layer 2's own coordinates
        seen = np.empty(BIG_N, dtype=np.uint8)
        seen[interleaver(4, layer, b, BIG_N)] = interference
        views.append(seen.astype(float))
    corr = np.corrcoef(views[0], views[1])[0, 1]
    assert abs(corr) <= 3 / math.sqrt(BIG_N)


def test_genie_effective_crossover():
    p = [0.25, 0.25, 0.25]
    h = 0.1
    session = big_session(p, seed=2)
    y = transmit_bsc(next_block(session), h, 0)
    for layer in range(len(p)):
        residual = y.copy()
        for j in range(layer, len(p)):
            residual ^= session.symbols[j][interleaver(2, j, 0, BIG_N)]
        expect = binary_convolve(stack_convolve(p[:layer]), h)
        assert within_3_sigma(residual.mean(), expect, BIG_N)


def test_llr_combining_adds(config):
    session = RatelessSession.start(config, 1)
    for b in range(2):
        session.receive(transmit_bsc(next_block(session), 0.1, [1, b]))
    single = RatelessSession(config, session.payloads, session.symbols, 1,
                             session.received[:1], [session.residual[0].copy()])
    one = layer_llrs(single, 1, 0.1)
    two = layer_llrs(session, 1, 0.1)
    agree = np.sign(two) == np.sign(one)
    assert np.all(np.abs(two[agree & (two != 0)]) > np.abs(one[agree & (two != 0)]))
    assert np.all(np.abs(two) >= 0)


def test_residual_is_noise_after_decoding(config):
    h = 0.1
    hits = 0
    for seed in range(3):
        session = RatelessSession.start(config, [seed, 0])
        for b in range(3):
            session.receive(transmit_bsc(next_block(session), h, [seed, 1, b]))
        report = combine_and_decode(session, h)
        if not report.success:
            continue
        hits += 1
        assert all(np.array_equal(a, b) for a, b in zip(report.payloads, session.payloads))
        res = np.concatenate(session.residual)
        assert within_3_sigma(res.mean(), h, res.size)
        assert report.realized_rate == config.payload_rate / 3
    assert hits >= 2


def test_decode_needs_blocks(config):
    with pytest.raises(ValueError):
        combine_and_decode(RatelessSession.start(config, 0), 0.1)


def test_single_layer_low_noise():
    mlc = provision_mlc(build_threshold_mapper(2, 1), 512, 0.05, family="polar", trials=300,
                        seed=1, dither=True)
    cfg = RatelessConfig([0.25], 0.05, [mlc])
    recs = [run_trial(cfg, 0.05, s) for s in range(5)]
    assert all(r.success for r in recs)
    assert sum(r.blocks_used == 1 for r in recs) >= 4


def test_trial_laws(config):
    recs = run_batch(config, [0.05, 0.1, 0.2], 5, base_seed=10)
    assert len(recs) == 15
    for r in recs:
        if r.success:
            assert r.realized_rate == config.payload_rate / r.blocks_used
            assert r.realized_rate <= 1 - binary_entropy(r.true_h)
        else:
            assert r.realized_rate == 0.0
    assert sum(r.success for r in recs) >= 14


@pytest.mark.xfail(strict=False, reason="small upper layers carry tens of capacity bits, "
                   "so a 25% back-off is within one finite-length standard deviation")
def test_h_min_single_block(config):
    recs = run_batch(config, [0.05], 20, base_seed=100)
    assert sum(r.success and r.blocks_used == 1 for r in recs) >= 16


def test_trial_deterministic(config):
    assert run_trial(config, 0.15, 3) == run_trial(config, 0.15, 3)


def test_useless_channel_hits_cap(config):
    capped = dataclasses.replace(config, max_blocks=3)
    rec = run_trial(capped, 0.49, 0)
    assert rec.blocks_used == 3 and not rec.success and rec.realized_rate == 0.0
    with pytest.raises(ValueError):
        run_trial(config, 0.01, 0)


def test_trials_csv(config, tmp_path):
    out = tmp_path / "trials.csv"
    write_trials_csv(run_batch(config, [0.1], 2), out)
    rows = list(csv.DictReader(open(out)))
    assert tuple(rows[0]) == TRIAL_COLUMNS
    assert len(rows) == 2 and rows[0]["seed"] == "0"
