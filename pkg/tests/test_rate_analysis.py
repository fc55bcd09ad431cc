import csv
import itertools

import numpy as np
import pytest

from mlcnui.infotheory import Dmc, bsc_nui_rate
from mlcnui.mapper import DeterministicMapper, build_threshold_mapper
from mlcnui.rate_analysis import (bicm_rate, envelope_rate, layer_rates,
                                  layering_chain_identity, sweep_h, sweep_p,
                                  timeshare_zeros_rate, write_curve_csv)

from oracles import (BICM_H03, LEVEL1_H03, LEVEL2_H03, RATE_P025_H01, RATE_P025_H03,
                     TS_ZEROS_P025_H01)

H_GRID = [0.01 + 0.04 * i for i in range(13)]


def test_layer_rates_threshold_2_1():
    rep = layer_rates(build_threshold_mapper(2, 1), Dmc.bsc(0.3))
    assert rep.per_layer_rates[0] == pytest.approx(LEVEL1_H03, abs=1e-12)
    assert rep.per_layer_rates[1] == pytest.approx(LEVEL2_H03, abs=1e-12)
    assert rep.total == pytest.approx(RATE_P025_H03, abs=1e-12)
    assert rep.channel_rate == pytest.approx(RATE_P025_H03, abs=1e-12)


def test_layer_rates_degenerate_mappers():
    rep = layer_rates(build_threshold_mapper(1, 1), Dmc.bsc(0.1))
    assert rep.total == pytest.approx(bsc_nui_rate(0.5, 0.1), abs=1e-12)
    rep = layer_rates(build_threshold_mapper(3, 0), Dmc.bsc(0.1))
    assert rep.total == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_chain_rule_all_thresholds(m):
    for k in range(2 ** m + 1):
        mapper = build_threshold_mapper(m, k)
        for h in H_GRID:
            rep = layer_rates(mapper, Dmc.bsc(h))
            assert abs(rep.total - bsc_nui_rate(k / 2 ** m, h)) <= 1e-10
            assert min(rep.per_layer_rates) >= -1e-12


def test_assignment_changes_split_not_sum():
    base = build_threshold_mapper(3, 3)
    ch = Dmc.bsc(0.2)
    totals, splits = set(), set()
    for perm in itertools.islice(itertools.permutations(range(8)), 0, 40320, 997):
        mapper = DeterministicMapper(3, tuple(base.table[j] for j in perm))
        rep = layer_rates(mapper, ch)
        totals.add(round(rep.total, 12))
        splits.add(tuple(round(r, 9) for r in rep.per_layer_rates))
    assert len(totals) == 1
    assert len(splits) > 1


def test_mapper_channel_mismatch():
    mapper = DeterministicMapper(1, (0, 2), 3)
    with pytest.raises(ValueError):
        layer_rates(mapper, Dmc.bsc(0.1))


def test_bicm_value_and_ordering():
    mapper = build_threshold_mapper(2, 1)
    assert bicm_rate(mapper, Dmc.bsc(0.3)) == pytest.approx(BICM_H03, abs=1e-12)
    for h in np.linspace(0.01, 0.49, 25):
        assert bicm_rate(mapper, Dmc.bsc(h)) < layer_rates(mapper, Dmc.bsc(h)).total


def test_timeshare_zeros():
    assert timeshare_zeros_rate(0.25, 0.1) == pytest.approx(TS_ZEROS_P025_H01, abs=1e-12)
    assert timeshare_zeros_rate(0.5, 0.0) == 1.0
    with pytest.raises(ValueError):
        timeshare_zeros_rate(0.6, 0.1)


def test_sweep_h_examples():
    rows = sweep_h(0.25, 2, [0.0, 0.1, 0.5])
    assert rows[0]["mlc"] == pytest.approx(0.8112781245, abs=1e-10)
    assert rows[1]["mlc"] == pytest.approx(RATE_P025_H01, abs=1e-12)
    assert rows[1]["ts_zeros"] == pytest.approx(TS_ZEROS_P025_H01, abs=1e-12)
    assert all(abs(rows[2][c]) < 1e-15 for c in ("mlc", "bicm", "ts_zeros"))


def test_sweep_h_pointwise_and_monotone():
    grid = np.linspace(0.01, 0.49, 49)
    rows = sweep_h(0.25, 2, grid)
    mlc = [r["mlc"] for r in rows]
    for r in rows:
        assert abs(r["mlc"] - bsc_nui_rate(0.25, r["h"])) <= 1e-12
    assert all(a > b for a, b in zip(mlc, mlc[1:]))


def test_sweep_validation():
    with pytest.raises(ValueError):
        sweep_h(0.3, 2, [0.1])
    with pytest.raises(ValueError):
        sweep_h(0.25, 2, [0.7])
    with pytest.raises(ValueError):
        sweep_p(0.6, 3, [0.1])


def test_sweep_p_examples():
    rows = sweep_p(0.3, 3, [k / 8 for k in range(5)] + [0.4])
    for r in rows[:5]:
        assert r["envelope"] == pytest.approx(r["mlc"], abs=1e-15)
    assert rows[0]["mlc"] == rows[0]["envelope"] == rows[0]["ts_zeros"] == 0.0
    expect = 0.8 * bsc_nui_rate(3 / 8, 0.3) + 0.2 * bsc_nui_rate(0.5, 0.3)
    assert rows[-1]["envelope"] == pytest.approx(expect, abs=1e-14)
    assert envelope_rate(0.4, 0.3, 3) == rows[-1]["envelope"]


def test_envelope_is_chord():
    p = np.linspace(0, 0.5, 101)
    env = [envelope_rate(x, 0.3, 3) for x in p]
    for x, e in zip(p, env):
        assert e <= bsc_nui_rate(x, 0.3) + 1e-12


def test_write_curve_csv(tmp_path):
    out = tmp_path / "c.csv"
    write_curve_csv(sweep_p(0.3, 3, [0.0, 0.25]), out, ("p1", "mlc", "envelope", "ts_zeros"))
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["p1", "mlc", "envelope", "ts_zeros"]
    assert float(rows[2][1]) == pytest.approx(bsc_nui_rate(0.25, 0.3), abs=1e-14)


@pytest.mark.parametrize("p_list", [[0.1], [0.25, 0.4], [0.1, 0.25, 0.4], [0.4, 0.4, 0.1]])
@pytest.mark.parametrize("h", [0.1, 0.3])
def test_layering_chain_identity(p_list, h):
    rep = layering_chain_identity(p_list, h)
    assert rep.max_discrepancy <= 1e-12


def test_layering_limits():
    with pytest.raises(ValueError):
        layering_chain_identity([], 0.1)
    with pytest.raises(ValueError):
        layering_chain_identity([0.1] * 13, 0.1)
