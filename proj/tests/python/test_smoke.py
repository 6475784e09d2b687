import math

import numpy as np
import pytest

import mfbalance


def test_hand_examples():
    r = mfbalance.imbalance([[0.8, 0, 0], [0.4, 0, 0]], [[400, 1, 1], [300, 1, 1]])
    assert r["averages"][0] == pytest.approx(440 / 700, abs=1e-12)
    r = mfbalance.imbalance([[0.8, 0, 0], [0.4, 0, 0]], [[1, 1, 1], [1, 1, 1]])
    assert r["imb_cpu"] == pytest.approx(0.08, abs=1e-12)


def test_identical_loads_give_zero():
    r = mfbalance.imbalance([[0.3, 0.5, 0.7]] * 4, [[100, 200, 50], [7, 9, 11], [1, 1, 1], [3, 300, 30]])
    assert r["imb_tot"] == 0.0 and r["imb_cpu"] == 0.0


def test_fgn_hurst():
    c = mfbalance.hurst_curve(mfbalance.fgn(0.8, 1 << 14, seed=3))
    assert abs(c["h2"] - 0.8) < 0.08
    assert len(c["q"]) == len(c["h"]) == 10


def test_generate_and_simulate():
    g = mfbalance.generate(0.8, 2.0, seed=2)
    assert g["slots"].shape == (4096,) and np.all(g["slots"] >= 0)
    r = mfbalance.simulate(0.8, 2.0, seed=2)
    assert len(r["t"]) == len(r["imb_tot"]) > 0
    assert math.isfinite(r["summary"]["imb_tot_final"])


def test_bad_policy_raises():
    with pytest.raises(mfbalance.Error):
        mfbalance.simulate(policy="fastest")


def test_small_sweep():
    rows = mfbalance.sweep(seeds=2, cells=[(0.7, 1.5)])
    assert len(rows) == 1 and rows[0]["seeds"] == 2
