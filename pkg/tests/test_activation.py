"""Decay-matrix activation study."""

import json
import math

import numpy as np
import pytest

from spikederain.analysis.activation import ActivationReport, decay_matrix, decay_matrix_experiment, lif_fired, vlif_fired
from spikederain.neurons import NeuronConfig
from spikederain.vlif import VlifConfig


def test_decay_matrix_entries():
    m = decay_matrix(5, 2.0)
    assert m[2, 2] == 0.9
    assert m[0, 3] == pytest.approx(0.9 * math.exp(-1.5), rel=1e-15)
    assert np.array_equal(m, m.T)


def test_decay_matrix_validation():
    with pytest.raises(ValueError):
        decay_matrix(0)
    with pytest.raises(ValueError):
        decay_matrix(4, 0.0)


def test_lif_is_silent_below_threshold():
    # max entry 0.9 never reaches theta=1 in a single step
    assert not lif_fired(decay_matrix(16), 1, NeuronConfig()).any()


def test_lif_fires_on_accumulation():
    fired = lif_fired(np.array([[0.9, 0.3]]), 2, NeuronConfig(beta=0.5))
    assert fired.tolist() == [[True, False]]


def test_vlif_fires_from_context():
    fired = vlif_fired(decay_matrix(16), 1, VlifConfig())
    assert fired.any()
    # firing concentrates on the bright diagonal band
    assert fired[np.eye(16, dtype=bool)].mean() > fired[~np.eye(16, dtype=bool)].mean()


def test_experiment_report():
    rep = decay_matrix_experiment(16, n_buckets=4)
    assert rep.lif_rate == 0.0 and rep.vlif_rate > 0.0
    assert rep.ratio == math.inf
    d = rep.to_dict()
    json.dumps(d)
    assert d["ratio"] is None
    assert sum(b["count"] for b in d["buckets"]) >= 16 * 16
    assert "VLIF activation" in rep.to_text()


def test_ratio_cases():
    base = dict(n=1, sigma=1.0, timesteps=1, low_bucket=None)
    assert ActivationReport(lif_rate=0.2, vlif_rate=0.5, **base).ratio == pytest.approx(2.5)
    assert math.isnan(ActivationReport(lif_rate=0.0, vlif_rate=0.0, **base).ratio)


def test_r_must_divide_n():
    with pytest.raises(ValueError):
        decay_matrix_experiment(15)
