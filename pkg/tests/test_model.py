import math

import pytest

from sc3opt.errors import ScenarioError
from sc3opt.model import (
    Budget,
    ChannelGeometry,
    LinkSpec,
    LogBase,
    LoopSpec,
    link_bits,
    pathloss_db,
    received_snr_db,
    se_from_geometry,
    spectral_efficiency,
    transmit_power_dbm,
)
from sc3opt.scenario import reference_summary


def test_pathloss_formula():
    g = ChannelGeometry(2.0, 2000.0)
    assert pathloss_db(g) == pytest.approx(32.4 + 20 * math.log10(2.0) + 20 * math.log10(2000.0), rel=1e-14)
    g2 = ChannelGeometry(2.0, 2000.0, pathloss_log_base=LogBase.LOG2)
    assert pathloss_db(g2) == pytest.approx(32.4 + 20 * 1.0 + 20 * math.log2(2000.0), rel=1e-14)


def test_target_snr_held_at_reference_distance():
    g = ChannelGeometry(1.0, 2000.0, target_snr_db=31.6)
    assert received_snr_db(g) == pytest.approx(31.6, abs=1e-12)
    far = ChannelGeometry(10.0, 2000.0, target_snr_db=31.6)
    assert received_snr_db(far) == pytest.approx(11.6, abs=1e-12)
    assert transmit_power_dbm(g) == pytest.approx(31.6 - 107.0 + pathloss_db(g), abs=1e-12)


def test_spectral_efficiency():
    assert spectral_efficiency(0.0) == 0.0
    assert spectral_efficiency(3.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        spectral_efficiency(-1.0)
    assert se_from_geometry(ChannelGeometry(1.0, 2000.0, target_snr_db=10 * math.log10(3.0))) == pytest.approx(2.0)
    assert link_bits(1e6, 1e-3, 2.0) == pytest.approx(2000.0)


def test_se_decreases_with_distance():
    near = se_from_geometry(ChannelGeometry(0.5, 2000.0, target_snr_db=31.6))
    far = se_from_geometry(ChannelGeometry(5.0, 2000.0, target_snr_db=31.6))
    assert near > far > 0


def test_validation():
    with pytest.raises(ScenarioError):
        ChannelGeometry(0.0, 2000.0)
    with pytest.raises(ScenarioError):
        LinkSpec(0.0)
    with pytest.raises(ScenarioError):
        Budget(0.0, 1e9)
    s = reference_summary(10, 5.0)
    with pytest.raises(ScenarioError):
        LoopSpec(0.01, 1.5, 100.0, LinkSpec(1.0), LinkSpec(1.0), s)
    with pytest.raises(ScenarioError):
        LoopSpec(-0.01, 0.5, 100.0, LinkSpec(1.0), LinkSpec(1.0), s)
    with pytest.raises(ScenarioError):
        LoopSpec(0.01, 0.5, 0.0, LinkSpec(1.0), LinkSpec(1.0), s)
