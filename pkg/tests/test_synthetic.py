import numpy as np
import pytest

from scadanb import data as D
from scadanb.errors import InvalidConfig
from scadanb.hard_filters import apply_hard_filters
from scadanb.synthetic import RecalibrationEvent, SyntheticConfig, generate_synthetic, power_curve


def test_null_generator_is_on_the_curve():
    cfg = SyntheticConfig(seed=2, n_years=1, noise_scale=0.0, availability=0.05)
    f = generate_synthetic(cfg)
    assert set(f.labels) == {"normal"}
    ws = f.column(D.WIND_SPEED)
    assert np.array_equal(f.column(D.GRID_POWER), power_curve(ws, cfg))


def test_power_curve_shape():
    cfg = SyntheticConfig()
    ws = np.array([0.0, 2.9, 3.0, 7.5, 12.0, 25.0, 25.1])
    p = power_curve(ws, cfg)
    assert p[0] == p[1] == p[-1] == 0.0
    assert p[3] == pytest.approx(cfg.rated_power / 2)
    assert np.all(np.diff(power_curve(np.linspace(3, 25, 50), cfg)) >= 0)


def test_generator_is_deterministic():
    cfg = SyntheticConfig(seed=5, n_years=1, availability=0.05, degradation_rate=0.02,
                          anomaly_rates={1: 0.05, 2: 0.05, 3: 0.05, 4: 0.05})
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    assert a.data.equals(b.data)
    assert np.array_equal(a.labels, b.labels)
    c = generate_synthetic(SyntheticConfig(**{**cfg.__dict__, "turbine_id": 2}))
    assert not np.array_equal(a.column(D.WIND_SPEED), c.column(D.WIND_SPEED)[: len(a)])


def test_anomaly1_fraction():
    cfg = SyntheticConfig(seed=11, n_years=2, anomaly_rates={1: 0.05})
    f = generate_synthetic(cfg)
    assert len(f) >= 100_000
    frac = np.mean(f.labels == "anomaly1")
    assert abs(frac - 0.05) <= 0.005


def test_label_consistency():
    cfg = SyntheticConfig(seed=4, n_years=1, availability=0.3,
                          anomaly_rates={1: 0.05, 2: 0.05, 3: 0.05, 4: 0.05})
    f = generate_synthetic(cfg)
    t1 = f.labels == "anomaly1"
    assert t1.any()
    assert np.all(f.column(D.WIND_SPEED)[t1] >= cfg.cut_in)
    assert np.all(f.column(D.GRID_POWER)[t1] == 0)
    t2 = f.labels == "anomaly2"
    assert np.all(f.matrix(D.PITCH_ANGLES)[t2] > 0)
    assert np.all(f.column(D.GRID_POWER)[t2] < cfg.rated_power)
    t4 = f.labels == "anomaly4"
    assert np.all(f.column(D.WIND_SPEED)[t4] >= 11.5)
    for lab in ("anomaly1", "anomaly2", "anomaly3", "anomaly4"):
        assert np.mean(f.labels == lab) == pytest.approx(0.05, abs=1e-3)


def test_baseline_physics():
    cfg = SyntheticConfig(seed=0, n_years=1, availability=0.2)
    f = generate_synthetic(cfg)
    ws = f.column(D.WIND_SPEED)
    low = ws < 9.0
    assert np.all(np.abs(f.matrix(D.PITCH_ANGLES)[low]) < 1.5)
    loads = f.matrix(D.BLADE_LOADS)
    assert np.mean(loads < 0) > 0.999
    assert np.corrcoef(loads[:, 0], f.column(D.GRID_POWER))[0, 1] < -0.95
    temp = f.column(D.AMB_TEMP)
    q = D.calendar_quarters(f.times)
    assert temp[q == 3].mean() > temp[q == 1].mean() + 8


def test_degradation_multiplies_power_by_year():
    base = SyntheticConfig(seed=9, n_years=3, noise_scale=0.0, availability=0.05)
    deg = SyntheticConfig(**{**base.__dict__, "degradation_rate": 0.02})
    a, b = generate_synthetic(base), generate_synthetic(deg)
    years = a.years
    pa, pb = a.column(D.GRID_POWER), b.column(D.GRID_POWER)
    on = pa > 0
    for k, yr in enumerate((2018, 2019, 2020)):
        sel = on & (years == yr)
        assert np.allclose(pb[sel] / pa[sel], 0.98**k)


def test_recalibration_offset():
    t0 = D.epoch_minutes(2018, 7, 1)
    cfg = SyntheticConfig(seed=1, n_years=1, availability=0.05,
                          recalibration_events=[(t0, "WdAbs", 10.0)])
    ref = generate_synthetic(SyntheticConfig(seed=1, n_years=1, availability=0.05))
    f = generate_synthetic(cfg)
    after = f.times >= t0
    assert np.allclose(f.column(D.WD_ABS)[after] - ref.column(D.WD_ABS)[after], 10.0)
    assert np.array_equal(f.column(D.WD_ABS)[~after], ref.column(D.WD_ABS)[~after])
    assert set(f.labels[after]) == {"recalibration-affected"}
    assert isinstance(cfg.recalibration_events[0], RecalibrationEvent)


@pytest.mark.parametrize("kw", [
    {"anomaly_rates": {1: 1.5}},
    {"anomaly_rates": {5: 0.1}},
    {"anomaly_rates": {1: 0.6, 2: 0.6}},
    {"degradation_rate": -0.1},
    {"n_years": 0},
    {"cut_in": 15.0},
    {"availability": 0.0},
    {"recalibration_events": [(0, "Nope", 1.0)]},
])
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        generate_synthetic(SyntheticConfig(**kw))


def test_type2_anomalies_removed_by_hard_filters(anomalous_frame):
    kept, _ = apply_hard_filters(anomalous_frame)
    assert not np.any(kept.labels == "anomaly2")


def test_config_manifest_records_curve():
    d = SyntheticConfig(anomaly_rates={1: 0.1}).to_dict()
    assert "logistic" in d["power_curve"]
    assert d["anomaly_rates"] == {"1": 0.1}
