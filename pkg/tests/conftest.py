import numpy as np
import pandas as pd
import pytest

from scadanb import data as D
from scadanb.synthetic import SyntheticConfig, generate_synthetic

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def make_test_frame(n=100, turbine_id=1, start=None, **cols):
    """Frame with benign defaults on a 10-minute grid; override any column."""
    start = D.epoch_minutes(2018) if start is None else start
    base = {
        D.TIME: start + 10 * np.arange(n),
        D.AMB_TEMP: np.full(n, 10.0),
        D.BLADE_LOADS[0]: np.full(n, -500.0),
        D.BLADE_LOADS[1]: np.full(n, -500.0),
        D.BLADE_LOADS[2]: np.full(n, -500.0),
        D.GRID_POWER: np.full(n, 1000.0),
        D.WIND_SPEED: np.full(n, 8.0),
        D.PITCH_ANGLES[0]: np.full(n, -0.5),
        D.PITCH_ANGLES[1]: np.full(n, -0.5),
        D.PITCH_ANGLES[2]: np.full(n, -0.5),
        D.WD_ABS: np.full(n, 180.0),
        D.WIND_DIR_REL: np.zeros(n),
        D.WSE: np.full(n, 8.0),
    }
    for k, v in cols.items():
        base[k] = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    return D.ScadaFrame(turbine_id, pd.DataFrame(base))


@pytest.fixture(scope="session")
def anomalous_frame():
    cfg = SyntheticConfig(seed=3, n_years=2, availability=0.25,
                          anomaly_rates={1: 0.05, 2: 0.05, 3: 0.05, 4: 0.05})
    return generate_synthetic(cfg)
