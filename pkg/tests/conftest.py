import numpy as np
import pandas as pd
import pytest

from tempfe.paneldata import join_firm_weather
from tempfe.synth import SynthScenario, generate_panel


@pytest.fixture(scope="session")
def small_generated():
    return generate_panel(SynthScenario(n_firms=60, n_years=4, n_cities=6, n_industries=3, seed=11))


@pytest.fixture(scope="session")
def small_panel(small_generated):
    g = small_generated
    return join_firm_weather(g.firms, g.weather)


@pytest.fixture(scope="session")
def default_panel():
    g = generate_panel(SynthScenario(seed=5))
    return join_firm_weather(g.firms, g.weather)


def random_fe_panel(rng, max_rows=200, max_firms=20, max_years=5, k=3):
    """Unbalanced firm-year panel with standard normal regressors."""
    n_firms = int(rng.integers(3, max_firms + 1))
    n_years = int(rng.integers(2, max_years + 1))
    n_cities = int(rng.integers(2, 6))
    cells = [(f, y) for f in range(n_firms) for y in range(n_years)]
    n = int(min(len(cells), rng.integers(20, max_rows + 1)))
    pick = rng.choice(len(cells), size=n, replace=False)
    firm = np.array([cells[i][0] for i in pick])
    year = np.array([cells[i][1] for i in pick]) + 2005
    city_of = rng.integers(0, n_cities, n_firms)
    frame = pd.DataFrame({"firm_id": [f"F{f}" for f in firm], "year": year,
                          "city_code": [f"C{c}" for c in city_of[firm]]})
    x = rng.normal(size=(n, k))
    labels = [f"x{j + 1}" for j in range(k)]
    for j, lab in enumerate(labels):
        frame[lab] = x[:, j]
    frame["cvalue"] = (x @ rng.normal(size=k) + 0.5 * rng.normal(size=n_firms)[firm]
                       + 0.3 * rng.normal(size=n_years)[year - 2005] + rng.normal(size=n))
    return frame, labels
