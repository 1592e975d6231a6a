import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from loyaltygame.loyalty import LoyaltyModel, MarketParams

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIG2 = dict(c_B=0.4, l_alpha=1.0, s_alpha=3.0, l_beta=4.0, s_beta=3.0, theta0=0.8)


def fig2_params(gap: float) -> MarketParams:
    p = FIG2
    return MarketParams(p["c_B"] + gap, p["c_B"], LoyaltyModel.linear(p["l_alpha"], p["s_alpha"], p["l_beta"], p["s_beta"]),
                        p["theta0"])


def symmetric_ml(delta: float = 0.0, l: float = 1.0, c: float = 0.0) -> MarketParams:
    return MarketParams(c, c, LoyaltyModel.multiplicative(l, l), 0.5, delta, delta)


positive = st.floats(0.05, 5.0, allow_nan=False)
nonneg = st.floats(0.0, 5.0, allow_nan=False)
unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def linear_params(draw, family: str = "linear"):
    la, lb = draw(positive), draw(positive)
    sa, sb = draw(nonneg), draw(nonneg)
    if family == "multiplicative":
        model = LoyaltyModel.multiplicative(la, lb)
    elif family == "additive":
        model = LoyaltyModel.additive(sa, sb)
    else:
        model = LoyaltyModel.linear(la, sa, lb, sb)
    c_B = draw(st.floats(0.0, 3.0))
    gap = draw(st.floats(0.0, 12.0))
    return MarketParams(c_B + gap, c_B, model, draw(unit))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
