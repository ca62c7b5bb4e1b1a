import math

import numpy as np
import pytest
from hypothesis import strategies as st

from ewdloss.geom import OBox5

coord = st.floats(-50, 50, allow_nan=False)
side = st.floats(0.1, 30, allow_nan=False)
angle = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@st.composite
def boxes(draw):
    return OBox5(draw(coord), draw(coord), draw(side), draw(side), draw(angle))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_box(rng, center=10.0, size=(0.1, 20.0)):
    return OBox5(float(rng.uniform(-center, center)), float(rng.uniform(-center, center)),
                 float(rng.uniform(*size)), float(rng.uniform(*size)),
                 float(rng.uniform(-math.pi, math.pi)))


# (status, label, detail) per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for status, label, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{status} {label}" + (f"  ({detail})" if detail else ""))
