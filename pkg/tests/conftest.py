import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from softjig.geometry import Polygon
from softjig.jig import ChamberDesign, ShellJig

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

# acceptance verdicts, filled by test_acceptance.py and echoed in the terminal summary
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n}. {title}")


@st.composite
def star_polygons(draw, min_vertices=3, max_vertices=9, r_min=0.5, r_max=20.0, spread=10.0):
    """Simple star-shaped polygons around a random centre (jittered angles keep them simple)."""
    n = draw(st.integers(min_vertices, max_vertices))
    jitter = draw(st.lists(st.floats(-0.35, 0.35), min_size=n, max_size=n))
    radii = draw(st.lists(st.floats(r_min, r_max), min_size=n, max_size=n))
    cx = draw(st.floats(-spread, spread))
    cy = draw(st.floats(-spread, spread))
    rot = draw(st.floats(0.0, 2 * math.pi))
    ang = rot + (np.arange(n) + np.array(jitter)) * 2 * math.pi / n
    r = np.array(radii)
    return Polygon(np.column_stack((cx + r * np.cos(ang), cy + r * np.sin(ang))))


@st.composite
def jigs(draw, allow_zero=False):
    radius = draw(st.floats(20.0, 50.0))
    n = draw(st.integers(0 if allow_zero else 1, 6))
    span = draw(st.floats(0.2, 0.95)) * 2 * math.pi / max(n, 1)
    chamber = ChamberDesign(arc_span=span, max_protrusion=draw(st.floats(0.0, 0.9)) * radius)
    return ShellJig.symmetric(radius, n, chamber, offset=draw(st.floats(0.0, 2 * math.pi)))


def random_star(rng: np.random.Generator, scale: float, k_range=(3, 9)) -> Polygon:
    k = int(rng.integers(*k_range))
    ang = (np.arange(k) + rng.uniform(-0.3, 0.3, k)) * 2 * math.pi / k
    rad = rng.uniform(0.1, 0.7, k) * scale
    return Polygon(np.column_stack((rad * np.cos(ang), rad * np.sin(ang))))


def random_jig(rng: np.random.Generator, allow_zero: bool = True) -> ShellJig:
    radius = rng.uniform(20, 50)
    n = int(rng.integers(0 if allow_zero else 1, 6))
    span = rng.uniform(0.2, 0.95) * 2 * math.pi / max(n, 1)
    chamber = ChamberDesign(arc_span=span, max_protrusion=rng.uniform(0, 0.9) * radius)
    return ShellJig.symmetric(radius, n, chamber, offset=rng.uniform(0, 2 * math.pi))


@pytest.fixture
def unit_square():
    return Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
