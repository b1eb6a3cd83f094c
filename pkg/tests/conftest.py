import numpy as np
import pytest
from hypothesis import strategies as st

from abpcap.convexbody import ContactConfig, ConvexSection, random_section, sample_boundary

SQUARE = ConvexSection.polygon([[-1, -1], [1, -1], [1, 1], [-1, 1]])


def two_point_config():
    return ContactConfig([[0, 1], [1, 0]], [[0, 1], [1, 0]], [0, 0])


def facet_config(values=(0.3, -0.1, 0.5)):
    xs = np.linspace(-0.8, 0.8, len(values))
    pts = np.column_stack((xs, np.ones_like(xs)))
    return ContactConfig(pts, np.tile([0.0, 1.0], (len(xs), 1)), values, SQUARE)


def strip_config():
    """Contacts on the square whose middle cell is the strip |xi_y| <= 1/2."""
    return ContactConfig([[1, 0], [1, 1], [1, -1]], [[1, 0], [0, 1], [0, -1]], [0, 0.5, 0.5])


def random_config(seed, n=None, value_range=(-2.0, 2.0)):
    rng = np.random.default_rng(seed)
    body = random_section(rng)
    n = int(rng.integers(1, 13)) if n is None else n
    cfg = sample_boundary(body, n, rng)
    return cfg.with_values(rng.uniform(*value_range, n))


@pytest.fixture
def two_point():
    return two_point_config()


seeds = st.integers(min_value=0, max_value=2**32 - 1)
lambdas = st.floats(min_value=-0.95, max_value=0.95)
