import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocgnet.errors import InvalidConfigError, InvalidInputError
from ocgnet.gkt import ClickPoint, GktConfig, default_sigma, gkt_map


def scalar_gkt(x, y, sigma, h, w, i, j):
    """Direct evaluation of the kernel with plain floats."""
    sigma_n = sigma * math.sqrt(h * h + w * w)
    return math.exp(-((j - x) ** 2 + (i - y) ** 2) / (2 * sigma_n**2))


def test_click_pixel_is_one():
    m = gkt_map(ClickPoint(128, 128), GktConfig(0.075, 256, 256))
    assert m[128, 128] == pytest.approx(1.0)
    assert m.shape == (256, 256)


def test_value_at_27px_matches_scalar_oracle():
    m = gkt_map(ClickPoint(128, 128), GktConfig(0.075, 256, 256))
    expected = scalar_gkt(128, 128, 0.075, 256, 256, 128, 128 + 27)
    assert expected == pytest.approx(0.6102, abs=5e-4)
    assert m[128, 128 + 27] == pytest.approx(expected, rel=1e-5)


def test_tiny_grid_symmetry_and_bounds():
    m = gkt_map(ClickPoint(0, 0), GktConfig(10, 2, 2))
    lo = math.exp(-2 / (2 * (10 * math.sqrt(8)) ** 2))
    assert m[0, 0] == pytest.approx(1.0)
    assert np.all(m >= lo - 1e-6) and np.all(m <= 1.0)
    assert m[0, 1] == m[1, 0]


def test_pointwise_monotone_in_sigma():
    click = ClickPoint(40.5, 17.2)
    small = gkt_map(click, GktConfig(0.05, 96, 128))
    large = gkt_map(click, GktConfig(0.10, 96, 128))
    # reference loop over every pixel
    for i in range(96):
        for j in range(0, 128, 7):
            assert large[i, j] >= small[i, j]
    assert np.all(large >= small)


def test_radial_monotonicity():
    rng = np.random.default_rng(3)
    click = ClickPoint(31.3, 55.9)
    cfg = GktConfig(0.08, 80, 72)
    m = gkt_map(click, cfg)
    ys = rng.integers(0, 80, 300)
    xs = rng.integers(0, 72, 300)
    d2 = (xs - click.x) ** 2 + (ys - click.y) ** 2
    order = np.argsort(d2)
    vals = m[ys[order], xs[order]]
    # float32 grid: allow ulp-level inversions between near-equal distances
    assert np.all(np.diff(vals) <= 1e-6)


def test_mirror_click_mirrors_map_bit_identical():
    cfg = GktConfig(0.075, 64, 96)
    m1 = gkt_map(ClickPoint(20, 10), cfg)
    m2 = gkt_map(ClickPoint(96 - 1 - 20, 64 - 1 - 10), cfg)
    assert np.array_equal(m1, m2[::-1, ::-1])


def test_value_at_sigma_n_distance_is_scale_invariant():
    # exp(-0.5) at distance sigma_n regardless of image size
    for h, w in [(256, 256), (256, 512), (64, 64)]:
        cfg = GktConfig(0.075, h, w)
        sigma_n = cfg.sigma_n
        click = ClickPoint(w / 4, h / 4)
        val = math.exp(
            -(sigma_n**2) / (2 * cfg.sigma_n**2)
        )
        assert val == pytest.approx(math.exp(-0.5), abs=1e-9)
        # numerically on the grid at the nearest representable offset
        m = gkt_map(click, cfg)
        assert m.max() == m[int(round(click.y)), int(round(click.x))]


def test_errors():
    with pytest.raises(InvalidInputError):
        gkt_map(ClickPoint(300, 10), GktConfig(0.075, 256, 256))
    with pytest.raises(InvalidInputError):
        gkt_map(ClickPoint(-1, 0), GktConfig(0.075, 256, 256))
    with pytest.raises(InvalidConfigError):
        GktConfig(0.0, 256, 256)
    with pytest.raises(InvalidConfigError):
        GktConfig(0.075, 0, 256)


def test_default_sigma_per_kind():
    assert default_sigma("drone") == 0.075
    assert default_sigma("ground") == 0.15
    with pytest.raises(InvalidInputError):
        default_sigma("airplane")


@settings(max_examples=50, deadline=None)
@given(
    h=st.integers(8, 64),
    w=st.integers(8, 64),
    sigma=st.floats(0.02, 0.5),
    fx=st.floats(0, 0.999),
    fy=st.floats(0, 0.999),
)
def test_property_max_at_click_and_range(h, w, sigma, fx, fy):
    click = ClickPoint(fx * w, fy * h)
    m = gkt_map(click, GktConfig(sigma, h, w))
    # tiny sigma can underflow float32 far from the click, hence >= 0
    assert 0 <= m.min() <= m.max() <= 1.0
    assert m.max() == m[min(int(round(click.y)), h - 1), min(int(round(click.x)), w - 1)]
