import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquasweep import boost
from aquasweep.boost import BoostTriple
from aquasweep.errors import NumericalError


def test_blend_fixed_point(rng):
    d = rng.uniform(0.01, 0.3, (12, 16))
    out = boost.blend(BoostTriple(d, d.copy(), d.copy()))
    np.testing.assert_array_equal(out, d)


def test_literal_denominator_breaks_fixed_point(rng):
    d = rng.uniform(0.01, 0.3, (12, 16))
    lit = boost.blend(BoostTriple(d, d, d), eq8_literal=True)
    assert np.max(np.abs(lit - d) / d) > 0.1
    # the printed denominator exceeds the weight sum by 2 m^2
    total = 3 * d
    m = total / total.max()
    np.testing.assert_allclose(lit, d * (2 + m - m * m) / (2 + m + m * m), rtol=1e-12)


def test_blend_weights_at_extremes():
    f = np.array([[0.30, 0.01]])
    r = np.array([[0.28, 0.012]])
    a = np.array([[0.32, 0.011]])
    out = boost.blend(BoostTriple(f, r, a))
    # the first pixel holds the global maximum, so m = 1 and weights are (1, 1, 0)
    assert out[0, 0] == pytest.approx((0.30 + 0.28) / 2, abs=1e-15)
    m = (0.01 + 0.012 + 0.011) / (0.30 + 0.28 + 0.32)
    expected = (0.01 + m * 0.012 + (1 - m * m) * 0.011) / (1 + m + 1 - m * m)
    assert out[0, 1] == pytest.approx(expected, rel=1e-12)
    # as m approaches 0 the weights approach (1, 0, 1)
    assert out[0, 1] == pytest.approx((0.01 + 0.011) / 2, rel=0.03)


@settings(max_examples=1000, deadline=None)
@given(
    f=st.floats(1e-3, 10.0), r=st.floats(1e-3, 10.0), a=st.floats(1e-3, 10.0), peak=st.floats(0.0, 20.0),
)
def test_blend_is_convex(f, r, a, peak):
    # a second pixel sets the image maximum so m sweeps (0, 1]
    tri = BoostTriple(np.array([f, peak + f]), np.array([r, peak + r]), np.array([a, peak + a]))
    out = boost.blend(tri)[0]
    lo, hi = min(f, r, a), max(f, r, a)
    assert lo * (1 - 1e-12) <= out <= hi * (1 + 1e-12)


def test_weights_monotone_in_normalized_mean():
    m = np.linspace(0.0, 1.0, 101)
    w_full, w_down, w_up = np.ones_like(m), m, 1 - m * m
    denom = w_full + w_down + w_up
    assert np.all(np.diff(w_up / denom) <= 1e-15)
    assert np.all(np.diff(w_down / denom) >= -1e-15)
    # read the shares back through blend by nudging one pass at a time
    x = np.linspace(0.01, 1.0, 60)
    eps = 1e-7
    ref = boost.blend(BoostTriple(x, x, x))
    share_down = (boost.blend(BoostTriple(x, x + eps * x, x)) - ref) / (eps * x)
    share_up = (boost.blend(BoostTriple(x, x, x + eps * x)) - ref) / (eps * x)
    assert np.all(np.diff(share_down) >= -1e-6)
    assert np.all(np.diff(share_up) <= 1e-6)
    assert share_up[0] > share_down[0] and share_down[-1] > share_up[-1]


def test_blend_rejects_zero_triple():
    z = np.zeros((3, 3))
    with pytest.raises(NumericalError, match="degenerate disparity"):
        boost.blend(BoostTriple(z, z, z))


def test_triple_shape_mismatch():
    with pytest.raises(ValueError):
        BoostTriple(np.ones((2, 2)), np.ones((2, 3)), np.ones((2, 2)))


# -- passes and resizing ------------------------------------------------------


def test_intermediate_sizes():
    seen = []

    def est(image, positions):
        seen.append(image.shape[:2])
        assert positions.shape[:2] == image.shape[:2]
        return np.ones(image.shape[:2])

    boost.make_triple(est, np.zeros((96, 128, 3)))
    assert seen == [(96, 128), (72, 96), (120, 160)]


def test_constant_estimator_triple():
    c = 0.12
    tri = boost.make_triple(lambda im, pos: np.full(im.shape[:2], c), np.zeros((96, 128, 3)))
    np.testing.assert_allclose(tri.full, c, rtol=1e-15)
    np.testing.assert_allclose(tri.reduced, 4 * c / 3, rtol=1e-14)
    np.testing.assert_allclose(tri.augmented, 4 * c / 5, rtol=1e-14)


def test_scale_equivariant_estimator_gives_identical_maps():
    # disparity proportional to image width, smooth in the positional input
    def est(image, positions):
        w = image.shape[1]
        return (w / 128.0) * (0.1 + 0.02 * positions[..., 0] + 0.01 * positions[..., 1])

    tri = boost.make_triple(est, np.zeros((96, 128, 3)))
    inner = (slice(2, -2), slice(2, -2))
    np.testing.assert_allclose(tri.reduced[inner], tri.full[inner], rtol=1e-12)
    np.testing.assert_allclose(tri.augmented[inner], tri.full[inner], rtol=1e-12)


def test_resize_examples(rng):
    img = rng.uniform(size=(6, 8, 3))
    np.testing.assert_array_equal(boost.resize(img, (6, 8)), img)
    np.testing.assert_allclose(boost.resize(np.full((5, 7), 2.5), (9, 3)), 2.5, rtol=1e-15)
    up = boost.resize(np.array([[0.0, 1.0]]), (1, 4))
    np.testing.assert_allclose(up, [[0.0, 0.25, 0.75, 1.0]])
