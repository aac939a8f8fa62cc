import numpy as np
import pytest

from corrfeat.haar import (BANDS, HaarFilter, count_filters, enumerate_filters, eval_haar,
                           integral_image, integral_images, rectangle_sum, sample_haar_filter)


def naive_response(img, f: HaarFilter):
    """Band sums by direct slicing, with the documented weights."""
    bx, by = BANDS[f.type]
    bw, bh = f.width // bx, f.height // by
    band = [[img[f.y + j * bh:f.y + (j + 1) * bh, f.x + i * bw:f.x + (i + 1) * bw].sum()
             for i in range(bx)] for j in range(by)]
    if f.type == 0:
        return band[0][0] - band[0][1]
    if f.type == 1:
        return band[0][0] - band[1][0]
    if f.type == 2:
        return band[0][0] - 2 * band[0][1] + band[0][2]
    if f.type == 3:
        return band[0][0] - 2 * band[1][0] + band[2][0]
    return band[0][0] + band[1][1] - band[0][1] - band[1][0]


class TestIntegralImage:
    def test_all_ones(self):
        assert rectangle_sum(integral_image(np.ones((3, 3))), 0, 0, 3, 3) == 9.0

    def test_single_pixel(self):
        ii = integral_image(np.array([[4.25]]))
        assert rectangle_sum(ii, 0, 0, 1, 1) == 4.25

    def test_random_rectangles_exact(self, rng):
        img = rng.integers(0, 256, size=(8, 8)).astype(float)
        ii = integral_image(img)
        for _ in range(20):
            x, y = rng.integers(0, 8, 2)
            w, h = rng.integers(1, 9 - x), rng.integers(1, 9 - y)
            naive = sum(img[r, c] for r in range(y, y + h) for c in range(x, x + w))
            assert rectangle_sum(ii, x, y, w, h) == naive

    def test_batch_layout(self, rng):
        X = rng.random((2, 2 * 3 * 4))
        ii = integral_images(X, (3, 4, 2))
        assert ii.shape == (2, 2, 4, 5)
        assert ii[1, 1, -1, -1] == pytest.approx(X[1, 12:].sum())


class TestFilters:
    def test_count_28(self):
        assert count_filters((28, 28, 1)) == len(enumerate_filters((28, 28, 1))) == 299880

    def test_count_scales_with_channels(self):
        assert count_filters((32, 32, 3)) == 3 * count_filters((32, 32, 1))

    def test_all_admissible_and_unique(self):
        g = (7, 6, 2)
        table = enumerate_filters(g)
        assert len({tuple(r) for r in table}) == len(table)
        assert all(HaarFilter(*map(int, r)).admissible(g) for r in table)

    def test_brute_force_count(self):
        g = (5, 6, 1)
        n = 0
        for t in range(5):
            for x in range(6):
                for y in range(5):
                    for w in range(1, 7):
                        for h in range(1, 6):
                            n += HaarFilter(t, x, y, w, h).admissible(g)
        assert n == count_filters(g)

    def test_matches_naive(self, rng):
        img = rng.random((9, 10))
        ii = integral_image(img)
        for f in (sample_haar_filter(rng, (9, 10, 1)) for _ in range(200)):
            assert eval_haar(ii, f) == pytest.approx(naive_response(img, f), abs=1e-12)

    def test_constant_image_gives_zero(self, rng):
        ii = integral_image(np.full((12, 12), 0.7))
        rows = enumerate_filters((12, 12, 1))
        assert np.max(np.abs(eval_haar(ii, rows))) < 1e-12

    def test_linear(self, rng):
        img = rng.integers(0, 256, size=(10, 10)).astype(float)
        rows = enumerate_filters((10, 10, 1))
        a = eval_haar(integral_image(img), rows)
        b = eval_haar(integral_image(4.0 * img), rows)
        assert np.array_equal(b, 4.0 * a)

    def test_boundary_translation_scan(self):
        img = np.zeros((12, 16))
        img[:, 8:] = 1.0  # vertical boundary at x = 8
        ii = integral_image(img)
        resp = {x: abs(eval_haar(ii, HaarFilter(0, x, 2, 6, 4))) for x in range(16 - 6 + 1)}
        best = max(resp.values())
        assert best == 12.0
        assert [x for x, r in resp.items() if r == best] == [5]

    def test_sampler_is_admissible_and_spread(self, rng):
        g = (28, 28, 1)
        draws = [sample_haar_filter(rng, g) for _ in range(500)]
        assert all(f.admissible(g) for f in draws)
        assert {f.type for f in draws} == set(range(5))

    def test_geometry_too_small(self, rng):
        with pytest.raises(ValueError):
            sample_haar_filter(rng, (1, 1, 1))

    def test_channel_selects_plane(self, rng):
        X = np.zeros((1, 2 * 2 * 2))
        X[0, 4] = 1.0  # channel 1, top-left
        ii = integral_images(X, (2, 2, 2))
        assert eval_haar(ii[0], HaarFilter(0, 0, 0, 2, 1, 0)) == 0.0
        assert eval_haar(ii[0], HaarFilter(0, 0, 0, 2, 1, 1)) == 1.0

    def test_describe(self):
        assert HaarFilter(4, 1, 2, 4, 6, 0).describe() == "four@(1,2) 4x6 ch0"
