import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from savanna.errors import InvalidArgumentError
from savanna.raster import (
    RasterImage,
    connected_components,
    downsample,
    sobel_blue,
    threshold,
    value_channel,
)

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=float)


def naive_sobel(blue):
    """Double-loop convolution with clamp-to-edge indexing."""
    h, w = blue.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            gx = gy = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    gx += SOBEL_X[dy + 1, dx + 1] * blue[yy, xx]
                    gy += SOBEL_Y[dy + 1, dx + 1] * blue[yy, xx]
            out[y, x] = np.hypot(gx, gy)
    return out


def flood_fill_regions(mask, connectivity):
    """BFS flood fill; returns a set of frozensets of (x, y)."""
    if connectivity == 4:
        neigh = [(0, 1), (0, -1), (1, 0), (-1, 0)]
    else:
        neigh = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    regions = set()
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            stack = [(y, x)]
            seen[y, x] = True
            pixels = []
            while stack:
                cy, cx = stack.pop()
                pixels.append((cx, cy))
                for dy, dx in neigh:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            regions.add(frozenset(pixels))
    return regions


class TestValueChannel:
    def test_single_pixel_is_channel_max(self, image_factory):
        img = image_factory([[[10, 200, 30]]])
        assert value_channel(img)[0, 0] == 200

    def test_black_pixel(self, image_factory):
        img = image_factory([[[0, 0, 0]]])
        assert value_channel(img)[0, 0] == 0

    def test_gradient_image_matches_pixel_loop(self, image_factory, rng):
        pixels = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
        img = image_factory(pixels)
        got = value_channel(img)
        for y in range(9):
            for x in range(7):
                assert got[y, x] == max(int(pixels[y, x, c]) for c in range(3))

    def test_pure_function(self, image_factory, rng):
        pixels = rng.integers(0, 256, size=(6, 6, 3), dtype=np.uint8)
        img = image_factory(pixels)
        np.testing.assert_array_equal(value_channel(img), value_channel(img))


class TestSobelBlue:
    def test_constant_blue_is_zero(self, image_factory):
        pixels = np.full((6, 6, 3), 99, dtype=np.uint8)
        assert np.all(sobel_blue(image_factory(pixels)) == 0)

    def test_vertical_step_magnitude(self, image_factory):
        pixels = np.zeros((6, 8, 3), dtype=np.uint8)
        pixels[:, 4:, 2] = 255
        mag = sobel_blue(image_factory(pixels))
        np.testing.assert_allclose(mag[:, 3], 4 * 255)
        np.testing.assert_allclose(mag[:, 4], 4 * 255)
        assert np.all(mag[:, :3] == 0)
        assert np.all(mag[:, 5:] == 0)

    def test_random_image_matches_naive_convolution(self, image_factory, rng):
        pixels = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        img = image_factory(pixels)
        np.testing.assert_allclose(sobel_blue(img), naive_sobel(pixels[:, :, 2].astype(float)))


class TestThreshold:
    def test_below_all_set(self):
        assert threshold(np.zeros((3, 3)), 1.0, "below").all()

    def test_above_all_clear(self):
        assert not threshold(np.zeros((3, 3)), 1.0, "above").any()

    def test_strict_inequality(self):
        values = np.array([[0.0, 100.0, 200.0]])
        np.testing.assert_array_equal(threshold(values, 100.0, "below"), [[True, False, False]])

    def test_bad_direction(self):
        with pytest.raises(InvalidArgumentError):
            threshold(np.zeros((2, 2)), 1.0, "sideways")


class TestConnectedComponents:
    def test_two_disjoint_blocks(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[1:3, 1:3] = True
        mask[5:7, 5:7] = True
        regions = connected_components(mask, 8)
        assert [r.area for r in regions] == [4, 4]
        assert regions[0].centroid == (1.5, 1.5)
        assert regions[1].centroid == (5.5, 5.5)

    def test_diagonal_touch_depends_on_connectivity(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 1] = mask[2, 2] = True
        assert len(connected_components(mask, 8)) == 1
        assert len(connected_components(mask, 4)) == 2

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_random_masks_match_flood_fill(self, connectivity, rng):
        for _ in range(5):
            mask = rng.random((32, 32)) < 0.35
            got = {frozenset(map(tuple, r.pixels.tolist())) for r in connected_components(mask, connectivity)}
            assert got == flood_fill_regions(mask, connectivity)

    def test_output_order_is_scanline_of_first_pixel(self, rng):
        mask = rng.random((16, 16)) < 0.3
        regions = connected_components(mask, 8)
        firsts = [tuple(r.pixels[0][::-1]) for r in regions]  # (y, x)
        assert firsts == sorted(firsts)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_partition_properties(self, seed):
        mask = np.random.default_rng(seed).random((12, 12)) < 0.4
        regions = connected_components(mask, 8)
        seen = set()
        for r in regions:
            assert r.area == len(r.pixels) >= 1
            px = r.pixels
            assert r.centroid == (pytest.approx(px[:, 0].mean()), pytest.approx(px[:, 1].mean()))
            x0, y0, x1, y1 = r.bbox
            assert x0 <= r.centroid[0] <= x1 and y0 <= r.centroid[1] <= y1
            pts = set(map(tuple, px.tolist()))
            assert not (pts & seen), "regions overlap"
            seen |= pts
        assert seen == set(map(tuple, np.argwhere(mask)[:, ::-1].tolist()))


class TestDownsample:
    def test_factor_one_is_identity(self, image_factory, rng):
        img = image_factory(rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8))
        out = downsample(img, 1)
        np.testing.assert_array_equal(out.pixels, img.pixels)
        assert out.gsd_cm == img.gsd_cm

    def test_2x2_block_mean(self, image_factory):
        pixels = np.array([[[10] * 3, [20] * 3], [[30] * 3, [40] * 3]], dtype=np.uint8)
        out = downsample(image_factory(pixels, gsd_cm=4.0), 2)
        assert out.pixels.shape == (1, 1, 3)
        assert out.pixels[0, 0, 0] == 25
        assert out.gsd_cm == 8.0

    def test_partial_blocks_match_loop_oracle(self, image_factory, rng):
        pixels = rng.integers(0, 256, size=(5, 5, 3), dtype=np.uint8)
        out = downsample(image_factory(pixels), 2)
        assert out.pixels.shape == (3, 3, 3)
        for by in range(3):
            for bx in range(3):
                for c in range(3):
                    block = pixels[by * 2 : by * 2 + 2, bx * 2 : bx * 2 + 2, c].astype(float)
                    expected = int(np.floor(block.mean() + 0.5))
                    assert out.pixels[by, bx, c] == expected

    def test_zero_factor_rejected(self, image_factory):
        img = image_factory(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(InvalidArgumentError):
            downsample(img, 0)

    def test_global_mean_preserved_for_divisible_dims(self, image_factory, rng):
        pixels = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        img = image_factory(pixels)
        out = downsample(img, 2)
        assert abs(out.pixels.mean() - pixels.mean()) <= 0.5


class TestRasterImage:
    def test_rejects_two_channels(self):
        with pytest.raises(InvalidArgumentError):
            RasterImage("x", np.zeros((4, 4, 2), dtype=np.uint8), 4.0)

    def test_rejects_nonpositive_gsd(self):
        with pytest.raises(InvalidArgumentError):
            RasterImage("x", np.zeros((4, 4, 3), dtype=np.uint8), 0.0)

    def test_rejects_out_of_range_values(self):
        with pytest.raises(InvalidArgumentError):
            RasterImage("x", np.full((2, 2, 3), 300, dtype=np.int32), 4.0)
