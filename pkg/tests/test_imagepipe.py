import numpy as np
import pytest

from ocbsparse import InputError, ShapeError
from ocbsparse.imagepipe import ImageBuffer, bundled_image, compress_image, psnr, read_pgm, write_pgm


def _img(v, shape=(16, 16)):
    return ImageBuffer(np.full(shape, v, dtype=float))


def test_psnr_reference_values():
    assert psnr(_img(10), _img(10)) == float("inf")
    assert psnr(_img(0), _img(255)) == pytest.approx(0.0, abs=1e-12)
    assert psnr(_img(100), _img(101)) == pytest.approx(48.1308, abs=1e-4)
    assert psnr(_img(100), _img(110)) == pytest.approx(28.1308, abs=1e-4)


def test_psnr_shape_mismatch():
    with pytest.raises(ShapeError):
        psnr(_img(0), _img(0, (8, 32)))


def test_buffer_validation():
    with pytest.raises(InputError):
        ImageBuffer(np.full((4, 4), 300.0))
    with pytest.raises(ShapeError):
        ImageBuffer(np.zeros(16))


def test_pgm_round_trip(tmp_path):
    px = np.random.default_rng(0).integers(0, 256, (8, 12))
    write_pgm(ImageBuffer(px), tmp_path / "a.pgm")
    back = read_pgm(tmp_path / "a.pgm")
    assert back.pixels.shape == (8, 12) and np.array_equal(back.pixels, px)


def test_pgm_rejects_colour_and_16bit():
    with pytest.raises(InputError, match="colour"):
        read_pgm(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(InputError):
        read_pgm(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(InputError):
        read_pgm(b"P5\n4 4\n255\n" + bytes(3))


def test_bundled_image():
    img = bundled_image()
    assert (img.height, img.width) == (256, 256)


def test_identity_round_trip_bit_exact():
    img = bundled_image()
    res = compress_image(img, "identity")
    assert np.array_equal(res.image.pixels, img.pixels) and res.psnr == float("inf")


def test_block_count_must_divide():
    with pytest.raises(ShapeError):
        compress_image(_img(5, (10, 10)), "identity")


@pytest.fixture(scope="module")
def crop():
    return ImageBuffer(bundled_image().pixels[64:128, 64:192])


def test_permutation_seed_changes_little():
    img = bundled_image()
    a = compress_image(img, "omp", 0.5, seed=0, perm_seed=1).psnr
    b = compress_image(img, "omp", 0.5, seed=0, perm_seed=2).psnr
    assert abs(a - b) <= 0.5


def test_psnr_monotone_in_rate(crop):
    p = [compress_image(crop, "omp", r).psnr for r in (0.25, 0.5, 0.75)]
    assert p[0] < p[1] < p[2]


def test_reconstruction_is_valid_image(crop):
    res = compress_image(crop, "amp_ls", 0.5)
    px = res.image.pixels
    assert px.min() >= 0 and px.max() <= 255 and np.array_equal(px, np.rint(px))
    assert res.block_epsilon.shape == (crop.pixels.size // 64,)
    assert np.array_equal(np.sort(res.image.permutation), np.arange(crop.pixels.size))


def test_threads_do_not_change_output(crop):
    a = compress_image(crop, "omp", 0.5, threads=1).image.pixels
    b = compress_image(crop, "omp", 0.5, threads=4).image.pixels
    assert np.array_equal(a, b)
