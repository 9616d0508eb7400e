"""Block compression of grayscale images with a random overcomplete basis."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

from .core import ls_refit_arrays, make_rng
from .exceptions import InputError, ParameterError, ShapeError
from .solvers.amp import amp_arrays
from .solvers.omp import omp_arrays
from .validation import check_interval, rate_to_count

BLOCK = 64
METHODS = ("omp", "amp_ls", "identity")


@dataclass(frozen=True)
class ImageBuffer:
    """Grayscale image with values in ``[0, 255]``.

    ``permutation`` and ``norm_params`` are filled in by :func:`compress_image`
    on the reconstruction it returns.
    """

    pixels: np.ndarray
    permutation: np.ndarray | None = field(default=None, repr=False)
    norm_params: tuple[float, float] | None = None

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float, copy=True)
        if px.ndim != 2:
            raise ShapeError(f"pixels must be a 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min(initial=0) < 0 or px.max(initial=0) > 255:
            raise InputError("pixel values must lie in [0, 255]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if self.permutation is not None:
            p = np.asarray(self.permutation, dtype=np.int64)
            if p.shape != (px.size,) or not np.array_equal(np.sort(p), np.arange(px.size)):
                raise ParameterError("permutation must be a bijection on the pixel indices")
            p.setflags(write=False)
            object.__setattr__(self, "permutation", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


class CompressionResult(NamedTuple):
    image: ImageBuffer
    psnr: float
    elapsed: float
    block_epsilon: np.ndarray


def read_pgm(source) -> ImageBuffer:
    """Read a binary 8-bit PGM (``P5``) from a path or bytes.

    Raises
    ------
    InputError
        For any other format, including colour (``P6``) images.
    """
    data = source if isinstance(source, (bytes, bytearray)) else open(source, "rb").read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError("truncated PGM header")
        tokens.append(data[start:pos])
    magic = tokens[0]
    if magic in (b"P6", b"P3"):
        raise InputError("colour images are not supported; convert to 8-bit grayscale")
    if magic != b"P5":
        raise InputError(f"expected a binary PGM (P5), got {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise InputError("malformed PGM header") from exc
    if maxval != 255:
        raise InputError(f"only 8-bit PGM is supported, got maxval={maxval}")
    body = data[pos + 1: pos + 1 + w * h]
    if len(body) != w * h:
        raise InputError("PGM pixel data is truncated")
    return ImageBuffer(np.frombuffer(body, dtype=np.uint8).reshape(h, w))


def write_pgm(img: ImageBuffer, path):
    px = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode())
        fh.write(px.tobytes())


def bundled_image() -> ImageBuffer:
    """The bundled 256x256 test image (camera, public domain)."""
    return read_pgm(resources.files("ocbsparse").joinpath("data/camera256.pgm").read_bytes())


def psnr(original: ImageBuffer, reconstructed: ImageBuffer) -> float:
    """``10 log10(255^2 / MSE)``; identical images give ``inf``."""
    a, b = original.pixels, reconstructed.pixels
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _basis(method, alpha, seed):
    if method == "identity":
        return np.eye(BLOCK)
    N = int(round(BLOCK / alpha))
    if abs(N * alpha - BLOCK) > 1e-9 * BLOCK:
        raise ParameterError(f"alpha={alpha} does not give an integer basis size for M={BLOCK}")
    return make_rng(seed, 1).standard_normal((BLOCK, N)) / math.sqrt(BLOCK)


def _solve_blocks(A, Y, method, r, alpha, lam, threads):
    if method == "identity":
        return Y.copy()
    if method == "omp":
        k = rate_to_count(r, BLOCK)
        cols = range(Y.shape[1])
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                xs = list(ex.map(lambda j: omp_arrays(A, Y[:, j], k), cols))
        else:
            xs = [omp_arrays(A, Y[:, j], k) for j in cols]
        return np.column_stack(xs)
    if lam is None:
        from .replica.l1 import l1_from_rate
        lam = l1_from_rate(alpha, r, 1.0).lam
    X = amp_arrays(A, Y, lam)[0]
    out = np.zeros_like(X)
    for j in range(X.shape[1]):
        idx = np.flatnonzero(X[:, j])
        out[idx, j] = ls_refit_arrays(A, Y[:, j], idx)
    return out


def compress_image(img: ImageBuffer, method="omp", r=0.5, alpha=0.5, seed=0, *, lam=None,
                   threads=1, perm_seed=None) -> CompressionResult:
    """Compress ``img`` block by block and reconstruct it.

    Pixels are normalized to mean 0 and variance 1, permuted with a seeded
    random permutation, and cut into consecutive 64-pixel blocks. Every block is
    represented in one shared ``64 x 64/alpha`` Gaussian basis, either by OMP at
    rate ``r`` or by AMP followed by an LS refit on the AMP support. The
    ``identity`` method keeps every coefficient in the identity basis.

    Parameters
    ----------
    img : ImageBuffer
    method : {"omp", "amp_ls", "identity"}
    r, alpha : float
    seed : int
        Seeds the basis, and the permutation unless ``perm_seed`` is given.
    lam : float, optional
        AMP regularization; by default the value whose predicted rate is ``r``.
    perm_seed : int, optional
        Separate seed for the pixel permutation.
    threads : int
        Worker threads for the per-block OMP solves. Output does not depend on it.

    Returns
    -------
    CompressionResult
        ``(image, psnr, elapsed, block_epsilon)``; ``image`` is clamped to
        ``[0, 255]`` and rounded.
    """
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    check_interval(r, "r", 0.0, 1.0)
    check_interval(alpha, "alpha", 0.0, 1.0)
    n = img.pixels.size
    if n % BLOCK:
        raise ShapeError(f"pixel count {n} is not divisible by the block size {BLOCK}")
    t0 = time.perf_counter()
    flat = img.pixels.ravel()
    mean, std = float(flat.mean()), float(flat.std())
    if std == 0.0:
        std = 1.0
    perm = make_rng(seed if perm_seed is None else perm_seed, 0).permutation(n)
    Y = ((flat[perm] - mean) / std).reshape(n // BLOCK, BLOCK).T
    A = _basis(method, alpha, seed)
    X = _solve_blocks(A, Y, method, r, alpha, lam, threads)
    Yh = A @ X
    block_eps = np.sum((Y - Yh) ** 2, axis=0) / (2 * BLOCK)
    z = np.empty(n)
    z[perm] = Yh.T.ravel()
    px = np.clip(np.rint(z * std + mean), 0, 255).reshape(img.pixels.shape)
    out = ImageBuffer(px, permutation=perm, norm_params=(mean, std))
    elapsed = time.perf_counter() - t0
    return CompressionResult(out, psnr(img, out), elapsed, block_eps)
