"""Numeric inner loops with a numba fast path and a pure-numpy fallback.

Every kernel here is counter-based and integer-exact, so the two paths
produce bit-identical output. Select the path with the environment
variable ``ROBOTRIAGE_KERNELS=numpy|numba`` (default: numba when
importable). ``benchmarks/bench_kernels.py`` times both paths and checks
agreement.

The counter-based PRNG (splitmix64 over a per-source stream id and a
message/element counter) is what keeps simulation runs reproducible:
no generator state is shared between nodes, so killing or adding one
node never perturbs another node's payload stream.
"""

from __future__ import annotations

import os

import numpy as np

_U64 = np.uint64
_MASK = 0xFFFFFFFFFFFFFFFF
_PHI = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD1342543DE82EF95
_INV_2_53 = 2.0 ** -53

KERNELS_ENV = "ROBOTRIAGE_KERNELS"


def _pick_backend() -> str:
    choice = os.environ.get(KERNELS_ENV, "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{KERNELS_ENV} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba":
        try:
            import numba  # noqa: F401
        except ImportError:
            return "numpy"
    return choice


_BACKEND = _pick_backend()


def active_backend() -> str:
    """Name of the kernel path selected at import time."""
    return _BACKEND


def splitmix64(x: int) -> int:
    """Scalar splitmix64 finalizer on plain Python ints (exact, no numpy)."""
    z = (x + _PHI) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def stream_id(seed: int, channel: int) -> int:
    """Derive an independent 64-bit stream id from (seed, channel)."""
    return splitmix64(splitmix64(seed & _MASK) ^ ((channel * _STREAM_SALT) & _MASK))


def u01_at(stream: int, index: int) -> float:
    """Deterministic uniform [0, 1) draw at a counter position."""
    h = splitmix64(stream ^ (((index + 1) * _PHI) & _MASK))
    return (h >> 11) * _INV_2_53


# ---------------------------------------------------------------------------
# numpy path


def _sm64_np(z: np.ndarray) -> np.ndarray:
    z = z + _U64(_PHI)
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def _hash_counters_np(stream: int, n: int) -> np.ndarray:
    idx = np.arange(1, n + 1, dtype=np.uint64)
    return _sm64_np(_U64(stream) ^ (idx * _U64(_PHI)))


def _lidar_ranges_np(stream: int, n: int, range_min: float, range_max: float) -> np.ndarray:
    h = _hash_counters_np(stream, n)
    u = (h >> _U64(11)).astype(np.float64) * _INV_2_53
    return range_min + u * (range_max - range_min)


def _image_pixels_np(stream: int, n: int) -> np.ndarray:
    h = _hash_counters_np(stream, n)
    return (h & _U64(0xFF)).astype(np.uint8)


def _scan_stats_np(ranges: np.ndarray, range_min: float, range_max: float) -> tuple[int, int]:
    invalid = int(np.count_nonzero(~np.isfinite(ranges) | (ranges < range_min) | (ranges > range_max)))
    if ranges.size == 0:
        return invalid, 0
    # Most-common count over exact bit patterns (treats each NaN payload alike).
    bits = ranges.view(np.uint64)
    _, counts = np.unique(bits, return_counts=True)
    return invalid, int(counts.max())


def _pixel_moments_np(pixels: np.ndarray) -> tuple[int, int]:
    p = pixels.astype(np.uint64)
    return int(p.sum()), int((p * p).sum())


def _trigram_counts_np(data: np.ndarray, dim: int) -> np.ndarray:
    counts = np.zeros(dim, dtype=np.int64)
    if data.size < 3:
        return counts
    b = data.astype(np.uint64)
    word = b[:-2] | (b[1:-1] << _U64(8)) | (b[2:] << _U64(16))
    idx = (_sm64_np(word) % _U64(dim)).astype(np.int64)
    return np.bincount(idx, minlength=dim).astype(np.int64)


# ---------------------------------------------------------------------------
# numba path

if _BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _sm64_nb(x: np.uint64) -> np.uint64:
        z = x + _U64(_PHI)
        z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
        z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
        return z ^ (z >> _U64(31))

    @njit(cache=True)
    def _lidar_ranges_nb(stream: int, n: int, range_min: float, range_max: float) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        s = _U64(stream)
        span = range_max - range_min
        for i in range(n):
            h = _sm64_nb(s ^ (_U64(i + 1) * _U64(_PHI)))
            u = np.float64(h >> _U64(11)) * _INV_2_53
            out[i] = range_min + u * span
        return out

    @njit(cache=True)
    def _image_pixels_nb(stream: int, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint8)
        s = _U64(stream)
        for i in range(n):
            h = _sm64_nb(s ^ (_U64(i + 1) * _U64(_PHI)))
            out[i] = np.uint8(h & _U64(0xFF))
        return out

    @njit(cache=True)
    def _scan_stats_nb(ranges: np.ndarray, range_min: float, range_max: float) -> tuple[int, int]:
        invalid = 0
        for i in range(ranges.shape[0]):
            v = ranges[i]
            if not np.isfinite(v) or v < range_min or v > range_max:
                invalid += 1
        if ranges.shape[0] == 0:
            return invalid, 0
        bits = np.sort(ranges.view(np.uint64))
        best = 1
        run = 1
        for i in range(1, bits.shape[0]):
            if bits[i] == bits[i - 1]:
                run += 1
                if run > best:
                    best = run
            else:
                run = 1
        return invalid, best

    @njit(cache=True)
    def _pixel_moments_nb(pixels: np.ndarray) -> tuple[int, int]:
        s = _U64(0)
        ss = _U64(0)
        for i in range(pixels.shape[0]):
            v = _U64(pixels[i])
            s += v
            ss += v * v
        return int(s), int(ss)

    @njit(cache=True)
    def _trigram_counts_nb(data: np.ndarray, dim: int) -> np.ndarray:
        counts = np.zeros(dim, dtype=np.int64)
        for i in range(data.shape[0] - 2):
            word = _U64(data[i]) | (_U64(data[i + 1]) << _U64(8)) | (_U64(data[i + 2]) << _U64(16))
            counts[_sm64_nb(word) % _U64(dim)] += 1
        return counts

    _lidar_ranges_impl = _lidar_ranges_nb
    _image_pixels_impl = _image_pixels_nb
    _scan_stats_impl = _scan_stats_nb
    _pixel_moments_impl = _pixel_moments_nb
    _trigram_counts_impl = _trigram_counts_nb
else:
    _lidar_ranges_impl = _lidar_ranges_np
    _image_pixels_impl = _image_pixels_np
    _scan_stats_impl = _scan_stats_np
    _pixel_moments_impl = _pixel_moments_np
    _trigram_counts_impl = _trigram_counts_np


def lidar_ranges(stream: int, n: int, range_min: float, range_max: float) -> np.ndarray:
    """Deterministic ranges for one frame, uniform in [range_min, range_max]."""
    return _lidar_ranges_impl(_U64(stream), n, float(range_min), float(range_max))


def image_pixels(stream: int, n: int) -> np.ndarray:
    """Deterministic uint8 pixel buffer for one frame."""
    return _image_pixels_impl(_U64(stream), n)


def pixel_moments(pixels: np.ndarray) -> tuple[int, int]:
    """Exact (sum, sum of squares) of a uint8 buffer."""
    return _pixel_moments_impl(np.ascontiguousarray(pixels, dtype=np.uint8))


def scan_stats(ranges: np.ndarray, range_min: float, range_max: float) -> tuple[int, int]:
    """(invalid_count, most_common_count) over a float64 ranges array."""
    return _scan_stats_impl(np.ascontiguousarray(ranges, dtype=np.float64), range_min, range_max)


def trigram_counts(data: bytes | np.ndarray, dim: int) -> np.ndarray:
    """Feature-hashed character-trigram counts of a byte string."""
    arr = np.frombuffer(data, dtype=np.uint8) if isinstance(data, (bytes, bytearray)) else data
    return _trigram_counts_impl(np.ascontiguousarray(arr, dtype=np.uint8), dim)


def pixel_variance(pixels: np.ndarray) -> float:
    """Exact population variance of a uint8 pixel buffer (byte units)."""
    n = int(pixels.size)
    if n == 0:
        return 0.0
    s, ss = pixel_moments(pixels.reshape(-1))
    return (n * ss - s * s) / (n * n)


NUMPY_IMPLS = {
    "lidar_ranges": lambda stream, n, lo, hi: _lidar_ranges_np(_U64(stream), n, lo, hi),
    "image_pixels": lambda stream, n: _image_pixels_np(_U64(stream), n),
    "scan_stats": _scan_stats_np,
    "pixel_moments": _pixel_moments_np,
    "trigram_counts": _trigram_counts_np,
}
