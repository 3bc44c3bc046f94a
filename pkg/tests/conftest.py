from __future__ import annotations

import numpy as np
import pytest

from robotriage.bus import Image, LaserScan, MessageBus


def make_scan(fill=None, n=360, range_min=0.12, range_max=3.5, seed=11):
    """A LaserScan payload: random in-range values, or a constant fill."""
    if fill is not None:
        ranges = np.full(n, fill, dtype=np.float64)
    else:
        rng = np.random.default_rng(seed)
        ranges = rng.uniform(range_min, range_max, n)
    return LaserScan(ranges=ranges, range_min=range_min, range_max=range_max)


def make_image(fill=None, width=32, height=24, channels=3, seed=11):
    n = width * height * channels
    if fill is not None:
        pixels = np.full(n, fill, dtype=np.uint8)
    else:
        rng = np.random.default_rng(seed)
        pixels = rng.integers(0, 256, n, dtype=np.uint8)
    return Image(width=width, height=height, channels=channels, pixels=pixels)


@pytest.fixture
def bus():
    return MessageBus()


@pytest.fixture
def logical_clock():
    counter = iter(range(1, 1 << 30))
    return lambda: float(next(counter))
