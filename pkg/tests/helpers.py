"""Shared hypothesis strategies and random-instance builders."""

import numpy as np
from hypothesis import strategies as st

from vck.core import make_space


def random_space(rng, n, integer=True):
    if integer:
        return make_space(rng.integers(1, 6, n))
    return make_space(rng.uniform(0.1, 1.0, n))


def random_mask(rng, n, m, p=None):
    p = rng.uniform(0.05, 0.6) if p is None else p
    return rng.random((n, m)) < p


@st.composite
def mask_instances(draw, max_side=6, integer=True):
    n = draw(st.integers(1, max_side))
    m = draw(st.integers(1, max_side))
    cells = draw(st.lists(st.booleans(), min_size=n * m, max_size=n * m))
    wx = draw(st.lists(st.integers(1, 5), min_size=n, max_size=n))
    wy = draw(st.lists(st.integers(1, 5), min_size=m, max_size=m))
    return np.array(cells).reshape(n, m), make_space(wx), make_space(wy)


@st.composite
def kernel_instances(draw, max_side=5, count=1):
    n = draw(st.integers(1, max_side))
    m = draw(st.integers(1, max_side))
    vals = st.integers(-4, 4).map(lambda v: v / 4)
    fs = [np.array(draw(st.lists(vals, min_size=n * m, max_size=n * m))).reshape(n, m)
          for _ in range(count)]
    wx = draw(st.lists(st.integers(1, 4), min_size=n, max_size=n))
    wy = draw(st.lists(st.integers(1, 4), min_size=m, max_size=m))
    return fs, make_space(wx), make_space(wy)
