"""Shared randomized fixtures for the search tests and the acceptance suite."""

import numpy as np

from pwto.costfield import sample_field
from pwto.lattice import Lattice, LatticeVertex


def random_lattice_case(seed: int):
    """A random lattice of at most 6x6x4 over a random field, plus endpoints >= 2 cells apart.

    Component standard deviations are 0.3 to 1 cell, so the field varies
    noticeably from cell to cell (which gives multi-entry fronts) without the
    deep flat tails that make exhaustive enumeration explode.
    """
    rng = np.random.default_rng(seed)
    nx, ny = (int(v) for v in rng.integers(3, 7, size=2))
    m = int(rng.integers(2, 8))
    cell = 1.0 / max(nx, ny)
    cf = sample_field(m, (0.1 * cell**2, cell**2), int(rng.integers(1 << 30)))
    lat = Lattice(cf, nx, ny, 4)
    while True:
        a = LatticeVertex(int(rng.integers(nx)), int(rng.integers(ny)), int(rng.integers(4)))
        b = LatticeVertex(int(rng.integers(nx)), int(rng.integers(ny)), int(rng.integers(4)))
        if abs(a.ix - b.ix) + abs(a.iy - b.iy) >= 2:
            return lat, a, b
