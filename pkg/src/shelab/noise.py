"""Reproducible discrete space-time white noise.

Cell ``(m, j)`` of a lattice covers ``[m dt, (m+1) dt) x [y_j - dx/2, y_j + dx/2)``
and carries an independent ``N(0, dt dx)`` increment.  Increments come from a
Philox4x64 counter-based generator: the key is ``(seed, stream)`` and the
counter is the linear cell index, so any block of cells can be regenerated on
its own and always gets the same bits.  Uniforms are mapped to normals by the
inverse CDF, one uniform per cell, which keeps the cell-to-value map exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, ResourceError

__all__ = ["GridSpec", "NoiseGrid", "generate", "generate_cells", "shift", "MEMORY_BUDGET"]

# bytes; a full lattice above this size must be generated in blocks
MEMORY_BUDGET = 2 * 1024**3

_MASK64 = (1 << 64) - 1
_WORDS = 4  # Philox4x64 produces four 64-bit words per counter value


@dataclass(frozen=True)
class GridSpec:
    """Rectangular space-time lattice ``t_m = m dt``, ``x_j = x_min + j dx``."""

    dt: float
    dx: float
    n_t: int
    n_x: int
    x_min: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and self.dx > 0):
            raise DomainError(f"grid steps must be positive (dt={self.dt}, dx={self.dx})")
        if self.n_t < 1 or self.n_x < 1:
            raise DomainError(f"grid needs n_t, n_x >= 1 (got {self.n_t}, {self.n_x})")

    @classmethod
    def covering(cls, dt, dx, t_max, x_lo, x_hi):
        """Smallest grid with spacing (dt, dx) covering ``[0, t_max] x [x_lo, x_hi]``."""
        n_t = int(round(t_max / dt))
        if not np.isclose(n_t * dt, t_max, rtol=1e-9, atol=1e-12):
            raise DomainError(f"t_max={t_max} is not a multiple of dt={dt}")
        n_x = int(np.ceil((x_hi - x_lo) / dx)) + 1
        return cls(dt=dt, dx=dx, n_t=n_t, n_x=n_x, x_min=x_lo)

    @property
    def length(self):
        return self.n_x * self.dx

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_x)

    @property
    def t(self):
        return self.dt * np.arange(self.n_t + 1)

    @property
    def t_max(self):
        return self.n_t * self.dt

    @property
    def n_cells(self):
        return self.n_t * self.n_x

    def time_index(self, t):
        """Lattice index of time ``t``; raises DomainError when ``t`` is not on the lattice."""
        m = int(round(t / self.dt))
        if not np.isclose(m * self.dt, t, rtol=1e-9, atol=1e-12) or m < 0:
            raise DomainError(f"time {t} is not aligned to the lattice (dt={self.dt})")
        return m

    def to_config(self):
        return {"dt": self.dt, "dx": self.dx, "n_t": self.n_t, "n_x": self.n_x,
                "x_min": self.x_min}


def _key(seed, stream):
    return np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)


def _raw_words(seed, stream, start, count):
    """``count`` consecutive 64-bit words beginning at linear word index ``start``."""
    bg = np.random.Philox(key=_key(seed, stream))
    block, offset = divmod(start, _WORDS)
    state = bg.state
    # the generator increments its counter before producing a block, and
    # counter value 0 is never used
    state["state"]["counter"] = np.array([block, 0, 0, 0], dtype=np.uint64)
    state["buffer_pos"] = _WORDS
    bg.state = state
    return bg.random_raw(offset + count)[offset:]


def _to_normal(words):
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def generate_cells(grid: GridSpec, seed, m_range, j_range, stream=0):
    """Increments of the sub-lattice ``m_range x j_range`` as an array.

    Identical to slicing the full lattice, but only the requested cells are
    generated.
    """
    m0, m1 = m_range
    j0, j1 = j_range
    if not (0 <= m0 <= m1 <= grid.n_t and 0 <= j0 <= j1 <= grid.n_x):
        raise DomainError(f"block {m_range} x {j_range} outside the lattice")
    out = np.empty((m1 - m0, j1 - j0))
    if j0 == 0 and j1 == grid.n_x:
        words = _raw_words(seed, stream, m0 * grid.n_x, (m1 - m0) * grid.n_x)
        out[:] = _to_normal(words).reshape(m1 - m0, grid.n_x)
    else:
        for row, m in enumerate(range(m0, m1)):
            out[row] = _to_normal(_raw_words(seed, stream, m * grid.n_x + j0, j1 - j0))
    out *= np.sqrt(grid.dt * grid.dx)
    return out


@dataclass(frozen=True)
class NoiseGrid:
    """Lattice of white-noise increments ``increments[m, j]`` with variance ``dt dx``."""

    grid: GridSpec
    seed: int
    stream: int = 0
    increments: np.ndarray = field(repr=False, compare=False, default=None)
    offset: int = 0

    @property
    def variance(self):
        return self.grid.dt * self.grid.dx


def generate(grid: GridSpec, seed, stream=0, memory_budget=None) -> NoiseGrid:
    """Materialise the full noise lattice for ``(grid, seed, stream)``."""
    budget = MEMORY_BUDGET if memory_budget is None else memory_budget
    nbytes = grid.n_cells * 8
    if nbytes > budget:
        raise ResourceError(
            f"noise lattice needs {nbytes / 2**20:.1f} MiB, budget is {budget / 2**20:.1f} MiB"
        )
    inc = generate_cells(grid, seed, (0, grid.n_t), (0, grid.n_x), stream=stream)
    inc.flags.writeable = False
    return NoiseGrid(grid=grid, seed=int(seed), stream=int(stream), increments=inc)


def shift(noise: NoiseGrid, j_offset: int) -> NoiseGrid:
    """Translate the noise by ``j_offset`` cells with periodic wraparound.

    The shifted lattice satisfies ``new[m, j] = old[m, (j + j_offset) mod n_x]``,
    i.e. it is the noise seen from a frame moved ``j_offset * dx`` to the right.
    """
    if not -noise.grid.n_x < j_offset < noise.grid.n_x:
        raise DomainError(f"shift {j_offset} out of range for n_x={noise.grid.n_x}")
    inc = np.roll(noise.increments, -j_offset, axis=1)
    inc.flags.writeable = False
    return NoiseGrid(grid=noise.grid, seed=noise.seed, stream=noise.stream,
                     increments=inc, offset=noise.offset + j_offset)
