"""Reproducible Brownian increments on uniform grids.

Increments are drawn from counter-based Philox streams: path ``p`` of a run
owns a fixed, disjoint range of Philox counter blocks keyed by the seed, and
each 64-bit word is mapped to a standard normal through the inverse CDF.
Generation therefore depends only on (seed, path_index, grid spec) -- no
global state, no sequential generator -- so any number of workers can
generate disjoint path ranges concurrently and bit-reproducibly, and a batch
of paths is bit-identical to the same paths generated one at a time.

Coarsening sums fine increments in adjacent pairs (a balanced tree), so
``coarsen(coarsen(g, 2), 2)`` equals ``coarsen(g, 4)`` bit-exactly and the
terminal Brownian value telescopes exactly through any chain of power-of-two
coarsenings: the coupled multi-resolution comparisons in the analysis layer
rely on this.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

__all__ = [
    "GridSpec",
    "BrownianGrid",
    "generate",
    "generate_increments",
    "coarsen",
    "coarsen_increments",
    "polygonal_value",
    "dump_grid",
    "load_grid",
]

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter tick
_SEED_MAX = 2**64
_HEADER = struct.Struct("<qdQQ")  # n_steps, horizon, seed, path_index


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with n_steps steps on [0, horizon]."""

    n_steps: int
    horizon: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps


@dataclass(frozen=True)
class BrownianGrid:
    """Increments of one Brownian path on a uniform grid.

    ``increments[k] = B((k+1)*dt) - B(k*dt)``.  The array is read-only.
    Grids returned by :func:`generate` regenerate bit-exactly from
    (seed, path_index, spec); grids returned by :func:`coarsen` keep the
    provenance fields of the fine path they were derived from.
    """

    spec: GridSpec
    increments: np.ndarray
    seed: int
    path_index: int

    def __post_init__(self):
        arr = np.array(self.increments, dtype=np.float64)
        if arr.shape != (self.spec.n_steps,):
            raise ValueError(
                f"expected {self.spec.n_steps} increments, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "increments", arr)

    def node_values(self) -> np.ndarray:
        """B(0), B(dt), ..., B(horizon) as prefix sums with B(0) = 0."""
        nodes = np.empty(self.spec.n_steps + 1)
        nodes[0] = 0.0
        np.cumsum(self.increments, out=nodes[1:])
        return nodes


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return seed


def _blocks_per_path(n_steps: int) -> int:
    # whole blocks per path so path boundaries align with Philox blocks
    return -(-n_steps // _WORDS_PER_BLOCK)


def generate_increments(
    spec: GridSpec, seed: int, path_start: int = 0, n_paths: int = 1
) -> np.ndarray:
    """Increments for paths [path_start, path_start + n_paths), shape (n_paths, N).

    Row i is path ``path_start + i`` and is bit-identical no matter how the
    overall path range is split into batches.
    """
    seed = _check_seed(seed)
    path_start = int(path_start)
    n_paths = int(n_paths)
    if path_start < 0:
        raise ValueError(f"path_start must be nonnegative, got {path_start}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be positive, got {n_paths}")
    n = spec.n_steps
    blocks = _blocks_per_path(n)
    bits = Philox(key=seed, counter=path_start * blocks)
    raw = bits.random_raw(n_paths * blocks * _WORDS_PER_BLOCK)
    raw = raw.reshape(n_paths, blocks * _WORDS_PER_BLOCK)[:, :n]
    # top 53 bits -> uniform strictly inside (0, 1) -> normal via inverse CDF
    uniform = (np.right_shift(raw, np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(uniform) * math.sqrt(spec.dt)


def generate(spec: GridSpec, seed: int, path_index: int = 0) -> BrownianGrid:
    """One seeded path; increments are i.i.d. Normal(0, dt)."""
    inc = generate_increments(spec, seed, path_index, 1)[0]
    return BrownianGrid(spec=spec, increments=inc, seed=int(seed), path_index=int(path_index))


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Group increments along the last axis into blocks of ``factor``.

    Each block is summed by adjacent pairing (balanced tree), see the module
    docstring for why.  ``factor`` must divide the last-axis length.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"factor must be positive, got {factor}")
    arr = np.asarray(increments, dtype=np.float64)
    n = arr.shape[-1]
    if n % factor != 0:
        raise ValueError(f"factor {factor} does not divide n_steps {n}")
    if factor == 1:
        return arr.copy()
    block = arr.reshape(arr.shape[:-1] + (n // factor, factor))
    while block.shape[-1] > 1:
        w = block.shape[-1]
        paired = block[..., 0 : 2 * (w // 2) : 2] + block[..., 1 : 2 * (w // 2) : 2]
        if w % 2:
            paired = np.concatenate([paired, block[..., -1:]], axis=-1)
        block = paired
    return block[..., 0]


def coarsen(fine: BrownianGrid, factor: int) -> BrownianGrid:
    """The same Brownian path on a grid coarsened by ``factor``."""
    coarse = coarsen_increments(fine.increments, factor)
    spec = GridSpec(fine.spec.n_steps // int(factor), fine.spec.horizon)
    return BrownianGrid(
        spec=spec, increments=coarse, seed=fine.seed, path_index=fine.path_index
    )


def polygonal_value(g: BrownianGrid, t: float) -> float:
    """Piecewise-linear interpolation of the path's node values at time t."""
    t = float(t)
    if not 0.0 <= t <= g.spec.horizon:
        raise ValueError(f"t={t!r} outside [0, {g.spec.horizon}]")
    times = np.linspace(0.0, g.spec.horizon, g.spec.n_steps + 1)
    return float(np.interp(t, times, g.node_values()))


def dump_grid(g: BrownianGrid, path) -> None:
    """Debug dump: header (N, T, seed, path_index) + little-endian doubles."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.spec.n_steps, g.spec.horizon, g.seed, g.path_index))
        fh.write(g.increments.astype("<f8").tobytes())


def load_grid(path) -> BrownianGrid:
    """Inverse of :func:`dump_grid`, bit-exact round trip."""
    with open(path, "rb") as fh:
        n_steps, horizon, seed, path_index = _HEADER.unpack(fh.read(_HEADER.size))
        data = fh.read(8 * n_steps)
    if len(data) != 8 * n_steps:
        raise ValueError(f"truncated grid file {path!r}")
    inc = np.frombuffer(data, dtype="<f8").astype(np.float64)
    return BrownianGrid(
        spec=GridSpec(n_steps, horizon), increments=inc,
        seed=seed, path_index=path_index,
    )
