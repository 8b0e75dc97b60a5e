"""Finite abstractions on uniform hyper-interval grids.

Cells are axis-aligned boxes of size eta centered at lb + (k + 1/2) eta.  For
one (cell, input) pair the attainable set of the sampled system is
over-approximated by the box of half-width r' = beta(eta/2 + z) + eta/2 + z
around the nominal flow of the cell center; its successor cells are the grid
cells whose closed z-inflated extent meets that box, which is an index
interval per dimension.  Boxes leaving the domain in a non-periodic dimension
block the pair entirely; periodic dimensions wrap modulo the cell count.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numat
from .growth import GrowthBound, eval_growth

INSIDE = "INSIDE"
OVERFLOW = "OVERFLOW"

# relative tolerance for eta tiling the domain an integer number of times
_TILING_RTOL = 1e-9
_CHUNK_CELLS = 4096


class IntegrationBlowup(RuntimeError):
    """Non-finite state during integration, with (cell, input) context."""

    def __init__(self, msg: str, cell_flat: int | None = None, input_index: int | None = None):
        super().__init__(msg)
        self.cell_flat = cell_flat
        self.input_index = input_index


@dataclass(frozen=True)
class UniformGrid:
    """Axis-aligned uniform grid over [lb, ub] with per-dimension periodicity."""

    lb: np.ndarray
    ub: np.ndarray
    eta: np.ndarray
    counts: np.ndarray
    periodic: np.ndarray

    @classmethod
    def from_eta(cls, lb, ub, eta, periodic=None) -> "UniformGrid":
        lb = numat.as_vector(lb, None, "lb")
        n = lb.size
        ub = numat.as_vector(ub, n, "ub")
        eta = numat.as_vector(eta, n, "eta")
        if np.any(ub <= lb):
            raise ValueError("ub must exceed lb componentwise")
        if np.any(eta <= 0.0):
            raise ValueError("eta must be strictly positive")
        width = ub - lb
        counts = np.maximum(1, np.rint(width / eta).astype(np.int64))
        if np.any(np.abs(counts * eta - width) > _TILING_RTOL * width):
            raise ValueError("eta must tile ub - lb an integer number of times")
        return cls(lb, ub, eta, counts, cls._periodic(periodic, n))

    @classmethod
    def from_subdivisions(cls, lb, ub, counts, periodic=None) -> "UniformGrid":
        lb = numat.as_vector(lb, None, "lb")
        n = lb.size
        ub = numat.as_vector(ub, n, "ub")
        if np.any(ub <= lb):
            raise ValueError("ub must exceed lb componentwise")
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (n,) or np.any(counts < 1):
            raise ValueError("subdivision counts must be positive integers per dimension")
        eta = (ub - lb) / counts
        return cls(lb, ub, eta, counts, cls._periodic(periodic, n))

    @staticmethod
    def _periodic(periodic, n: int) -> np.ndarray:
        if periodic is None:
            return np.zeros(n, dtype=bool)
        periodic = np.asarray(periodic, dtype=bool)
        if periodic.shape != (n,):
            raise ValueError("periodic flags must match the dimension")
        return periodic

    @property
    def n(self) -> int:
        return self.lb.size

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.counts))

    def center(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        if k.shape != (self.n,) or np.any(k < 0) or np.any(k >= self.counts):
            raise ValueError(f"cell index {k} outside grid counts {self.counts}")
        return self.lb + (k + 0.5) * self.eta

    def flat_index(self, k) -> int:
        """Mixed-radix flat index, dimension 1 fastest-varying."""
        k = np.asarray(k, dtype=np.int64)
        out = 0
        for i in range(self.n - 1, -1, -1):
            out = out * int(self.counts[i]) + int(k[i])
        return out

    def cell_from_flat(self, flat: int) -> np.ndarray:
        flat = int(flat)
        if not 0 <= flat < self.num_cells:
            raise ValueError(f"flat index {flat} outside [0, {self.num_cells})")
        k = np.empty(self.n, dtype=np.int64)
        for i in range(self.n):
            k[i] = flat % int(self.counts[i])
            flat //= int(self.counts[i])
        return k

    def centers_of_flats(self, flats: np.ndarray) -> np.ndarray:
        """Centers of many cells at once; rows follow the given flat indices."""
        K = np.empty((flats.size, self.n), dtype=np.int64)
        rem = flats.astype(np.int64)
        for i in range(self.n):
            K[:, i] = rem % int(self.counts[i])
            rem = rem // int(self.counts[i])
        return self.lb + (K + 0.5) * self.eta


@dataclass(frozen=True)
class Plant:
    """Sampled control system: vector field, finite input set, growth bounds."""

    name: str
    n: int
    inputs: tuple
    rhs: Callable
    growth: tuple
    tau: float
    w: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise ValueError("plant needs at least one input value")
        if len(self.growth) != len(self.inputs):
            raise ValueError("one growth bound per input value is required")
        for gb in self.growth:
            if not isinstance(gb, GrowthBound) or gb.n != self.n:
                raise ValueError("growth bounds must match the state dimension")
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be a positive real")


@dataclass(frozen=True)
class SuccessorBox:
    """Index interval of successor cells for one (cell, input) pair.

    For INSIDE status, lo/hi are per-dimension first and last indices (stored
    modulo the cell count on periodic dimensions, so hi < lo encodes a wrap)
    and width is the count per dimension.  OVERFLOW carries no indices.
    """

    status: str
    lo: np.ndarray | None
    hi: np.ndarray | None
    width: np.ndarray | None


@dataclass
class AbstractionStats:
    num_cells: int
    num_inputs: int
    total_transitions: int
    blocked_pairs: int
    per_input_transitions: list
    wall_time_s: float


@dataclass(frozen=True)
class ComparisonReport:
    predicted: float
    actual: float
    rel_err: float


def default_substeps(tau: float) -> int:
    return 5 if tau <= 0.05 else int(math.ceil(tau / 0.01))


def integrate(plant: Plant, x0, u, tau: float, substeps: int) -> np.ndarray:
    """Classical fixed-step RK4 flow of the nominal system.

    ``x0`` may carry leading batch axes; the vector field must broadcast.
    Non-finite states raise IntegrationBlowup.
    """
    substeps = int(substeps)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    x = np.array(x0, dtype=float)
    h = float(tau) / substeps
    for _ in range(substeps):
        k1 = plant.rhs(x, u)
        k2 = plant.rhs(x + 0.5 * h * k1, u)
        k3 = plant.rhs(x + 0.5 * h * k2, u)
        k4 = plant.rhs(x + h * k3, u)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise IntegrationBlowup("non-finite state during integration")
    return x


def _chunk_successors(grid, plant, z, flats, u_index, substeps):
    """Vectorized successor arithmetic for a chunk of cells under one input.

    Returns (lo, width, overflow): integer arrays (C, n), (C, n) and a bool
    mask (C,).  lo is stored modulo the count on periodic dimensions.
    """
    u = plant.inputs[u_index]
    centers = grid.centers_of_flats(flats)
    try:
        c = integrate(plant, centers, u, plant.tau, substeps)
    except IntegrationBlowup:
        # redo cell by cell to attach the offending pair
        for f, x0 in zip(flats, centers):
            try:
                integrate(plant, x0, u, plant.tau, substeps)
            except IntegrationBlowup:
                raise IntegrationBlowup(
                    f"non-finite state integrating cell {int(f)} under input {u_index}",
                    cell_flat=int(f),
                    input_index=u_index,
                ) from None
        raise
    rp = eval_growth(plant.growth[u_index], grid.eta / 2.0 + z)
    s = rp + z  # half-width of the box of reachable z-inflated cell centers
    a = c - grid.lb
    lo = np.ceil((a - s) / grid.eta).astype(np.int64) - 1
    hi = np.floor((a + s) / grid.eta).astype(np.int64)
    m = grid.counts
    width = hi - lo + 1
    overflow = np.zeros(len(flats), dtype=bool)
    for i in range(grid.n):
        if grid.periodic[i]:
            full = width[:, i] >= m[i]
            width[full, i] = m[i]
            lo[full, i] = 0
            part = ~full
            lo[part, i] = np.mod(lo[part, i], m[i])
        else:
            overflow |= (lo[:, i] < 0) | (hi[:, i] > m[i] - 1)
    return lo, width, overflow


def successors(grid, plant, z, cell, u_index: int, substeps: int | None = None) -> SuccessorBox:
    """Successor index box for one cell under one input.

    Boundary contacts count: a successor cell qualifies when its closed
    z-inflated extent intersects the closed attainable box, so results are
    sensitive to exact ties at cell faces.
    """
    z = numat.as_vector(z, grid.n, "z")
    if np.any(z < 0.0):
        raise ValueError("z must be nonnegative")
    u_index = int(u_index)
    if not 0 <= u_index < len(plant.inputs):
        raise ValueError(f"input index {u_index} out of range")
    if substeps is None:
        substeps = default_substeps(plant.tau)
    flat = grid.flat_index(np.asarray(cell))
    lo, width, overflow = _chunk_successors(
        grid, plant, z, np.array([flat], dtype=np.int64), u_index, substeps
    )
    if overflow[0]:
        return SuccessorBox(OVERFLOW, None, None, None)
    lo0 = lo[0]
    width0 = width[0]
    hi0 = np.where(
        grid.periodic, np.mod(lo0 + width0 - 1, grid.counts), lo0 + width0 - 1
    ).astype(np.int64)
    return SuccessorBox(INSIDE, lo0, hi0, width0)


def count_transitions(box: SuccessorBox) -> int:
    """Number of successor cells in the box; zero for OVERFLOW."""
    if box.status == OVERFLOW:
        return 0
    return int(np.prod(box.width))


class TransitionWriter:
    """Streams successor boxes to the delimited transition file.

    Header: ``gridabs-trans v1 n=<n> m=<m1,...,mn> inputs=<count>``; one record
    ``cell_flat_index,input_index,lo_1..lo_n,hi_1..hi_n,wrapped_mask`` per
    non-blocked pair, where bit i-1 of wrapped_mask marks a wrapping dimension.
    Blocked pairs are omitted; the stats sidecar carries their count.
    """

    def __init__(self, path, grid: UniformGrid, num_inputs: int):
        self.path = str(path)
        self._fh = open(self.path, "w", encoding="ascii", newline="\n")
        m = ",".join(str(int(c)) for c in grid.counts)
        self._fh.write(f"gridabs-trans v1 n={grid.n} m={m} inputs={num_inputs}\n")
        self._counts = grid.counts

    def __call__(self, cell_flat: int, input_index: int, box: SuccessorBox):
        if box.status == OVERFLOW:
            return
        mask = 0
        for i in range(len(self._counts)):
            if box.hi[i] < box.lo[i]:
                mask |= 1 << i
        try:
            self._fh.write(
                f"{cell_flat},{input_index},"
                + ",".join(str(int(v)) for v in box.lo)
                + ","
                + ",".join(str(int(v)) for v in box.hi)
                + f",{mask}\n"
            )
        except OSError as e:
            raise RuntimeError(
                f"transition write failed at cell {cell_flat} input {input_index}: {e}"
            ) from e

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_abstraction(
    grid: UniformGrid,
    plant: Plant,
    z,
    substeps: int | None = None,
    sink=None,
    threads: int | None = None,
) -> AbstractionStats:
    """Count (and optionally stream) all transitions of the abstraction.

    Cells are processed in fixed chunks; ``threads`` only distributes chunks
    over a thread pool, and both the totals and the sink stream are reduced
    in flat-index order, so the output is independent of the thread count.
    """
    z = numat.as_vector(z, grid.n, "z")
    if np.any(z < 0.0):
        raise ValueError("z must be nonnegative")
    if substeps is None:
        substeps = default_substeps(plant.tau)
    if threads is None:
        threads = 1
    threads = max(1, int(threads))
    t0 = time.perf_counter()
    num_inputs = len(plant.inputs)
    flats_all = np.arange(grid.num_cells, dtype=np.int64)
    chunks = [
        flats_all[i : i + _CHUNK_CELLS] for i in range(0, grid.num_cells, _CHUNK_CELLS)
    ]

    def work(flats):
        per_input = []
        for ui in range(num_inputs):
            per_input.append(_chunk_successors(grid, plant, z, flats, ui, substeps))
        return per_input

    pool = None
    if threads == 1:
        results = map(work, chunks)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, chunks)

    total = 0
    blocked = 0
    per_input_totals = [0] * num_inputs
    for flats, per_input in zip(chunks, results):
        for ui, (lo, width, overflow) in enumerate(per_input):
            counts = np.prod(width, axis=1)
            counts[overflow] = 0
            sub = int(np.sum(counts))
            per_input_totals[ui] += sub
            total += sub
            blocked += int(np.count_nonzero(overflow))
        if sink is not None:
            for row, flat in enumerate(flats):
                for ui, (lo, width, overflow) in enumerate(per_input):
                    if overflow[row]:
                        sink(int(flat), ui, SuccessorBox(OVERFLOW, None, None, None))
                        continue
                    l = lo[row]
                    w = width[row]
                    h = np.where(
                        grid.periodic, np.mod(l + w - 1, grid.counts), l + w - 1
                    ).astype(np.int64)
                    sink(int(flat), ui, SuccessorBox(INSIDE, l, h, w))
    if pool is not None:
        pool.shutdown()
    return AbstractionStats(
        num_cells=grid.num_cells,
        num_inputs=num_inputs,
        total_transitions=total,
        blocked_pairs=blocked,
        per_input_transitions=per_input_totals,
        wall_time_s=time.perf_counter() - t0,
    )


def compare_counts(predicted: float, actual: float) -> ComparisonReport:
    """Relative error of the prediction against a built transition count."""
    predicted = float(predicted)
    actual = float(actual)
    if actual <= 0.0:
        raise ValueError("actual transition count must be positive to compare")
    return ComparisonReport(predicted, actual, abs(predicted - actual) / actual)
