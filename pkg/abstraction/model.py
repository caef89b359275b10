import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd

from abstraction.lattice import LatticePoint, RegionGrid

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    COMMON = "common"
    DWELL = "dwell"


def gather_csr(indptr: np.ndarray, data: np.ndarray, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Concatenate data[indptr[r]:indptr[r+1]] for every r in rows; also return the owning row position."""
    rows = np.asarray(rows, dtype=np.int64)
    starts = indptr[rows]
    counts = indptr[rows + 1] - starts
    total = int(counts.sum())
    owner = np.repeat(np.arange(rows.size, dtype=np.int64), counts)
    if total == 0:
        return data[:0], owner
    first = np.repeat(np.cumsum(counts) - counts, counts)
    positions = np.repeat(starts, counts) + (np.arange(total, dtype=np.int64) - first)
    return data[positions], owner


@dataclass(eq=False)
class SpatialTransitions:
    """Lattice-level successors for every (point, mode) pair, pair id = point * m + (mode - 1).

    ``exit_flags`` marks pairs whose flow endpoint left the region. Successors outside the
    region are never kept; with ``block_exits`` a flagged pair is unusable altogether.
    """
    num_points: int
    num_modes: int
    indptr: np.ndarray
    targets: np.ndarray
    exit_flags: np.ndarray
    endpoints: np.ndarray
    block_exits: bool = False

    def __post_init__(self):
        self._reverse = None

    def pair_ids(self, points, modes) -> np.ndarray:
        return np.asarray(points, dtype=np.int64) * self.num_modes + (np.asarray(modes, dtype=np.int64) - 1)

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def usable(self) -> np.ndarray:
        if self.block_exits:
            return ~self.exit_flags & (self.counts > 0)
        return self.counts > 0

    def successors(self, point: int, mode: int) -> np.ndarray:
        j = int(self.pair_ids(point, mode))
        return self.targets[self.indptr[j]:self.indptr[j + 1]]

    def _reverse_index(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._reverse is None:
            sources = np.repeat(np.arange(self.num_points * self.num_modes, dtype=np.int64), self.counts)
            modes = sources % self.num_modes
            keys = self.targets * self.num_modes + modes
            order = np.argsort(keys, kind="stable")
            rev_indptr = np.zeros(self.num_points * self.num_modes + 1, dtype=np.int64)
            np.cumsum(np.bincount(keys, minlength=self.num_points * self.num_modes), out=rev_indptr[1:])
            self._reverse = (rev_indptr, sources[order] // self.num_modes)
        return self._reverse

    def predecessors(self, points, mode: int) -> Tuple[np.ndarray, np.ndarray]:
        """Source points reaching each of ``points`` under ``mode`` and the position of that point."""
        rev_indptr, rev_sources = self._reverse_index()
        return gather_csr(rev_indptr, rev_sources, self.pair_ids(points, mode))


@dataclass(frozen=True)
class SymbolicState:
    point: LatticePoint
    mode: Optional[int] = None
    counter: Optional[int] = None


@dataclass(frozen=True)
class DegreeStats:
    min: int
    max: int
    mean: float


class SymbolicModel(ABC):
    """Finite transition system over lattice points of a region.

    A transition is indexed by the source state and the mode chosen there. For the
    common model that mode drives the flow; for the dwell model the flow follows the
    state's own mode and the chosen mode becomes the successor's mode.
    """

    kind: ModelKind

    def __init__(self, grid: RegionGrid, spatial: SpatialTransitions, tau_s: float, eta: float,
                 radius: Optional[float] = None):
        self.grid = grid
        self.spatial = spatial
        self.tau_s = tau_s
        self.eta = eta
        self.radius = eta if radius is None else radius

    @property
    def num_modes(self) -> int:
        return self.spatial.num_modes

    @property
    def num_points(self) -> int:
        return self.grid.size

    @property
    def labels(self) -> Tuple[int, ...]:
        return tuple(range(1, self.num_modes + 1))

    @property
    @abstractmethod
    def n_states(self) -> int:
        ...

    @abstractmethod
    def decode(self, ids) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(point ids, modes, counters) of state ids; modes/counters are 0 for the common model."""

    @abstractmethod
    def enabled_matrix(self) -> np.ndarray:
        """(n_states, m) mask of usable (state, mode) choices."""

    @abstractmethod
    def successors(self, state: int, label: int) -> np.ndarray:
        ...

    @abstractmethod
    def predecessors(self, states) -> Tuple[np.ndarray, np.ndarray]:
        """All (source state, chosen mode) pairs with a transition into one of ``states``."""

    @abstractmethod
    def flow_mode(self, state: int, label: int) -> int:
        ...

    @abstractmethod
    def initial_mask(self) -> np.ndarray:
        ...

    @abstractmethod
    def point_mask_to_states(self, point_mask: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _transition_block(self, ids: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...

    def outputs(self, ids) -> np.ndarray:
        points, _, _ = self.decode(ids)
        return self.grid.points(points)

    def output(self, state: int) -> np.ndarray:
        return self.outputs(np.array([state]))[0]

    def state(self, state_id: int) -> SymbolicState:
        points, modes, counters = self.decode(np.array([state_id]))
        key = LatticePoint(tuple(int(k) for k in self.grid.keys(points)[0]))
        if self.kind is ModelKind.COMMON:
            return SymbolicState(point=key)
        return SymbolicState(point=key, mode=int(modes[0]), counter=int(counters[0]))

    def exit_flag(self, state: int, label: int) -> bool:
        points, _, _ = self.decode(np.array([state]))
        j = self.spatial.pair_ids(points[0], self.flow_mode(state, label))
        return bool(self.spatial.exit_flags[j])

    def flow_endpoint(self, state: int, label: int) -> np.ndarray:
        points, _, _ = self.decode(np.array([state]))
        return self.spatial.endpoints[self.spatial.pair_ids(points[0], self.flow_mode(state, label))]

    def transition_label(self, state: int, label: int) -> int:
        """Label of the transition in transition-system terms."""
        return label

    def transition_blocks(self, chunk: int = 200_000) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Usable transitions as (src, label, dst) arrays, chunked over source ids."""
        for start in range(0, self.n_states, chunk):
            ids = np.arange(start, min(start + chunk, self.n_states), dtype=np.int64)
            yield self._transition_block(ids)

    def state_table(self, ids=None) -> pd.DataFrame:
        ids = np.arange(self.n_states, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        points, modes, counters = self.decode(ids)
        keys = self.grid.keys(points)
        coords = self.grid.lattice.embed(keys)
        table = {"id": ids}
        for axis in range(self.grid.n):
            table[f"k{axis + 1}"] = keys[:, axis]
        for axis in range(self.grid.n):
            table[f"x{axis + 1}"] = coords[:, axis]
        table["mode"] = modes
        table["counter"] = counters
        table["initial"] = self.initial_mask()[ids]
        return pd.DataFrame(table)


class CommonSymbolicModel(SymbolicModel):
    kind = ModelKind.COMMON

    @property
    def n_states(self) -> int:
        return self.num_points

    def decode(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        zeros = np.zeros_like(ids)
        return ids, zeros, zeros

    def flow_mode(self, state: int, label: int) -> int:
        return int(label)

    def enabled_matrix(self) -> np.ndarray:
        return self.spatial.usable.reshape(self.num_points, self.num_modes)

    def successors(self, state: int, label: int) -> np.ndarray:
        return self.spatial.successors(state, label)

    def predecessors(self, states):
        states = np.asarray(states, dtype=np.int64)
        sources, labels = [], []
        for p in self.labels:
            src, _ = self.spatial.predecessors(states, p)
            sources.append(src)
            labels.append(np.full(src.size, p, dtype=np.int64))
        return np.concatenate(sources), np.concatenate(labels)

    def initial_mask(self) -> np.ndarray:
        return np.ones(self.n_states, dtype=bool)

    def point_mask_to_states(self, point_mask: np.ndarray) -> np.ndarray:
        return np.asarray(point_mask, dtype=bool)

    def _transition_block(self, ids):
        enabled = self.enabled_matrix()
        srcs, labels, dsts = [], [], []
        for p in self.labels:
            rows = ids[enabled[ids, p - 1]]
            targets, owner = gather_csr(self.spatial.indptr, self.spatial.targets, self.spatial.pair_ids(rows, p))
            srcs.append(rows[owner])
            labels.append(np.full(targets.size, p, dtype=np.int64))
            dsts.append(targets)
        return np.concatenate(srcs), np.concatenate(labels), np.concatenate(dsts)


class DwellSymbolicModel(SymbolicModel):
    """States (point, mode, counter), id = (point * m + mode - 1) * N + counter."""
    kind = ModelKind.DWELL

    def __init__(self, grid: RegionGrid, spatial: SpatialTransitions, tau_s: float, eta: float,
                 dwell_steps: int, radius: Optional[float] = None):
        super().__init__(grid, spatial, tau_s, eta, radius)
        self.dwell_steps = int(dwell_steps)

    @property
    def n_states(self) -> int:
        return self.num_points * self.num_modes * self.dwell_steps

    def encode(self, points, modes, counters) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64)
        return (points * self.num_modes + (np.asarray(modes, dtype=np.int64) - 1)) * self.dwell_steps \
            + np.asarray(counters, dtype=np.int64)

    def decode(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        counters = ids % self.dwell_steps
        pair = ids // self.dwell_steps
        return pair // self.num_modes, pair % self.num_modes + 1, counters

    def flow_mode(self, state: int, label: int) -> int:
        _, modes, _ = self.decode(np.array([state]))
        return int(modes[0])

    def transition_label(self, state: int, label: int) -> int:
        return self.flow_mode(state, label)

    def _switch_rule(self) -> np.ndarray:
        """rule[p, i, a]: choosing mode a at (p, i) is allowed."""
        m, N = self.num_modes, self.dwell_steps
        same = np.eye(m, dtype=bool)[:, None, :]
        elapsed = (np.arange(N) == N - 1)[None, :, None]
        return same | elapsed

    def enabled_matrix(self) -> np.ndarray:
        m, N = self.num_modes, self.dwell_steps
        usable = self.spatial.usable.reshape(self.num_points, m)
        enabled = usable[:, :, None, None] & self._switch_rule()[None, :, :, :]
        return enabled.reshape(self.n_states, m)

    def next_counter(self, counter: int, mode: int, label: int) -> int:
        if label != mode:
            return 0
        return min(counter + 1, self.dwell_steps - 1)

    def successors(self, state: int, label: int) -> np.ndarray:
        points, modes, counters = self.decode(np.array([state]))
        point, mode, counter = int(points[0]), int(modes[0]), int(counters[0])
        if label != mode and counter != self.dwell_steps - 1:
            return np.empty(0, dtype=np.int64)
        targets = self.spatial.successors(point, mode)
        return self.encode(targets, label, self.next_counter(counter, mode, label))

    def predecessors(self, states):
        states = np.asarray(states, dtype=np.int64)
        points, modes, counters = self.decode(states)
        N = self.dwell_steps
        sources, labels = [], []

        for p in self.labels:
            selected = modes == p
            # no switch: counter advances, or stays at N-1
            for pred_counter in range(N):
                successor_counter = min(pred_counter + 1, N - 1)
                rows = selected & (counters == successor_counter)
                if not rows.any():
                    continue
                src, _ = self.spatial.predecessors(points[rows], p)
                sources.append(self.encode(src, p, pred_counter))
                labels.append(np.full(src.size, p, dtype=np.int64))

            # switch into p from another mode whose dwell time elapsed
            rows = selected & (counters == 0)
            if not rows.any():
                continue
            for q in self.labels:
                if q == p:
                    continue
                src, _ = self.spatial.predecessors(points[rows], q)
                sources.append(self.encode(src, q, N - 1))
                labels.append(np.full(src.size, p, dtype=np.int64))

        if not sources:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        return np.concatenate(sources), np.concatenate(labels)

    def initial_mask(self) -> np.ndarray:
        _, _, counters = self.decode(np.arange(self.n_states, dtype=np.int64))
        return counters == 0

    def point_mask_to_states(self, point_mask: np.ndarray) -> np.ndarray:
        return np.repeat(np.asarray(point_mask, dtype=bool), self.num_modes * self.dwell_steps)

    def _transition_block(self, ids):
        enabled = self.enabled_matrix()
        points, modes, counters = self.decode(ids)
        srcs, labels, dsts = [], [], []
        for a in self.labels:
            rows = enabled[ids, a - 1]
            row_ids = ids[rows]
            targets, owner = gather_csr(self.spatial.indptr, self.spatial.targets,
                                        self.spatial.pair_ids(points[rows], modes[rows]))
            src_modes = modes[rows][owner]
            src_counters = counters[rows][owner]
            next_counters = np.where(src_modes == a, np.minimum(src_counters + 1, self.dwell_steps - 1), 0)
            srcs.append(row_ids[owner])
            labels.append(src_modes)
            dsts.append(self.encode(targets, a, next_counters))
        return np.concatenate(srcs), np.concatenate(labels), np.concatenate(dsts)
