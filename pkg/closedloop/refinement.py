import logging
import concurrent.futures
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from abstraction.lattice import quantize
from abstraction.model import ModelKind, SymbolicModel
from config.settings import ERROR_MESSAGES, NUMERIC_CONFIG, THREADS
from dynamics.flow import affine_step_map
from dynamics.switched_system import SwitchedSystem, as_finite_array
from synthesis.safety import LazyController, SafetyController
from transys.relation import RelationCertificate
from utils.error_handlers import (
    InvalidInputError, RelationViolationError, SymbolicControlError, UncontrollableStateError,
)

logger = logging.getLogger(__name__)


@dataclass
class ClosedLoopTrace:
    """Sampled closed loop; ``modes[k]`` is the mode applied on [t_k, t_k+1)."""
    times: np.ndarray
    states: np.ndarray
    abstract_states: np.ndarray
    modes: np.ndarray
    values: np.ndarray
    levels: np.ndarray
    tau_s: float
    outputs: np.ndarray = None
    counters: Optional[np.ndarray] = None
    metadata: Dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.modes)

    @property
    def output_distances(self) -> np.ndarray:
        return np.linalg.norm(self.states - self.outputs, axis=1)

    def to_frame(self) -> pd.DataFrame:
        table = {"t": self.times}
        for axis in range(self.states.shape[1]):
            table[f"x{axis + 1}"] = self.states[:, axis]
        # the last sample has no applied mode
        table["mode"] = pd.array(list(self.modes) + [None], dtype="Int64")
        table["abstract_id"] = self.abstract_states
        table["V"] = self.values
        table["level"] = self.levels
        return pd.DataFrame(table)


def initial_symbolic_state(model: SymbolicModel, controller: SafetyController, x0,
                           initial_mode: Optional[int] = None) -> int:
    key = quantize(x0, model.grid.lattice)
    point = int(model.grid.ids(np.array(key.k))) if model.grid.size else -1
    if point < 0:
        raise UncontrollableStateError(f"Initial state {np.asarray(x0).tolist()} lies outside the abstraction region")

    if model.kind is ModelKind.COMMON:
        return point
    if initial_mode is not None:
        return int(model.encode(point, initial_mode, 0))
    for p in model.labels:
        state = int(model.encode(point, p, 0))
        if controller.is_controllable(state):
            return state
    return int(model.encode(point, model.labels[0], 0))


def refine_and_run(system: SwitchedSystem, model: SymbolicModel, lazy: LazyController,
                   controller: SafetyController, x0, horizon: int, relation: RelationCertificate,
                   initial_mode: Optional[int] = None) -> ClosedLoopTrace:
    """Drive the concrete system with the lazy controller, tracking the closest related successor."""
    x = as_finite_array(x0, "x0", (system.n,))
    horizon = int(horizon)
    if horizon < 0:
        raise InvalidInputError(f"Invalid input for horizon: must be >= 0 (got {horizon})")
    rel_tol = NUMERIC_CONFIG["relation_rel_tol"]
    dwell = model.kind is ModelKind.DWELL

    state = initial_symbolic_state(model, controller, x, initial_mode)
    if not controller.is_controllable(state):
        raise UncontrollableStateError(ERROR_MESSAGES["uncontrollable_state"].format(state=state))

    def measure(x_now, states):
        _, modes, counters = model.decode(states)
        mode = int(modes[0]) if dwell else None
        values = np.atleast_1d(relation.value(x_now, model.outputs(states), mode))
        levels = np.array([relation.level(int(c) if dwell else None) for c in counters])
        return values, levels

    value, level = measure(x, np.array([state]))
    if value[0] > level[0] * (1 + rel_tol):
        raise RelationViolationError(
            ERROR_MESSAGES["relation_violation"].format(step=0, value=value[0], level=level[0]))

    step_maps = {p: affine_step_map(system.mode(p), model.tau_s) for p in system.mode_ids}
    xs, ids, applied, values, levels = [x], [state], [], [value[0]], [level[0]]
    current = initial_mode

    for k in range(horizon):
        if dwell:
            current = int(model.decode(np.array([state]))[1][0])
        action = lazy.choice(state, current)
        mode = model.flow_mode(state, action)
        Phi, c = step_maps[mode]
        x = Phi @ x + c

        candidates = model.successors(state, action)
        if candidates.size == 0:
            raise UncontrollableStateError(ERROR_MESSAGES["uncontrollable_state"].format(state=state))
        cand_values, cand_levels = measure(x, candidates)
        best = int(np.argmin(cand_values))
        if cand_values[best] > cand_levels[best] * (1 + rel_tol):
            raise RelationViolationError(ERROR_MESSAGES["relation_violation"].format(
                step=k + 1, value=cand_values[best], level=cand_levels[best]))

        state = int(candidates[best])
        current = action
        xs.append(x)
        ids.append(state)
        applied.append(mode)
        values.append(cand_values[best])
        levels.append(cand_levels[best])

    ids = np.asarray(ids, dtype=np.int64)
    _, _, counters = model.decode(ids)
    trace = ClosedLoopTrace(
        times=np.arange(horizon + 1) * model.tau_s,
        states=np.vstack(xs),
        abstract_states=ids,
        modes=np.asarray(applied, dtype=np.int64),
        values=np.asarray(values),
        levels=np.asarray(levels),
        tau_s=model.tau_s,
        outputs=model.outputs(ids),
        counters=counters if dwell else None,
        metadata={"kind": model.kind.value, "x0": np.asarray(x0, dtype=float).tolist()},
    )
    logger.info(f"✓ Closed loop ran {horizon} steps, {len(np.flatnonzero(np.diff(trace.modes)))} switches, "
                f"max V/level = {float(np.max(trace.values / trace.levels)):.4f}")
    return trace


def switch_spacing(modes: Sequence[int]) -> Optional[int]:
    """Fewest samples between consecutive switches, counting from the start; None without switches."""
    modes = np.asarray(modes)
    if modes.size < 2:
        return None
    switches = np.flatnonzero(modes[1:] != modes[:-1]) + 1
    if switches.size == 0:
        return None
    return int(np.min(np.diff(np.concatenate(([0], switches)))))


@dataclass
class BatchResult:
    x0: List[float]
    trace: Optional[ClosedLoopTrace] = None
    error: Optional[str] = None


def run_batch(system: SwitchedSystem, model: SymbolicModel, lazy: LazyController, controller: SafetyController,
              initial_states: Sequence, horizon: int, relation: RelationCertificate,
              threads: Optional[int] = None) -> List[BatchResult]:
    threads = max(1, int(threads or THREADS))

    def run_one(x0) -> BatchResult:
        try:
            trace = refine_and_run(system, model, lazy, controller, x0, horizon, relation)
            return BatchResult(x0=list(map(float, x0)), trace=trace)
        except SymbolicControlError as e:
            logger.warning(f"Closed loop from {list(x0)} failed: {str(e)}")
            return BatchResult(x0=list(map(float, x0)), error=str(e))

    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(run_one, initial_states))
    failed = sum(1 for r in results if r.error)
    logger.info(f"✓ Batch finished: {len(results) - failed} runs, {failed} failed")
    return results
