import logging
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from abstraction.model import DwellSymbolicModel, ModelKind, SymbolicModel
from config.settings import STATE_CLASSES
from synthesis.safety import LazyController, SafetyController
from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


def _class_name(modes: Tuple[int, ...], num_modes: int) -> str:
    if not modes:
        return STATE_CLASSES["uncontrollable"]
    if len(modes) == num_modes and num_modes > 1:
        return STATE_CLASSES["both"]
    if len(modes) == 1:
        return STATE_CLASSES["single"].format(mode=modes[0])
    return STATE_CLASSES["subset"].format(modes=",".join(str(p) for p in modes))


def _grid_frame(model: SymbolicModel, points: np.ndarray, classes) -> pd.DataFrame:
    keys = model.grid.keys(points)
    coords = model.grid.lattice.embed(keys)
    table = {}
    for axis in range(model.grid.n):
        table[f"k{axis + 1}"] = keys[:, axis]
    for axis in range(model.grid.n):
        table[f"x{axis + 1}"] = coords[:, axis]
    table["class"] = list(classes)
    return pd.DataFrame(table)


def _class_column(admissible: np.ndarray) -> list:
    num_modes = admissible.shape[1]
    # few distinct rows, so name each pattern once
    patterns, inverse = np.unique(admissible, axis=0, return_inverse=True)
    names = [_class_name(tuple(int(p) + 1 for p in np.flatnonzero(row)), num_modes) for row in patterns]
    return [names[i] for i in np.asarray(inverse).reshape(-1)]


def classification_map(model: SymbolicModel, controller: SafetyController) -> pd.DataFrame:
    """Class of every lattice point: which modes the controller allows there."""
    if model.kind is not ModelKind.COMMON:
        raise InvalidInputError("Invalid input for classification map: use dwell_projection_map for dwell models")
    points = np.arange(model.num_points)
    if points.size == 0:
        return _grid_frame(model, points, [])
    return _grid_frame(model, points, _class_column(controller.admissible))


def _dwell_slice(model: DwellSymbolicModel, mode: int, counter: Optional[int]) -> Tuple[np.ndarray, np.ndarray, int]:
    if model.kind is not ModelKind.DWELL:
        raise InvalidInputError("Invalid input for dwell map: model has no dwell counter")
    if mode not in model.labels:
        raise InvalidInputError(f"Invalid input for dwell map: unknown mode {mode}")
    counter = model.dwell_steps - 1 if counter is None else int(counter)
    if not 0 <= counter < model.dwell_steps:
        raise InvalidInputError(f"Invalid input for dwell map: counter {counter} outside 0..{model.dwell_steps - 1}")
    points = np.arange(model.num_points)
    return points, model.encode(points, mode, counter), counter


def dwell_projection_map(model: DwellSymbolicModel, controller: SafetyController, mode: int,
                         counter: Optional[int] = None) -> pd.DataFrame:
    """Allowed next modes over the lattice for a fixed current mode and counter (default: dwell elapsed)."""
    points, states, counter = _dwell_slice(model, mode, counter)
    frame = _grid_frame(model, points, _class_column(controller.admissible[states]) if points.size else [])
    frame.insert(0, "counter", counter)
    frame.insert(0, "mode", mode)
    return frame


def lazy_classification_map(model: SymbolicModel, controller: SafetyController, lazy: LazyController,
                            mode: Optional[int] = None, counter: Optional[int] = None) -> pd.DataFrame:
    """What the lazy controller does at each lattice point.

    Where it would keep the current mode the class is keep-current; where it
    must act the class names the forced mode.
    """
    if model.kind is ModelKind.COMMON:
        points = np.arange(model.num_points)
        if points.size == 0:
            return _grid_frame(model, points, [])
        classes = np.array(_class_column(controller.admissible), dtype=object)
        classes[controller.admissible.sum(axis=1) > 1] = STATE_CLASSES["keep_current"]
        return _grid_frame(model, points, classes)

    if mode is None:
        raise InvalidInputError("Invalid input for lazy map: dwell models need the current mode")
    points, states, counter = _dwell_slice(model, mode, counter)
    classes = []
    for state in states.tolist():
        if not controller.is_controllable(state):
            classes.append(STATE_CLASSES["uncontrollable"])
            continue
        chosen = lazy.choice(state, mode)
        if chosen == mode:
            classes.append(STATE_CLASSES["keep_current"])
        else:
            classes.append(STATE_CLASSES["single"].format(mode=chosen))
    frame = _grid_frame(model, points, classes)
    frame.insert(0, "counter", counter)
    frame.insert(0, "mode", mode)
    return frame
