import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from abstraction.lattice import Region
from abstraction.model import SymbolicModel
from config.settings import ERROR_MESSAGES, NUMERIC_CONFIG
from utils.error_handlers import InvalidInputError, UncontrollableStateError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SafetySpec:
    """Stay in ``keep`` (closed) and out of the interior of ``avoid``."""
    keep: Region
    avoid: Optional[Region] = None

    def __post_init__(self):
        if self.avoid is not None:
            if self.avoid.n != self.keep.n:
                raise InvalidInputError("Invalid input for safety spec: keep and avoid dimensions differ")
            if np.any(self.avoid.lo < self.keep.lo) or np.any(self.avoid.hi > self.keep.hi):
                raise InvalidInputError("Invalid input for safety spec: avoid box must lie inside the keep box")

    def safe_mask(self, X, tol: Optional[float] = None) -> np.ndarray:
        tol = NUMERIC_CONFIG["safety_tol"] if tol is None else tol
        mask = self.keep.contains(X, tol)
        if self.avoid is not None:
            mask &= ~self.avoid.interior_contains(X, tol)
        return mask

    def to_dict(self) -> Dict:
        data = {"keep": self.keep.to_dict()}
        if self.avoid is not None:
            data["avoid"] = self.avoid.to_dict()
        return data


class SafetyController:
    """Admissible modes per symbolic state, as an (n_states, m) mask.

    A mode is only admissible where the model enables it: under the "drop" exit
    policy a pair is enabled while some successor stays in the region, under
    "block" any flow endpoint leaving the region disables the pair.
    """

    def __init__(self, admissible: np.ndarray, rounds: int = 0):
        self.admissible = np.asarray(admissible, dtype=bool)
        if self.admissible.ndim != 2:
            raise InvalidInputError("Invalid input for controller: admissible must be a 2-d mask")
        self.rounds = rounds

    @property
    def n_states(self) -> int:
        return self.admissible.shape[0]

    @property
    def num_modes(self) -> int:
        return self.admissible.shape[1]

    @property
    def domain(self) -> np.ndarray:
        return self.admissible.any(axis=1)

    @property
    def domain_size(self) -> int:
        return int(self.domain.sum())

    @property
    def is_empty(self) -> bool:
        return self.domain_size == 0

    def modes(self, state: int) -> Tuple[int, ...]:
        return tuple(int(p) + 1 for p in np.flatnonzero(self.admissible[int(state)]))

    def is_controllable(self, state: int) -> bool:
        return bool(self.admissible[int(state)].any())

    def to_dict(self) -> Dict:
        ids = np.flatnonzero(self.domain)
        return {
            "n_states": self.n_states,
            "num_modes": self.num_modes,
            "admissible": {str(int(s)): list(self.modes(s)) for s in ids},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SafetyController":
        try:
            n_states, num_modes = int(data["n_states"]), int(data["num_modes"])
            admissible = np.zeros((n_states, num_modes), dtype=bool)
            for state, modes in data["admissible"].items():
                for p in modes:
                    admissible[int(state), int(p) - 1] = True
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ValidationError(f"Malformed controller document: {str(e)}") from e
        return cls(admissible)


def maximal_safety_controller(model: SymbolicModel, spec: SafetySpec) -> SafetyController:
    """Greatest set of safe states that can keep every successor inside itself.

    Works backwards from the losing states: each round kills the (state, mode)
    choices that can reach the current frontier, and states left with no choice
    form the next frontier.
    """
    m = model.num_modes
    point_safe = spec.safe_mask(model.grid.points(np.arange(model.num_points)))
    safe = model.point_mask_to_states(point_safe)

    pair_ok = model.enabled_matrix() & safe[:, None]
    good = pair_ok.sum(axis=1)
    alive = safe & (good > 0)
    frontier = np.flatnonzero(~alive)
    logger.info(f"Synthesis start: {int(safe.sum())} safe of {model.n_states} states, "
                f"{frontier.size} initially losing")

    rounds = 0
    while frontier.size:
        rounds += 1
        sources, actions = model.predecessors(frontier)
        keep = alive[sources] & pair_ok[sources, actions - 1]
        if not keep.any():
            break
        pairs = np.unique(sources[keep] * m + (actions[keep] - 1))
        states, columns = pairs // m, pairs % m
        pair_ok[states, columns] = False
        good -= np.bincount(states, minlength=model.n_states)

        touched = np.unique(states)
        frontier = touched[good[touched] == 0]
        alive[frontier] = False
        logger.debug(f"Round {rounds}: {pairs.size} choices removed, {frontier.size} states lost")

    pair_ok &= alive[:, None]
    controller = SafetyController(pair_ok, rounds)
    logger.info(f"✓ Safety controller: {controller.domain_size} controllable states after {rounds} rounds")
    return controller


class LazyController:
    """Keeps the current mode whenever allowed, otherwise takes the smallest admissible one."""

    def __init__(self, controller: SafetyController):
        self.controller = controller

    def choice(self, state: int, current: Optional[int] = None) -> int:
        modes = self.controller.modes(state)
        if not modes:
            raise UncontrollableStateError(ERROR_MESSAGES["uncontrollable_state"].format(state=state))
        if current in modes:
            return int(current)
        return modes[0]

    def __call__(self, state: int, current: Optional[int] = None) -> int:
        return self.choice(state, current)


def lazy_controller(controller: SafetyController) -> LazyController:
    if controller.is_empty:
        logger.warning("Deriving a lazy controller from an empty safety controller")
    return LazyController(controller)
