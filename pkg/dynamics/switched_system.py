import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


def as_finite_array(value, what: str, shape: Tuple[int, ...] = None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if shape is not None and arr.shape != shape:
        raise InvalidInputError(f"Invalid input for {what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"Invalid input for {what}: non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class AffineMode:
    """One mode x' = A x + b."""
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = as_finite_array(self.A, "A")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"Invalid input for A: expected a square matrix, got shape {A.shape}")
        b = as_finite_array(self.b, "b", (A.shape[0],))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def field(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def equilibrium(self) -> np.ndarray:
        return -np.linalg.solve(self.A, self.b)


@dataclass(frozen=True, eq=False)
class SwitchedSystem:
    n: int
    modes: List[AffineMode]

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("Invalid input for system: dimension must be >= 1")
        if not self.modes:
            raise InvalidInputError("Invalid input for system: at least one mode is required")
        for idx, mode in enumerate(self.modes, start=1):
            if mode.n != self.n:
                raise InvalidInputError(
                    f"Invalid input for system: mode {idx} has dimension {mode.n}, expected {self.n}"
                )
        object.__setattr__(self, "modes", list(self.modes))

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    @property
    def mode_ids(self) -> List[int]:
        return list(range(1, self.num_modes + 1))

    def check_mode(self, p: int) -> int:
        if not 1 <= int(p) <= self.num_modes:
            raise InvalidInputError(f"Invalid input for mode: {p} not in 1..{self.num_modes}")
        return int(p)

    def mode(self, p: int) -> AffineMode:
        return self.modes[self.check_mode(p) - 1]

    @classmethod
    def from_matrices(cls, matrices: Sequence, offsets: Sequence) -> "SwitchedSystem":
        modes = [AffineMode(np.asarray(A, float), np.asarray(b, float)) for A, b in zip(matrices, offsets)]
        return cls(n=modes[0].n, modes=modes)


@dataclass(frozen=True)
class SampledSwitchingSignal:
    sequence: Tuple[int, ...]
    tau_s: float

    def __post_init__(self):
        if not self.tau_s > 0:
            raise InvalidInputError(f"Invalid input for tau_s: must be > 0 (got {self.tau_s})")
        object.__setattr__(self, "sequence", tuple(int(p) for p in self.sequence))

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    signal: SampledSwitchingSignal
    metadata: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def boost_converter(x_c: float = 70.0, x_l: float = 3.0, r_c: float = 0.005,
                    r_l: float = 0.05, r_0: float = 1.0, v_s: float = 1.0,
                    voltage_scale: float = 5.0) -> SwitchedSystem:
    """Two-mode boost DC-DC converter in per-unit values, state [i_l, voltage_scale * v_c]."""
    r_par = r_0 / (r_0 + r_c)
    A1 = np.array([
        [-r_l / x_l, 0.0],
        [0.0, -1.0 / (x_c * (r_0 + r_c))],
    ])
    A2 = np.array([
        [-(r_l + r_0 * r_c / (r_0 + r_c)) / x_l, -r_par / x_l],
        [r_par / x_c, -1.0 / (x_c * (r_0 + r_c))],
    ])
    b = np.array([v_s / x_l, 0.0])

    scale = np.diag([1.0, voltage_scale])
    scale_inv = np.diag([1.0, 1.0 / voltage_scale])
    modes = [AffineMode(scale @ A @ scale_inv, scale @ b) for A in (A1, A2)]
    logger.debug(f"Boost converter built with voltage scale {voltage_scale}")
    return SwitchedSystem(n=2, modes=modes)
