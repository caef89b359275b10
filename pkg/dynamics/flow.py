import logging
from typing import Tuple

import numpy as np
from scipy.linalg import expm

from dynamics.switched_system import (
    AffineMode, SampledSwitchingSignal, SwitchedSystem, Trajectory, as_finite_array,
)
from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


def affine_step_map(mode: AffineMode, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """Return (Phi, c) such that the flow of ``mode`` over ``tau`` is x -> Phi x + c.

    Both come out of one exponential of the augmented matrix [[A, b], [0, 0]].
    """
    tau = float(tau)
    if not np.isfinite(tau) or tau < 0:
        raise InvalidInputError(f"Invalid input for tau: must be finite and >= 0 (got {tau})")
    n = mode.n
    augmented = np.zeros((n + 1, n + 1))
    augmented[:n, :n] = mode.A
    augmented[:n, n] = mode.b
    E = expm(augmented * tau)
    return E[:n, :n], E[:n, n]


def exact_affine_flow(mode: AffineMode, x0, tau: float) -> np.ndarray:
    x0 = as_finite_array(x0, "x0", (mode.n,))
    Phi, c = affine_step_map(mode, tau)
    return Phi @ x0 + c


def rk4_flow(mode: AffineMode, x0, tau: float, substeps: int = 64) -> np.ndarray:
    x = as_finite_array(x0, "x0", (mode.n,))
    return rk4_flow_batch(mode, x[None, :], tau, substeps)[0]


def rk4_flow_batch(mode: AffineMode, X, tau: float, substeps: int = 64) -> np.ndarray:
    """Classical fixed-step RK4 applied to every row of X."""
    x = as_finite_array(X, "X").copy()
    if x.ndim != 2 or x.shape[1] != mode.n:
        raise InvalidInputError(f"Invalid input for X: expected rows of length {mode.n}, got {x.shape}")
    tau = float(tau)
    if not np.isfinite(tau) or tau < 0:
        raise InvalidInputError(f"Invalid input for tau: must be finite and >= 0 (got {tau})")
    if int(substeps) < 1:
        raise InvalidInputError(f"Invalid input for substeps: must be >= 1 (got {substeps})")
    if tau == 0:
        return x

    h = tau / int(substeps)
    At, b = mode.A.T, mode.b
    for _ in range(int(substeps)):
        k1 = x @ At + b
        k2 = (x + 0.5 * h * k1) @ At + b
        k3 = (x + 0.5 * h * k2) @ At + b
        k4 = (x + h * k3) @ At + b
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def simulate_switched(system: SwitchedSystem, x0, signal: SampledSwitchingSignal) -> Trajectory:
    x = as_finite_array(x0, "x0", (system.n,))
    for p in signal.sequence:
        system.check_mode(p)

    # one step map per mode is enough, the period never changes
    step_maps = {p: affine_step_map(system.mode(p), signal.tau_s) for p in set(signal.sequence)}

    states = [x]
    for p in signal.sequence:
        Phi, c = step_maps[p]
        x = Phi @ x + c
        states.append(x)

    times = np.arange(len(states)) * signal.tau_s
    return Trajectory(times=times, states=np.vstack(states), signal=signal)


def dense_trajectory(system: SwitchedSystem, x0, signal: SampledSwitchingSignal,
                     substeps: int = 10) -> Trajectory:
    """Same trajectory as simulate_switched, also sampled ``substeps`` times per period."""
    if int(substeps) < 1:
        raise InvalidInputError(f"Invalid input for substeps: must be >= 1 (got {substeps})")
    x = as_finite_array(x0, "x0", (system.n,))
    h = signal.tau_s / int(substeps)
    sub_maps = {p: affine_step_map(system.mode(system.check_mode(p)), h) for p in set(signal.sequence)}

    states = [x]
    for p in signal.sequence:
        Phi, c = sub_maps[p]
        for _ in range(int(substeps)):
            x = Phi @ x + c
            states.append(x)

    times = np.arange(len(states)) * h
    return Trajectory(times=times, states=np.vstack(states), signal=signal,
                      metadata={"substeps": int(substeps)})
