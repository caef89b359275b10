import logging
import concurrent.futures
from typing import List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from abstraction.lattice import Lattice, Region, RegionGrid, ball_candidates
from abstraction.model import (
    CommonSymbolicModel, DegreeStats, DwellSymbolicModel, SpatialTransitions, SymbolicModel,
)
from config.settings import CHUNK_SIZE, NUMERIC_CONFIG, SHOW_PROGRESS, THREADS
from dynamics.flow import affine_step_map, rk4_flow_batch
from dynamics.switched_system import SwitchedSystem
from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)

INTEGRATORS = ("exact", "rk4")
EXIT_POLICIES = ("drop", "block")


def _pair_chunk(grid: RegionGrid, system: SwitchedSystem, step_maps, integrator: str, tau_s: float,
                radius: float, start: int, stop: int):
    ids = np.arange(start, stop, dtype=np.int64)
    X = grid.points(ids)
    m, n = system.num_modes, system.n

    endpoints = np.empty((ids.size, m, n))
    for p in system.mode_ids:
        if integrator == "exact":
            Phi, c = step_maps[p]
            endpoints[:, p - 1, :] = X @ Phi.T + c
        else:
            endpoints[:, p - 1, :] = rk4_flow_batch(system.mode(p), X, tau_s, NUMERIC_CONFIG["rk4_substeps"])
    endpoints = endpoints.reshape(ids.size * m, n)

    exits = ~grid.contains_point(endpoints)
    keys, mask = ball_candidates(endpoints, grid.lattice, radius)
    target_ids = grid.ids(keys)
    mask &= target_ids >= 0
    return mask.sum(axis=1), target_ids[mask], exits, endpoints


def compute_spatial_transitions(system: SwitchedSystem, tau_s: float, grid: RegionGrid,
                                radius: float, threads: Optional[int] = None,
                                integrator: str = "exact", exit_policy: str = "drop") -> SpatialTransitions:
    """Flow every lattice point of the grid under every mode and collect the lattice ball around each endpoint."""
    if integrator not in INTEGRATORS:
        raise InvalidInputError(f"Invalid input for integrator: expected one of {INTEGRATORS}, got '{integrator}'")
    if exit_policy not in EXIT_POLICIES:
        raise InvalidInputError(f"Invalid input for exit_policy: expected one of {EXIT_POLICIES}, got '{exit_policy}'")
    if not (np.isfinite(tau_s) and tau_s > 0):
        raise InvalidInputError(f"Invalid input for tau_s: must be > 0 (got {tau_s})")
    if grid.n != system.n:
        raise InvalidInputError(f"Invalid input for abstraction: region dimension {grid.n} vs system {system.n}")

    threads = max(1, int(threads or THREADS))
    m = system.num_modes
    step_maps = {p: affine_step_map(system.mode(p), tau_s) for p in system.mode_ids}
    bounds: List[Tuple[int, int]] = [
        (start, min(start + CHUNK_SIZE, grid.size)) for start in range(0, grid.size, CHUNK_SIZE)
    ]
    logger.info(f"Flowing {grid.size} lattice points under {m} modes ({len(bounds)} chunks, {threads} threads)")

    def work(bound):
        return _pair_chunk(grid, system, step_maps, integrator, tau_s, radius, *bound)

    # map keeps chunk order, so the result does not depend on the thread count
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(tqdm(executor.map(work, bounds), total=len(bounds),
                            desc="Abstraction", disable=not SHOW_PROGRESS or len(bounds) < 2))

    indptr = np.zeros(grid.size * m + 1, dtype=np.int64)
    if results:
        counts = np.concatenate([r[0] for r in results])
        np.cumsum(counts, out=indptr[1:])
        targets = np.concatenate([r[1] for r in results]).astype(np.int64)
        exits = np.concatenate([r[2] for r in results])
        endpoints = np.concatenate([r[3] for r in results])
    else:
        targets = np.empty(0, dtype=np.int64)
        exits = np.empty(0, dtype=bool)
        endpoints = np.empty((0, system.n))

    return SpatialTransitions(
        num_points=grid.size,
        num_modes=m,
        indptr=indptr,
        targets=targets,
        exit_flags=exits,
        endpoints=endpoints,
        block_exits=exit_policy == "block",
    )


def _prepare(system: SwitchedSystem, eta: float, region: Region, integrator: str,
             flow_error: float) -> Tuple[RegionGrid, float]:
    grid = RegionGrid(Lattice(system.n, float(eta)), region)
    if flow_error < 0:
        raise InvalidInputError(f"Invalid input for flow_error: must be >= 0 (got {flow_error})")
    if integrator == "rk4" and flow_error == 0:
        logger.warning("RK4 flow requested with a zero flow error bound; successors may miss the true endpoint")
    return grid, float(eta) + float(flow_error)


def build_common_abstraction(system: SwitchedSystem, tau_s: float, eta: float, region: Region,
                             threads: Optional[int] = None, integrator: str = "exact",
                             flow_error: float = 0.0, exit_policy: str = "drop") -> CommonSymbolicModel:
    grid, radius = _prepare(system, eta, region, integrator, flow_error)
    logger.info(f"Building common symbolic model: grid {grid.shape}, eta={eta:.6g}, tau_s={tau_s:g}")
    spatial = compute_spatial_transitions(system, tau_s, grid, radius, threads, integrator, exit_policy)
    model = CommonSymbolicModel(grid, spatial, tau_s, float(eta), radius)
    logger.info(f"✓ Common symbolic model built: {model.n_states} states, "
                f"{int(spatial.exit_flags.sum())} exiting (state, mode) pairs")
    return model


def build_dwell_abstraction(system: SwitchedSystem, tau_s: float, N: int, eta: float, region: Region,
                            threads: Optional[int] = None, integrator: str = "exact",
                            flow_error: float = 0.0, exit_policy: str = "drop") -> DwellSymbolicModel:
    if int(N) != N or N < 1:
        raise InvalidInputError(f"Invalid input for N: must be an integer >= 1 (got {N})")
    grid, radius = _prepare(system, eta, region, integrator, flow_error)
    logger.info(f"Building dwell symbolic model: grid {grid.shape}, N={int(N)}, eta={eta:.6g}, tau_s={tau_s:g}")
    spatial = compute_spatial_transitions(system, tau_s, grid, radius, threads, integrator, exit_policy)
    model = DwellSymbolicModel(grid, spatial, tau_s, float(eta), int(N), radius)
    logger.info(f"✓ Dwell symbolic model built: {model.n_states} states")
    return model


def state_count(model: SymbolicModel) -> int:
    return model.n_states


def degree_stats(model: SymbolicModel) -> DegreeStats:
    """Successor counts over the usable (state, label) pairs.

    Every dwell state over a usable (point, mode) pair enables the same number of
    labels per counter, so the spatial counts give the same statistics.
    """
    spatial = model.spatial
    counts = spatial.counts[spatial.usable]
    if counts.size == 0:
        return DegreeStats(min=0, max=0, mean=0.0)
    return DegreeStats(min=int(counts.min()), max=int(counts.max()), mean=float(counts.mean()))
