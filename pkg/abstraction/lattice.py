import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from config.settings import NUMERIC_CONFIG
from dynamics.switched_system import as_finite_array
from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lattice:
    """Points k * 2*eta/sqrt(n), k integer: every x is within eta of one of them."""
    n: int
    eta: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("Invalid input for lattice: dimension must be >= 1")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise InvalidInputError(f"Invalid input for lattice: eta must be > 0 (got {self.eta})")

    @property
    def spacing(self) -> float:
        return 2.0 * self.eta / math.sqrt(self.n)

    def embed(self, keys) -> np.ndarray:
        return np.asarray(keys, dtype=float) * self.spacing

    def quantize_keys(self, X) -> np.ndarray:
        # per-axis nearest node, half-way ties go to the smaller index
        return np.ceil(np.asarray(X, dtype=float) / self.spacing - 0.5).astype(np.int64)

    def window(self, radius: float) -> np.ndarray:
        reach = max(1, int(math.ceil(radius / self.spacing - 1e-12)))
        span = range(-reach, reach + 1)
        return np.array(list(itertools.product(span, repeat=self.n)), dtype=np.int64)


@dataclass(frozen=True)
class LatticePoint:
    k: Tuple[int, ...]

    def embed(self, lattice: Lattice) -> np.ndarray:
        return lattice.embed(self.k)


@dataclass(frozen=True, eq=False)
class Region:
    """Axis-aligned closed box [lo, hi]."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = as_finite_array(self.lo, "region.lo")
        hi = as_finite_array(self.hi, "region.hi", lo.shape)
        if lo.ndim != 1:
            raise InvalidInputError("Invalid input for region: bounds must be vectors")
        if np.any(lo > hi):
            raise InvalidInputError("Invalid input for region: lo must be <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    def contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=-1)

    def interior_contains(self, X, tol: float = 0.0) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X > self.lo + tol) & (X < self.hi - tol), axis=-1)

    def inflate(self, amount: float) -> "Region":
        return Region(self.lo - amount, self.hi + amount)

    def deflate(self, amount: float) -> Optional["Region"]:
        lo, hi = self.lo + amount, self.hi - amount
        if np.any(lo > hi):
            return None
        return Region(lo, hi)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        return cls(np.asarray(data["lo"], float), np.asarray(data["hi"], float))


def quantize(x, lattice: Lattice) -> LatticePoint:
    x = as_finite_array(x, "x", (lattice.n,))
    return LatticePoint(tuple(int(k) for k in lattice.quantize_keys(x)))


def ball_candidates(Y, lattice: Lattice, radius: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Window keys around quantize(Y) and the mask of those within ``radius`` of each row of Y.

    Returns keys of shape (S, W, n) and a boolean mask of shape (S, W); the window
    is ordered lexicographically so selected keys come out sorted per row.
    """
    radius = lattice.eta if radius is None else radius
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    base = lattice.quantize_keys(Y)
    keys = base[:, None, :] + lattice.window(radius)[None, :, :]
    diff = keys * lattice.spacing - Y[:, None, :]
    dist = np.sqrt(np.einsum("swi,swi->sw", diff, diff))
    return keys, dist <= radius + NUMERIC_CONFIG["ball_tol"]


def ball_points(y, lattice: Lattice, radius: Optional[float] = None) -> List[LatticePoint]:
    y = as_finite_array(y, "y", (lattice.n,))
    keys, mask = ball_candidates(y[None, :], lattice, radius)
    return [LatticePoint(tuple(int(k) for k in key)) for key in keys[0][mask[0]]]


class RegionGrid:
    """The lattice points inside a region, numbered row-major over their integer keys."""

    def __init__(self, lattice: Lattice, region: Region):
        if region.n != lattice.n:
            raise InvalidInputError(f"Invalid input for grid: region dimension {region.n} vs lattice {lattice.n}")
        self.lattice = lattice
        self.region = region
        tol = NUMERIC_CONFIG["region_tol"]
        self.k_lo = np.ceil(region.lo / lattice.spacing - tol).astype(np.int64)
        self.k_hi = np.floor(region.hi / lattice.spacing + tol).astype(np.int64)
        self.shape = tuple(int(max(0, s)) for s in self.k_hi - self.k_lo + 1)
        self.size = int(np.prod(self.shape)) if self.shape else 0

    @property
    def n(self) -> int:
        return self.lattice.n

    def keys(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return np.empty(ids.shape + (self.n,), dtype=np.int64)
        offsets = np.stack(np.unravel_index(ids, self.shape), axis=-1)
        return offsets + self.k_lo

    def contains_keys(self, keys) -> np.ndarray:
        keys = np.asarray(keys)
        return np.all((keys >= self.k_lo) & (keys <= self.k_hi), axis=-1)

    def ids(self, keys) -> np.ndarray:
        """Ids of keys; keys outside the grid map to -1."""
        keys = np.asarray(keys, dtype=np.int64)
        if self.size == 0:
            return np.full(keys.shape[:-1], -1, dtype=np.int64)
        inside = self.contains_keys(keys)
        clipped = np.clip(keys, self.k_lo, self.k_hi) - self.k_lo
        flat = np.ravel_multi_index(tuple(np.moveaxis(clipped, -1, 0)), self.shape)
        return np.where(inside, flat, -1)

    def points(self, ids) -> np.ndarray:
        return self.lattice.embed(self.keys(ids))

    def contains_point(self, X) -> np.ndarray:
        return self.region.contains(X, NUMERIC_CONFIG["region_tol"] * self.lattice.spacing)
