import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional, Set, Tuple

import numpy as np
import pandas as pd

from config.settings import ERROR_MESSAGES
from transys.finite_ts import FiniteTS
from utils.error_handlers import LabelMismatchError

logger = logging.getLogger(__name__)


class PairRelation:
    def __init__(self, pairs: Iterable[Tuple[int, int]] = ()):
        self._pairs: Set[Tuple[int, int]] = {(int(a), int(b)) for a, b in pairs}

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (int(a), int(b)) in self._pairs

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(sorted(self._pairs))

    def __len__(self) -> int:
        return len(self._pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, PairRelation) and self._pairs == other._pairs

    def add(self, a: int, b: int):
        self._pairs.add((int(a), int(b)))

    def discard(self, a: int, b: int):
        self._pairs.discard((int(a), int(b)))

    def union(self, other: "PairRelation") -> "PairRelation":
        return PairRelation(self._pairs | other._pairs)

    def issubset(self, other: "PairRelation") -> bool:
        return self._pairs <= other._pairs

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(sorted(self._pairs), columns=["state_a", "state_b"]).astype("int64")

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "PairRelation":
        return cls(zip(*np.nonzero(mask)))


@dataclass
class BisimCheck:
    holds: bool
    violation: Optional[Dict] = None


@dataclass
class BisimVerdict:
    bisimilar: bool
    relation: PairRelation
    reason: str = ""
    details: Dict = field(default_factory=dict)


def _check_labels(ts_a: FiniteTS, ts_b: FiniteTS):
    if ts_a.labels != ts_b.labels:
        raise LabelMismatchError(ERROR_MESSAGES["label_mismatch"].format(left=ts_a.labels, right=ts_b.labels))


def _distance(ts_a: FiniteTS, ts_b: FiniteTS, a: int, b: int) -> float:
    return float(np.linalg.norm(ts_a.outputs[a] - ts_b.outputs[b]))


def _pair_violation(ts_a: FiniteTS, ts_b: FiniteTS, a: int, b: int, epsilon: float,
                    related) -> Optional[Dict]:
    distance = _distance(ts_a, ts_b, a, b)
    if distance > epsilon:
        return {"pair": (a, b), "condition": "output", "distance": distance}

    for label in ts_a.labels:
        post_b = ts_b.post(b, label)
        for a_next in ts_a.post(a, label):
            if not any(related(a_next, b_next) for b_next in post_b):
                return {"pair": (a, b), "condition": "forth", "label": label, "successor": a_next}
        post_a = ts_a.post(a, label)
        for b_next in post_b:
            if not any(related(a_next, b_next) for a_next in post_a):
                return {"pair": (a, b), "condition": "back", "label": label, "successor": b_next}
    return None


def is_approx_bisim(ts_a: FiniteTS, ts_b: FiniteTS, epsilon: float, relation: PairRelation) -> BisimCheck:
    _check_labels(ts_a, ts_b)
    related = lambda x, y: (x, y) in relation
    for a, b in relation:
        violation = _pair_violation(ts_a, ts_b, a, b, epsilon, related)
        if violation is not None:
            return BisimCheck(holds=False, violation=violation)
    return BisimCheck(holds=True)


def max_approx_bisim(ts_a: FiniteTS, ts_b: FiniteTS, epsilon: float) -> PairRelation:
    """Largest epsilon-approximate bisimulation; a removal only re-queues pairs that can step into it."""
    _check_labels(ts_a, ts_b)
    diff = ts_a.outputs[:, None, :] - ts_b.outputs[None, :, :]
    mask = np.sqrt(np.einsum("abi,abi->ab", diff, diff)) <= epsilon
    logger.info(f"Pruning {int(mask.sum())} candidate pairs at epsilon={epsilon:g}")

    related = lambda x, y: bool(mask[x, y])
    queue = deque(zip(*(idx.tolist() for idx in np.nonzero(mask))))
    queued = mask.copy()
    removed = 0

    while queue:
        a, b = queue.popleft()
        queued[a, b] = False
        if not mask[a, b] or _pair_violation(ts_a, ts_b, a, b, epsilon, related) is None:
            continue
        mask[a, b] = False
        removed += 1
        for label in ts_a.labels:
            for a_prev in ts_a.pre(a, label):
                for b_prev in ts_b.pre(b, label):
                    if mask[a_prev, b_prev] and not queued[a_prev, b_prev]:
                        queued[a_prev, b_prev] = True
                        queue.append((a_prev, b_prev))

    relation = PairRelation.from_mask(mask)
    logger.info(f"✓ Maximal relation has {len(relation)} pairs ({removed} removed)")
    return relation


def are_bisimilar(ts_a: FiniteTS, ts_b: FiniteTS, epsilon: float) -> BisimVerdict:
    relation = max_approx_bisim(ts_a, ts_b, epsilon)
    for a in sorted(ts_a.initials):
        if not any((a, b) in relation for b in ts_b.initials):
            return BisimVerdict(False, relation, f"initial state {a} of the first system has no related initial state",
                                {"side": "first", "state": a})
    for b in sorted(ts_b.initials):
        if not any((a, b) in relation for a in ts_a.initials):
            return BisimVerdict(False, relation, f"initial state {b} of the second system has no related initial state",
                                {"side": "second", "state": b})
    return BisimVerdict(True, relation)
