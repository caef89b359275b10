import logging
from collections import defaultdict
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


class FiniteTS:
    """Finite transition system with vector outputs; a missing (state, label) key means blocked."""

    def __init__(self, outputs, labels: Sequence[int], transitions: Dict[Tuple[int, int], Iterable[int]],
                 initials: Optional[Iterable[int]] = None):
        self.outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        if self.outputs.size == 0:
            self.outputs = self.outputs.reshape(0, max(1, self.outputs.shape[-1]))
        if not np.all(np.isfinite(self.outputs)):
            raise InvalidInputError("Invalid input for transition system: outputs must be finite")
        self.labels = tuple(sorted(set(int(label) for label in labels)))

        self.transitions: Dict[Tuple[int, int], Tuple[int, ...]] = {}
        self._predecessors: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for (src, label), targets in transitions.items():
            targets = tuple(sorted(set(int(t) for t in targets)))
            if not targets:
                continue
            self._check_state(src)
            if int(label) not in self.labels:
                raise InvalidInputError(f"Invalid input for transition system: unknown label {label}")
            for t in targets:
                self._check_state(t)
                self._predecessors[(t, int(label))].append(int(src))
            self.transitions[(int(src), int(label))] = targets

        initials = range(self.n_states) if initials is None else initials
        self.initials = frozenset(int(s) for s in initials)
        for s in self.initials:
            self._check_state(s)

    @property
    def n_states(self) -> int:
        return self.outputs.shape[0]

    @property
    def n_transitions(self) -> int:
        return sum(len(t) for t in self.transitions.values())

    def _check_state(self, s: int):
        if not 0 <= int(s) < self.n_states:
            raise InvalidInputError(f"Invalid input for transition system: state {s} out of range")

    def post(self, state: int, label: int) -> Tuple[int, ...]:
        return self.transitions.get((int(state), int(label)), ())

    def pre(self, state: int, label: int) -> List[int]:
        return self._predecessors.get((int(state), int(label)), [])

    def edges(self) -> Iterator[Tuple[int, int, int]]:
        for (src, label), targets in sorted(self.transitions.items()):
            for dst in targets:
                yield src, label, dst

    @classmethod
    def from_symbolic_model(cls, model) -> "FiniteTS":
        transitions: Dict[Tuple[int, int], set] = defaultdict(set)
        for src, label, dst in model.transition_blocks():
            for s, l, d in zip(src.tolist(), label.tolist(), dst.tolist()):
                transitions[(s, l)].add(d)
        initials = np.flatnonzero(model.initial_mask())
        logger.info(f"Symbolic model read as a transition system: {model.n_states} states, "
                    f"{sum(len(t) for t in transitions.values())} transitions")
        return cls(model.outputs(np.arange(model.n_states)), model.labels, transitions, initials)

    @classmethod
    def from_tables(cls, states: pd.DataFrame, transitions: pd.DataFrame,
                    labels: Optional[Sequence[int]] = None) -> "FiniteTS":
        states = states.sort_values("id").reset_index(drop=True)
        if not np.array_equal(states["id"].to_numpy(), np.arange(len(states))):
            raise InvalidInputError("Invalid input for state table: ids must be 0..n-1")
        output_columns = sorted((c for c in states.columns if c.startswith("x") and c[1:].isdigit()),
                                key=lambda c: int(c[1:]))
        if not output_columns:
            raise InvalidInputError("Invalid input for state table: no output columns x1..xn")
        outputs = states[output_columns].to_numpy(dtype=float)

        grouped: Dict[Tuple[int, int], List[int]] = defaultdict(list)
        for src, label, dst in transitions[["src", "label", "dst"]].itertuples(index=False):
            grouped[(int(src), int(label))].append(int(dst))
        if labels is None:
            labels = sorted(set(int(label) for label in transitions["label"])) if len(transitions) else []

        initials = None
        if "initial" in states.columns:
            initials = states.loc[states["initial"].astype(bool), "id"].tolist()
        return cls(outputs, labels, grouped, initials)
