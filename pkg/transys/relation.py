import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from abstraction.lattice import Lattice
from abstraction.model import ModelKind, SymbolicModel, SymbolicState
from config.settings import NUMERIC_CONFIG
from dynamics.flow import affine_step_map
from dynamics.switched_system import SwitchedSystem
from lyapunov.budgets import BoundKind
from lyapunov.certificates import QuadraticCertificateSet, characteristics, v_eval
from utils.error_handlers import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class RelationCertificate:
    """Level sets of the certificate relating concrete states to symbolic states, one per dwell counter."""
    cert: QuadraticCertificateSet
    kind: BoundKind
    epsilon: float
    eta: float
    tau_s: float
    dwell_steps: int = 1
    mu: Optional[float] = None
    levels: List[float] = field(init=False)

    def __post_init__(self):
        if self.epsilon <= 0 or self.eta <= 0 or self.tau_s <= 0:
            raise InvalidInputError(
                f"Invalid input for relation: epsilon={self.epsilon}, eta={self.eta}, tau_s={self.tau_s}")
        chars = characteristics(self.cert)
        self.a_lower, self.g = chars.a_lower, chars.g
        if self.mu is None:
            self.mu = self.cert.interchange()
        self.decay = math.exp(-self.cert.kappa * self.tau_s)

        delta = self.a_lower * self.epsilon
        self.levels = [delta]
        if self.kind is BoundKind.DWELL:
            for _ in range(self.dwell_steps):
                delta = self.decay * delta + self.g * self.eta
                self.levels.append(delta)

    @property
    def base_level(self) -> float:
        return self.levels[0]

    def level(self, counter: Optional[int] = 0) -> float:
        if self.kind is BoundKind.COMMON or counter is None:
            return self.levels[0]
        return self.levels[int(counter)]

    def closed_form(self, i: int) -> float:
        decay_i = self.decay ** i
        return decay_i * self.levels[0] + self.g * self.eta * (1.0 - decay_i) / (1.0 - self.decay)

    def invariants_hold(self, tol: float = 1e-12) -> bool:
        """Levels never increase and the last one survives a mode interchange."""
        if self.kind is BoundKind.COMMON:
            return self.g * self.eta <= (1.0 - self.decay) * self.levels[0] + tol
        monotone = all(b <= a + tol for a, b in zip(self.levels, self.levels[1:]))
        return monotone and self.levels[-1] <= self.levels[0] / self.mu + tol

    def value(self, x, point, mode: Optional[int] = None) -> np.ndarray:
        M = self.cert.matrix_for(mode if mode else 1)
        return v_eval(M, x, point)

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "a_lower": self.a_lower,
            "g": self.g,
            "mu": self.mu,
            "levels": list(self.levels),
        }

    @classmethod
    def for_model(cls, model: SymbolicModel, cert: QuadraticCertificateSet, epsilon: float,
                  mu: Optional[float] = None) -> "RelationCertificate":
        if model.kind is ModelKind.DWELL:
            return cls(cert, BoundKind.DWELL, epsilon, model.eta, model.tau_s, model.dwell_steps, mu)
        return cls(cert, BoundKind.COMMON, epsilon, model.eta, model.tau_s, mu=mu)


def relation_member(relation: RelationCertificate, x, state: SymbolicState) -> bool:
    point = Lattice(relation.cert.n, relation.eta).embed(state.point.k)
    value = relation.value(x, point, state.mode)
    level = relation.level(state.counter)
    return bool(value <= level * (1.0 + NUMERIC_CONFIG["relation_rel_tol"]))


@dataclass
class ClosureReport:
    checked_pairs: int = 0
    checked_transitions: int = 0
    forth_violations: List[Dict] = field(default_factory=list)
    back_violations: List[Dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.forth_violations and not self.back_violations

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "checked_pairs": self.checked_pairs,
            "checked_transitions": self.checked_transitions,
            "forth_violations": len(self.forth_violations),
            "back_violations": len(self.back_violations),
            "first_violation": (self.forth_violations + self.back_violations or [None])[0],
        }


def _related_sample(relation: RelationCertificate, centre: np.ndarray, mode: Optional[int],
                    level: float, rng: np.random.Generator) -> np.ndarray:
    direction = rng.standard_normal(centre.size)
    norm = np.linalg.norm(direction)
    if norm == 0:
        return centre.copy()
    direction /= norm
    scale = level * rng.uniform() ** (1.0 / centre.size)
    v_unit = relation.value(direction, np.zeros_like(direction), mode)
    return centre + direction * scale / v_unit


def check_relation_closure(system: SwitchedSystem, model: SymbolicModel, relation: RelationCertificate,
                           samples: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                           exact_centres: bool = False) -> ClosureReport:
    """Sample related pairs and test one step of both transfer directions."""
    samples = NUMERIC_CONFIG["closure_samples"] if samples is None else int(samples)
    rng = np.random.default_rng(0) if rng is None else rng
    rel_tol = NUMERIC_CONFIG["relation_rel_tol"]
    report = ClosureReport()

    enabled = model.enabled_matrix()
    candidates = np.flatnonzero(enabled.any(axis=1))
    if candidates.size == 0 or samples == 0:
        logger.warning("No usable symbolic state to sample for the closure check")
        return report

    step_maps = {p: affine_step_map(system.mode(p), model.tau_s) for p in system.mode_ids}
    chosen = rng.choice(candidates, size=samples, replace=True)
    _, modes, counters = model.decode(chosen)

    for state, mode, counter in zip(chosen.tolist(), modes.tolist(), counters.tolist()):
        mode = mode or None
        counter = counter if model.kind is ModelKind.DWELL else None
        centre = model.output(state)
        level = relation.level(counter)
        x = centre.copy() if exact_centres else _related_sample(relation, centre, mode, level, rng)
        report.checked_pairs += 1

        for label in np.flatnonzero(enabled[state]) + 1:
            label = int(label)
            Phi, c = step_maps[model.flow_mode(state, label)]
            x_next = Phi @ x + c
            succ = model.successors(state, label)
            report.checked_transitions += 1

            _, _, succ_counters = model.decode(succ)
            succ_mode = label if model.kind is ModelKind.DWELL else None
            values = relation.value(x_next, model.outputs(succ), succ_mode)
            if model.kind is ModelKind.DWELL:
                levels = np.asarray(relation.levels)[succ_counters]
            else:
                levels = np.full(succ.size, relation.base_level)
            ok = np.atleast_1d(values) <= levels * (1.0 + rel_tol)

            if not ok.any():
                report.forth_violations.append({"state": state, "label": label, "x": x.tolist()})
            if not ok.all():
                bad = int(succ[np.argmin(ok)])
                report.back_violations.append({"state": state, "label": label, "successor": bad,
                                               "x": x.tolist()})

    logger.info(f"✓ Closure check: {report.checked_pairs} pairs, {report.checked_transitions} transitions, "
                f"{len(report.forth_violations)} forth / {len(report.back_violations)} back violations")
    return report
