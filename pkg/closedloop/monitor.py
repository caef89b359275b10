import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from closedloop.refinement import ClosedLoopTrace
from config.settings import EXPORT_CONFIG, NUMERIC_CONFIG
from dynamics.flow import dense_trajectory
from dynamics.switched_system import SampledSwitchingSignal, SwitchedSystem
from synthesis.safety import SafetySpec

logger = logging.getLogger(__name__)


@dataclass
class MonitorReport:
    passed: bool
    checked_samples: int
    epsilon: float
    first_violation: Optional[Dict] = None
    dense_samples: int = 0
    dense_excursions: int = 0

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "checked_samples": self.checked_samples,
            "epsilon": self.epsilon,
            "first_violation": self.first_violation,
            "dense_samples": self.dense_samples,
            "dense_excursions": self.dense_excursions,
        }


def _violations(spec: SafetySpec, epsilon: float, X: np.ndarray):
    keep = spec.keep.inflate(epsilon)
    outside = ~keep.contains(X, NUMERIC_CONFIG["safety_tol"])
    inside_avoid = np.zeros(len(X), dtype=bool)
    if spec.avoid is not None:
        shrunk = spec.avoid.deflate(epsilon)
        if shrunk is not None:
            inside_avoid = shrunk.contains(X)
    return outside, inside_avoid


def safety_monitor(trace: ClosedLoopTrace, spec: SafetySpec, epsilon: float,
                   system: Optional[SwitchedSystem] = None,
                   dense_substeps: Optional[int] = None) -> MonitorReport:
    """Check every sample against keep grown by epsilon and avoid shrunk by epsilon.

    With ``system`` the trajectory is also resampled between sampling instants;
    excursions found there are counted but do not fail the monitor.
    """
    outside, inside_avoid = _violations(spec, epsilon, trace.states)
    bad = np.flatnonzero(outside | inside_avoid)

    report = MonitorReport(passed=bad.size == 0, checked_samples=len(trace.states), epsilon=epsilon)
    if bad.size:
        k = int(bad[0])
        report.first_violation = {
            "step": k,
            "t": float(trace.times[k]),
            "x": trace.states[k].tolist(),
            "kind": "left keep set" if outside[k] else "entered avoid set",
        }
        logger.warning(f"Monitor violation at step {k}: {report.first_violation['kind']}")

    if system is not None and trace.horizon > 0:
        substeps = EXPORT_CONFIG["dense_substeps"] if dense_substeps is None else dense_substeps
        signal = SampledSwitchingSignal(sequence=[int(p) for p in trace.modes], tau_s=trace.tau_s)
        dense = dense_trajectory(system, trace.states[0], signal, substeps)
        dense_out, dense_avoid = _violations(spec, epsilon, dense.states)
        report.dense_samples = len(dense.states)
        report.dense_excursions = int(np.sum(dense_out | dense_avoid))
        if report.dense_excursions:
            logger.info(f"{report.dense_excursions} inter-sample excursions (informative only)")

    if report.passed:
        logger.info(f"✓ Monitor passed on {report.checked_samples} samples")
    return report
