import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from abstraction.builder import build_common_abstraction, build_dwell_abstraction
from abstraction.model import SymbolicModel
from cli.problem_config import ProblemConfig
from closedloop.monitor import MonitorReport, safety_monitor
from closedloop.refinement import ClosedLoopTrace, refine_and_run
from config.settings import ERROR_MESSAGES
from lyapunov.budgets import (
    BoundKind, epsilon_for_eta_common, epsilon_for_eta_dwell, eta_budget_common, eta_budget_dwell,
)
from lyapunov.certificates import CertificateReport, certificate_report, characteristics
from synthesis.safety import SafetyController, lazy_controller, maximal_safety_controller
from transys.relation import RelationCertificate
from utils.error_handlers import BudgetError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Precision:
    kind: BoundKind
    eta: float
    epsilon: float
    eta_max: float

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind.value,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "eta_max": self.eta_max,
            "divisor": self.epsilon / self.eta_max,
        }


def verify_problem(config: ProblemConfig) -> CertificateReport:
    system = config.system.build()
    cert = config.certificates.build()
    tau_d = config.dwell.tau_d if config.dwell else None
    return certificate_report(system, cert, tau_d)


def resolve_precision(config: ProblemConfig) -> Precision:
    """Fill in whichever of eta and epsilon is missing; refuse an eta above its budget."""
    cert = config.certificates.build()
    if not config.is_dwell and not cert.is_common:
        raise ValidationError("A problem without a dwell time needs a single common certificate matrix")
    chars = characteristics(cert)
    tau_s, kappa = config.sampling.tau_s, cert.kappa
    eta, epsilon = config.abstraction.eta, config.abstraction.epsilon

    if config.is_dwell:
        kind = BoundKind.DWELL
        mu, tau_d = cert.interchange(), config.dwell.tau_d
        budget = lambda eps: eta_budget_dwell(eps, tau_s, tau_d, mu, chars, kappa)
        required = lambda e: epsilon_for_eta_dwell(e, tau_s, tau_d, mu, chars, kappa)
    else:
        kind = BoundKind.COMMON
        budget = lambda eps: eta_budget_common(eps, tau_s, chars, kappa)
        required = lambda e: epsilon_for_eta_common(e, tau_s, chars, kappa)

    if epsilon is None:
        epsilon = required(eta)
    eta_max = budget(epsilon)
    if eta is None:
        eta = eta_max
    elif eta > eta_max * (1 + 1e-12):
        raise BudgetError(ERROR_MESSAGES["eta_over_budget"].format(
            eta=eta, kind=kind.value, eta_max=eta_max, epsilon=epsilon))

    precision = Precision(kind=kind, eta=float(eta), epsilon=float(epsilon), eta_max=float(eta_max))
    logger.info(f"Precision: eta={precision.eta:.6g}, epsilon={precision.epsilon:.6g} "
                f"(budget eta <= epsilon/{precision.epsilon / precision.eta_max:.2f})")
    return precision


def build_model(config: ProblemConfig, precision: Precision, threads: Optional[int] = None) -> SymbolicModel:
    system = config.system.build()
    region = config.abstraction.region_box()
    if config.is_dwell:
        return build_dwell_abstraction(system, config.sampling.tau_s, config.dwell_steps, precision.eta,
                                       region, threads=threads,
                                       exit_policy=config.abstraction.exit_policy)
    return build_common_abstraction(system, config.sampling.tau_s, precision.eta, region, threads=threads,
                                    exit_policy=config.abstraction.exit_policy)


def synthesize(config: ProblemConfig, model: SymbolicModel) -> SafetyController:
    return maximal_safety_controller(model, config.spec.build())


def relation_for(config: ProblemConfig, model: SymbolicModel, precision: Precision) -> RelationCertificate:
    return RelationCertificate.for_model(model, config.certificates.build(), precision.epsilon)


def simulate(config: ProblemConfig, model: SymbolicModel, controller: SafetyController,
             precision: Precision) -> Tuple[ClosedLoopTrace, MonitorReport]:
    if config.simulation.x0 is None:
        raise ValidationError("Problem configuration has no 'simulation.x0'")
    if controller.n_states != model.n_states or controller.num_modes != model.num_modes:
        raise ValidationError(
            f"Controller covers {controller.n_states} states x {controller.num_modes} modes, "
            f"model has {model.n_states} x {model.num_modes}")

    system = config.system.build()
    trace = refine_and_run(system, model, lazy_controller(controller), controller, config.simulation.x0,
                           config.simulation.horizon, relation_for(config, model, precision),
                           initial_mode=config.simulation.initial_mode)
    report = safety_monitor(trace, config.spec.build(), precision.epsilon, system=system)
    return trace, report
