import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from config.settings import ERROR_MESSAGES
from lyapunov.certificates import CertCharacteristics
from utils.error_handlers import DwellTimeError, InvalidInputError
from utils.validators import validate_dwell_multiple

logger = logging.getLogger(__name__)


def min_dwell_time(mu: float, kappa: float) -> float:
    if mu < 1 or kappa <= 0:
        raise InvalidInputError(f"Invalid input for dwell bound: mu={mu}, kappa={kappa}")
    return math.log(mu) / kappa


def _check_dwell(tau_s: float, tau_d: float, mu: float, kappa: float):
    bound = min_dwell_time(mu, kappa)
    if tau_d <= bound:
        raise DwellTimeError(ERROR_MESSAGES["dwell_too_small"].format(tau_d=tau_d, bound=bound))
    ok, _ = validate_dwell_multiple(tau_d, tau_s)
    if not ok:
        raise DwellTimeError(ERROR_MESSAGES["dwell_not_multiple"].format(tau_d=tau_d, tau_s=tau_s))


def dwell_factor(tau_d: float, mu: float, kappa: float) -> float:
    """(1/mu - e^{-kappa tau_d}) / (1 - e^{-kappa tau_d}); equals 1 when mu = 1."""
    decay = math.exp(-kappa * tau_d)
    return (1.0 / mu - decay) / (1.0 - decay)


def _common_ratios(tau_s: float, chars: CertCharacteristics, kappa: float):
    contraction = (1.0 - math.exp(-kappa * tau_s)) * chars.a_lower / chars.g
    sandwich = chars.a_lower / chars.a_upper
    return contraction, sandwich


def eta_budget_common(epsilon: float, tau_s: float, chars: CertCharacteristics, kappa: float) -> float:
    if epsilon <= 0 or tau_s <= 0:
        raise InvalidInputError(f"Invalid input for budget: epsilon={epsilon}, tau_s={tau_s}")
    contraction, sandwich = _common_ratios(tau_s, chars, kappa)
    return min(contraction, sandwich) * epsilon


def eta_budget_dwell(epsilon: float, tau_s: float, tau_d: float, mu: float,
                     chars: CertCharacteristics, kappa: float) -> float:
    if epsilon <= 0 or tau_s <= 0:
        raise InvalidInputError(f"Invalid input for budget: epsilon={epsilon}, tau_s={tau_s}")
    _check_dwell(tau_s, tau_d, mu, kappa)
    contraction, sandwich = _common_ratios(tau_s, chars, kappa)
    return min(dwell_factor(tau_d, mu, kappa) * contraction, sandwich) * epsilon


def epsilon_for_eta_common(eta: float, tau_s: float, chars: CertCharacteristics, kappa: float) -> float:
    """Smallest epsilon whose common budget admits ``eta``."""
    contraction, sandwich = _common_ratios(tau_s, chars, kappa)
    return eta / min(contraction, sandwich)


def epsilon_for_eta_dwell(eta: float, tau_s: float, tau_d: float, mu: float,
                          chars: CertCharacteristics, kappa: float) -> float:
    _check_dwell(tau_s, tau_d, mu, kappa)
    contraction, sandwich = _common_ratios(tau_s, chars, kappa)
    return eta / min(dwell_factor(tau_d, mu, kappa) * contraction, sandwich)


class BoundKind(Enum):
    COMMON = "common"
    DWELL = "dwell"


@dataclass(frozen=True)
class KLBound:
    kind: BoundKind
    a_lower: float
    a_upper: float
    kappa: float
    mu: float = 1.0
    tau_d: Optional[float] = None

    def __post_init__(self):
        if self.kind is BoundKind.DWELL:
            if self.tau_d is None or self.tau_d <= 0:
                raise InvalidInputError("Invalid input for KL bound: dwell kind needs tau_d > 0")
            if self.rate >= 0:
                raise DwellTimeError(
                    ERROR_MESSAGES["dwell_too_small"].format(
                        tau_d=self.tau_d, bound=min_dwell_time(self.mu, self.kappa))
                )

    @property
    def rate(self) -> float:
        if self.kind is BoundKind.COMMON:
            return -self.kappa
        return math.log(self.mu) / self.tau_d - self.kappa


def kl_bound(bound: KLBound, r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(r < 0) or np.any(s < 0):
        raise InvalidInputError("Invalid input for KL bound: r and s must be >= 0")
    value = (bound.a_upper / bound.a_lower) * r * np.exp(bound.rate * s)
    return float(value) if np.ndim(value) == 0 else value
