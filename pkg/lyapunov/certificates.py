import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, eigvalsh, solve_triangular

from config.settings import ERROR_MESSAGES, NUMERIC_CONFIG
from dynamics.switched_system import SwitchedSystem
from utils.error_handlers import CertificateError, InvalidInputError

logger = logging.getLogger(__name__)


def _cholesky_lower(M: np.ndarray, mode: int = 0) -> np.ndarray:
    try:
        return cholesky(M, lower=True)
    except LinAlgError as e:
        raise CertificateError(ERROR_MESSAGES["certificate_invalid"].format(mode=mode)) from e


@dataclass(frozen=True, eq=False)
class QuadraticCertificateSet:
    """Matrices M_p of V_p(x, y) = sqrt((x-y)' M_p (x-y)), one shared or one per mode."""
    M: List[np.ndarray]
    kappa: float
    mu: Optional[float] = None

    def __post_init__(self):
        if not self.M:
            raise CertificateError("At least one certificate matrix is required")
        matrices = []
        tol = NUMERIC_CONFIG["symmetry_tol"]
        for idx, raw in enumerate(self.M, start=1):
            M = np.asarray(raw, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
                raise CertificateError(f"Certificate for mode {idx} must be a finite square matrix")
            if np.max(np.abs(M - M.T)) > tol * max(1.0, np.max(np.abs(M))):
                raise CertificateError(f"Certificate for mode {idx} is not symmetric")
            M = 0.5 * (M + M.T)
            if eigvalsh(M)[0] <= 0:
                raise CertificateError(ERROR_MESSAGES["certificate_invalid"].format(mode=idx))
            matrices.append(M)
        object.__setattr__(self, "M", matrices)

        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise CertificateError(f"kappa must be > 0 (got {self.kappa})")
        if self.mu is not None and not self.mu >= 1:
            raise CertificateError(f"mu must be >= 1 (got {self.mu})")

    @property
    def n(self) -> int:
        return self.M[0].shape[0]

    @property
    def is_common(self) -> bool:
        return len(self.M) == 1

    def matrix_for(self, mode: int) -> np.ndarray:
        if self.is_common:
            return self.M[0]
        return self.M[mode - 1]

    def interchange(self) -> float:
        return self.mu if self.mu is not None else compute_mu(self)


@dataclass(frozen=True)
class CertCharacteristics:
    """Linear K-infinity coefficients: lower a_lower*s, upper a_upper*s, Lipschitz g*s."""
    a_lower: float
    a_upper: float
    g: float


@dataclass
class CertificateCheck:
    valid: bool
    margin: float
    mode: Optional[int] = None


def verify_mode_certificate(A, M, kappa: float, tol: float = None) -> CertificateCheck:
    """Check A'M + MA + 2 kappa M <= 0 through its congruence by the Cholesky factor of M."""
    tol = NUMERIC_CONFIG["certificate_tol"] if tol is None else tol
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    if A.shape != M.shape:
        raise InvalidInputError(f"Invalid input for certificate: A is {A.shape}, M is {M.shape}")

    L = _cholesky_lower(M)
    Q = A.T @ M + M @ A + 2.0 * kappa * M
    C = solve_triangular(L, Q, lower=True)
    C = solve_triangular(L, C.T, lower=True).T
    margin = float(eigvalsh(0.5 * (C + C.T))[-1])
    return CertificateCheck(valid=margin <= tol, margin=margin)


def characteristics(cert: QuadraticCertificateSet) -> CertCharacteristics:
    lows = [eigvalsh(M)[0] for M in cert.M]
    highs = [eigvalsh(M)[-1] for M in cert.M]
    a_upper = float(np.sqrt(max(highs)))
    return CertCharacteristics(
        a_lower=float(np.sqrt(min(lows))),
        a_upper=a_upper,
        g=a_upper,
    )


def compute_mu(cert: QuadraticCertificateSet) -> float:
    """Smallest mu with M_p <= mu^2 M_q for every ordered pair of modes."""
    worst = 1.0
    for M_p in cert.M:
        for M_q in cert.M:
            # generalized eigenvalues of (M_p, M_q) are those of L_q^-1 M_p L_q^-T
            worst = max(worst, float(eigh(M_p, M_q, eigvals_only=True)[-1]))
    return float(np.sqrt(worst))


def v_eval(M, x, y) -> np.ndarray:
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    M = np.asarray(M, dtype=float)
    if d.shape[-1] != M.shape[0]:
        raise InvalidInputError(f"Invalid input for v_eval: dimension {d.shape[-1]} vs {M.shape[0]}")
    quad = np.einsum("...i,ij,...j->...", d, M, d)
    value = np.sqrt(np.maximum(quad, 0.0))
    return float(value) if np.ndim(value) == 0 else value


@dataclass
class CertificateReport:
    checks: List[CertificateCheck]
    characteristics: CertCharacteristics
    kappa: float
    mu: float
    min_dwell: float
    tau_d: Optional[float] = None
    extra: Dict = field(default_factory=dict)

    @property
    def all_valid(self) -> bool:
        return all(check.valid for check in self.checks)

    @property
    def dwell_ok(self) -> Optional[bool]:
        if self.tau_d is None:
            return None
        return self.tau_d > self.min_dwell

    @property
    def passed(self) -> bool:
        return self.all_valid and self.dwell_ok is not False

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "modes": [{"mode": c.mode, "valid": c.valid, "margin": c.margin} for c in self.checks],
            "a_lower": self.characteristics.a_lower,
            "a_upper": self.characteristics.a_upper,
            "g": self.characteristics.g,
            "kappa": self.kappa,
            "mu": self.mu,
            "min_dwell_time": self.min_dwell,
            "tau_d": self.tau_d,
            "dwell_ok": self.dwell_ok,
        }


def certificate_report(system: SwitchedSystem, cert: QuadraticCertificateSet,
                       tau_d: Optional[float] = None) -> CertificateReport:
    from lyapunov.budgets import min_dwell_time

    if cert.n != system.n:
        raise InvalidInputError(f"Invalid input for certificate: dimension {cert.n} vs system {system.n}")
    if not cert.is_common and len(cert.M) != system.num_modes:
        raise InvalidInputError(
            f"Invalid input for certificate: {len(cert.M)} matrices for {system.num_modes} modes"
        )

    checks = []
    for p in system.mode_ids:
        check = verify_mode_certificate(system.mode(p).A, cert.matrix_for(p), cert.kappa)
        check.mode = p
        checks.append(check)
        status = "✓" if check.valid else "✗"
        logger.info(f"{status} Mode {p}: certificate margin {check.margin:.3e}")

    mu = cert.interchange()
    return CertificateReport(
        checks=checks,
        characteristics=characteristics(cert),
        kappa=cert.kappa,
        mu=mu,
        min_dwell=min_dwell_time(mu, cert.kappa),
        tau_d=tau_d,
    )
