import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from abstraction.lattice import Region
from config.settings import BUNDLED_PROBLEMS
from dynamics.switched_system import SwitchedSystem
from lyapunov.certificates import QuadraticCertificateSet
from synthesis.safety import SafetySpec
from utils.error_handlers import ValidationError
from utils.validators import validate_problem_document

logger = logging.getLogger(__name__)


@dataclass
class SystemConfig:
    n: int
    modes: List[Dict]

    def build(self) -> SwitchedSystem:
        return SwitchedSystem.from_matrices([m["A"] for m in self.modes], [m["b"] for m in self.modes])


@dataclass
class CertificateConfig:
    M: List[List[List[float]]]
    kappa: float
    mu: Optional[float] = None

    def build(self) -> QuadraticCertificateSet:
        return QuadraticCertificateSet(M=self.M, kappa=self.kappa, mu=self.mu)


@dataclass
class SamplingConfig:
    tau_s: float


@dataclass
class AbstractionConfig:
    region: Dict
    eta: Optional[float] = None
    epsilon: Optional[float] = None
    exit_policy: str = "drop"

    def region_box(self) -> Region:
        return Region.from_dict(self.region)


@dataclass
class DwellConfig:
    tau_d: float


@dataclass
class SpecConfig:
    keep: Dict
    avoid: Optional[Dict] = None

    def build(self) -> SafetySpec:
        avoid = Region.from_dict(self.avoid) if self.avoid else None
        return SafetySpec(keep=Region.from_dict(self.keep), avoid=avoid)


@dataclass
class SimulationConfig:
    x0: Optional[List[float]] = None
    horizon: int = 0
    initial_mode: Optional[int] = None


@dataclass
class ProblemConfig:
    """One experiment: dynamics, certificates, precision, safety spec and closed-loop run.

    Units follow the state of the system as written in ``system``; matrices are row-major.
    """
    system: SystemConfig
    certificates: CertificateConfig
    sampling: SamplingConfig
    abstraction: AbstractionConfig
    spec: SpecConfig
    dwell: Optional[DwellConfig] = None
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    name: str = "problem"
    scale: str = "desk"
    description: str = ""

    @property
    def is_dwell(self) -> bool:
        return self.dwell is not None

    @property
    def dwell_steps(self) -> int:
        return int(round(self.dwell.tau_d / self.sampling.tau_s)) if self.dwell else 1

    @classmethod
    def from_dict(cls, doc: Dict) -> "ProblemConfig":
        ok, message = validate_problem_document(doc)
        if not ok:
            raise ValidationError(f"Invalid problem configuration: {message}")
        dwell = doc.get("dwell") or {}
        simulation = doc.get("simulation") or {}
        try:
            return cls._from_sections(doc, dwell, simulation)
        except TypeError as e:
            raise ValidationError(f"Invalid problem configuration: {str(e)}") from e

    @classmethod
    def _from_sections(cls, doc: Dict, dwell: Dict, simulation: Dict) -> "ProblemConfig":
        return cls(
            system=SystemConfig(n=doc["system"]["n"], modes=doc["system"]["modes"]),
            certificates=CertificateConfig(**doc["certificates"]),
            sampling=SamplingConfig(tau_s=doc["sampling"]["tau_s"]),
            abstraction=AbstractionConfig(**doc["abstraction"]),
            spec=SpecConfig(keep=doc["spec"]["keep"], avoid=doc["spec"].get("avoid")),
            dwell=DwellConfig(tau_d=dwell["tau_d"]) if dwell.get("tau_d") is not None else None,
            simulation=SimulationConfig(**simulation),
            name=doc.get("name", "problem"),
            scale=doc.get("scale", "desk"),
            description=doc.get("description", ""),
        )

    def to_dict(self) -> Dict:
        doc = asdict(self)
        if doc["dwell"] is None:
            del doc["dwell"]
        if doc["spec"]["avoid"] is None:
            del doc["spec"]["avoid"]
        return doc

    def with_overrides(self, eta: Optional[float] = None, epsilon: Optional[float] = None) -> "ProblemConfig":
        updated = copy.deepcopy(self)
        if eta is not None:
            updated.abstraction.eta = float(eta)
        if epsilon is not None:
            updated.abstraction.epsilon = float(epsilon)
        return updated

    @classmethod
    def load(cls, path_or_name) -> "ProblemConfig":
        """Read a JSON problem file; bundled problems may be named directly (e.g. ``boost_fine``)."""
        path = BUNDLED_PROBLEMS.get(str(path_or_name), Path(path_or_name))
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise ValidationError(f"Cannot read problem configuration {path}: {str(e)}") from e
        except ValueError as e:
            raise ValidationError(f"Problem configuration {path} is not valid JSON: {str(e)}") from e
        config = cls.from_dict(doc)
        logger.info(f"Loaded problem '{config.name}' ({config.scale} scale) from {path}")
        return config

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path
