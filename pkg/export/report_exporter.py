import json
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd

from closedloop.refinement import ClosedLoopTrace
from config.settings import EXPORT_CONFIG
from synthesis.safety import SafetyController
from transys.bisimulation import PairRelation
from utils.error_handlers import ExportError

logger = logging.getLogger(__name__)


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class ReportExporter:
    """Writes controllers, class grids, traces, relations and command reports."""

    def __init__(self, out_dir, float_format: str = None):
        self.out_dir = Path(out_dir)
        self.float_format = float_format or EXPORT_CONFIG["float_format"]

    def _path(self, name: str) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ExportError(f"Could not create {self.out_dir}: {str(e)}") from e
        return self.out_dir / name

    def write_json(self, data: Dict, name: str) -> Path:
        path = self._path(name)
        try:
            path.write_text(json.dumps(data, indent=2, default=_plain), encoding="utf-8")
        except (OSError, TypeError) as e:
            raise ExportError(f"Could not write {path}: {str(e)}") from e
        logger.info(f"Wrote {path}")
        return path

    def write_frame(self, frame: pd.DataFrame, name: str) -> Path:
        path = self._path(name)
        try:
            frame.to_csv(path, index=False, float_format=self.float_format)
        except OSError as e:
            raise ExportError(f"Could not write {path}: {str(e)}") from e
        logger.info(f"Wrote {path} ({len(frame)} rows)")
        return path

    def write_controller(self, controller: SafetyController, name: str = "controller.json") -> Path:
        return self.write_json(controller.to_dict(), name)

    def write_trace(self, trace: ClosedLoopTrace, name: str = "trace.csv") -> Path:
        return self.write_frame(trace.to_frame(), name)

    def write_relation(self, relation: PairRelation, name: str = "relation.csv") -> Path:
        return self.write_frame(relation.to_frame(), name)


def read_controller(path) -> SafetyController:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise ExportError(f"Could not read controller {path}: {str(e)}") from e
    return SafetyController.from_dict(data)
