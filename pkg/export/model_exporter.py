import json
import logging
from pathlib import Path
from typing import Dict, Tuple

import pandas as pd

from abstraction.model import ModelKind, SymbolicModel
from config.settings import EXPORT_CONFIG
from utils.error_handlers import ExportError

logger = logging.getLogger(__name__)

STATES_FILE = "states.csv"
TRANSITIONS_FILE = "transitions.csv"
META_FILE = "model.json"
DOT_FILE = "model.dot"


class ModelExporter:
    """Writes a symbolic model as a state table, a transition table and, when small, a DOT graph."""

    def __init__(self, float_format: str = None, max_dot_states: int = None):
        self.float_format = float_format or EXPORT_CONFIG["float_format"]
        self.max_dot_states = EXPORT_CONFIG["max_dot_states"] if max_dot_states is None else max_dot_states

    def export(self, model: SymbolicModel, out_dir) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            files = {
                "states": self._write_states(model, out_dir / STATES_FILE),
                "transitions": self._write_transitions(model, out_dir / TRANSITIONS_FILE),
                "meta": self._write_meta(model, out_dir / META_FILE),
            }
            if model.n_states <= self.max_dot_states:
                files["dot"] = self._write_dot(model, out_dir / DOT_FILE)
            else:
                logger.info(f"Skipping DOT export: {model.n_states} states exceed {self.max_dot_states}")
        except OSError as e:
            raise ExportError(f"Could not write model files to {out_dir}: {str(e)}") from e
        logger.info(f"✓ Model exported to {out_dir}")
        return files

    def _write_states(self, model: SymbolicModel, path: Path) -> Path:
        chunk = EXPORT_CONFIG["csv_chunk_rows"]
        for start in range(0, max(model.n_states, 1), chunk):
            ids = range(start, min(start + chunk, model.n_states))
            model.state_table(ids).to_csv(path, mode="w" if start == 0 else "a", header=start == 0,
                                          index=False, float_format=self.float_format)
        return path

    def _write_transitions(self, model: SymbolicModel, path: Path) -> Path:
        pd.DataFrame(columns=["src", "label", "dst"]).to_csv(path, index=False)
        written = 0
        for src, label, dst in model.transition_blocks(EXPORT_CONFIG["csv_chunk_rows"]):
            pd.DataFrame({"src": src, "label": label, "dst": dst}).to_csv(path, mode="a", header=False, index=False)
            written += len(src)
        logger.info(f"Wrote {written} transitions")
        return path

    def _write_meta(self, model: SymbolicModel, path: Path) -> Path:
        meta = {
            "kind": model.kind.value,
            "n_states": model.n_states,
            "labels": list(model.labels),
            "eta": model.eta,
            "tau_s": model.tau_s,
            "grid_shape": list(model.grid.shape),
            "region": model.grid.region.to_dict(),
            "exit_policy": "block" if model.spatial.block_exits else "drop",
        }
        if model.kind is ModelKind.DWELL:
            meta["dwell_steps"] = model.dwell_steps
        path.write_text(json.dumps(meta, indent=2), encoding="utf-8")
        return path

    def _write_dot(self, model: SymbolicModel, path: Path) -> Path:
        table = model.state_table()
        lines = ["digraph symbolic_model {", "    rankdir = LR;"]
        for row in table.itertuples(index=False):
            coords = ", ".join(f"{getattr(row, f'x{i + 1}'):.4g}" for i in range(model.grid.n))
            suffix = f" p{row.mode} i{row.counter}" if model.kind is ModelKind.DWELL else ""
            shape = "doublecircle" if row.initial else "circle"
            lines.append(f'    {row.id} [label="({coords}){suffix}", shape={shape}];')
        for src, label, dst in model.transition_blocks():
            for s, l, d in zip(src.tolist(), label.tolist(), dst.tolist()):
                lines.append(f'    {s} -> {d} [label="{l}"];')
        lines.append("}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def read_model_tables(model_dir) -> Tuple[pd.DataFrame, pd.DataFrame, Dict]:
    """Load the tables written by ModelExporter."""
    model_dir = Path(model_dir)
    try:
        states = pd.read_csv(model_dir / STATES_FILE)
        transitions = pd.read_csv(model_dir / TRANSITIONS_FILE)
        meta_path = model_dir / META_FILE
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    except (OSError, ValueError) as e:
        raise ExportError(f"Could not read model files from {model_dir}: {str(e)}") from e
    return states, transitions, meta
