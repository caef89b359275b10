import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent
PROBLEMS_DIR = BASE_DIR / "config" / "problems"
OUTPUT_DIR = Path(os.getenv("SYMCTRL_OUTPUT_DIR", str(BASE_DIR / "outputs")))

LOG_LEVEL = os.getenv("SYMCTRL_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

THREADS = int(os.getenv("SYMCTRL_THREADS", "1"))
CHUNK_SIZE = int(os.getenv("SYMCTRL_CHUNK_SIZE", "20000"))
SHOW_PROGRESS = os.getenv("SYMCTRL_SHOW_PROGRESS", "True").lower() == "true"

NUMERIC_CONFIG = {
    "certificate_tol": 1e-9,
    "symmetry_tol": 1e-12,
    "region_tol": 1e-9,       # in lattice spacing units
    "ball_tol": 1e-12,        # absolute, state units
    "safety_tol": 1e-9,       # absolute, state units
    "relation_rel_tol": 1e-9,
    "rk4_substeps": 64,
    "closure_samples": 1000,
}

EXPORT_CONFIG = {
    "max_dot_states": 5000,
    "csv_chunk_rows": 1_000_000,
    "float_format": "%.12g",
    "dense_substeps": 10,
}

EXIT_CODES = {
    "success": 0,
    "unexpected": 1,
    "validation": 2,
    "empty_controller": 3,
    "monitor_violation": 4,
    "not_bisimilar": 5,
}

STATE_CLASSES = {
    "both": "both",
    "uncontrollable": "uncontrollable",
    "keep_current": "keep-current",
    "single": "mode{mode}-only",
    "subset": "modes{modes}",
}

BUNDLED_PROBLEMS = {
    "boost_coarse": PROBLEMS_DIR / "boost_coarse.json",
    "boost_fine": PROBLEMS_DIR / "boost_fine.json",
    "dwell_desk": PROBLEMS_DIR / "dwell_desk.json",
    "dwell_full": PROBLEMS_DIR / "dwell_full.json",
}

ERROR_MESSAGES = {
    "invalid_input": "Invalid input for {what}: {reason}",
    "certificate_invalid": "Certificate for mode {mode} is not positive definite",
    "dwell_too_small": "Dwell time {tau_d:g} does not exceed log(mu)/kappa = {bound:.6g}",
    "dwell_not_multiple": "Dwell time {tau_d:g} is not an integer multiple of tau_s = {tau_s:g}",
    "eta_over_budget": "eta = {eta:.6g} violates the {kind} precision bound eta <= {eta_max:.6g} for epsilon = {epsilon:g}",
    "uncontrollable_state": "Symbolic state {state} is outside the controller domain",
    "relation_violation": "Relation level violated at step {step}: V = {value:.6g} > {level:.6g}",
    "label_mismatch": "Label alphabets differ: {left} vs {right}",
}

STATUS_MESSAGES = {
    "verifying": "🔎 Verifying certificates...",
    "budgeting": "📐 Computing precision budget...",
    "abstracting": "🧱 Building symbolic model...",
    "synthesizing": "🛡️ Synthesizing safety controller...",
    "simulating": "▶️ Running closed loop...",
    "bisim": "🔁 Checking approximate bisimilarity...",
    "complete": "✅ Done!",
}
