import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np


def validate_positive(name: str, value: Any) -> Tuple[bool, Optional[str]]:
    if value is None:
        return False, f"'{name}' is required."
    try:
        value = float(value)
    except (TypeError, ValueError):
        return False, f"'{name}' must be a number."
    if not math.isfinite(value) or value <= 0:
        return False, f"'{name}' must be a finite positive number (got {value})."
    return True, None


def validate_vector(name: str, value: Any, n: int) -> Tuple[bool, Optional[str]]:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return False, f"'{name}' must be a list of numbers."
    if arr.shape != (n,):
        return False, f"'{name}' must have length {n} (got shape {arr.shape})."
    if not np.all(np.isfinite(arr)):
        return False, f"'{name}' contains non-finite entries."
    return True, None


def validate_matrix(name: str, value: Any, n: int) -> Tuple[bool, Optional[str]]:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return False, f"'{name}' must be a row-major array of numbers."
    if arr.shape != (n, n):
        return False, f"'{name}' must be {n}x{n} (got shape {arr.shape})."
    if not np.all(np.isfinite(arr)):
        return False, f"'{name}' contains non-finite entries."
    return True, None


def validate_box(name: str, lo: Sequence[float], hi: Sequence[float], n: int) -> Tuple[bool, Optional[str]]:
    for part, value in (("lo", lo), ("hi", hi)):
        ok, message = validate_vector(f"{name}.{part}", value, n)
        if not ok:
            return ok, message
    if np.any(np.asarray(lo, dtype=float) > np.asarray(hi, dtype=float)):
        return False, f"'{name}' must satisfy lo <= hi componentwise."
    return True, None


def validate_box_inside(inner_name: str, inner: Dict, outer: Dict) -> Tuple[bool, Optional[str]]:
    inner_lo, inner_hi = np.asarray(inner["lo"], float), np.asarray(inner["hi"], float)
    outer_lo, outer_hi = np.asarray(outer["lo"], float), np.asarray(outer["hi"], float)
    if np.any(inner_lo < outer_lo) or np.any(inner_hi > outer_hi):
        return False, f"'{inner_name}' must lie inside the keep box."
    return True, None


def validate_dwell_multiple(tau_d: float, tau_s: float, tol: float = 1e-9) -> Tuple[bool, Optional[str]]:
    ratio = tau_d / tau_s
    steps = round(ratio)
    if steps < 1 or abs(ratio - steps) > tol * max(1.0, ratio):
        return False, f"tau_d = {tau_d:g} must be a positive integer multiple of tau_s = {tau_s:g}."
    return True, None


def validate_problem_document(doc: Dict) -> Tuple[bool, Optional[str]]:
    """Structural checks on a raw problem JSON document."""
    if not isinstance(doc, dict):
        return False, "Problem configuration must be a JSON object."

    for section in ("system", "certificates", "sampling", "abstraction", "spec"):
        if section not in doc:
            return False, f"Missing section '{section}'."

    system = doc["system"]
    n = system.get("n")
    if not isinstance(n, int) or n < 1:
        return False, "'system.n' must be a positive integer."
    modes = system.get("modes") or []
    if not modes:
        return False, "'system.modes' must list at least one mode."
    for idx, mode in enumerate(modes, start=1):
        ok, message = validate_matrix(f"system.modes[{idx}].A", mode.get("A"), n)
        if not ok:
            return ok, message
        ok, message = validate_vector(f"system.modes[{idx}].b", mode.get("b"), n)
        if not ok:
            return ok, message

    certificates = doc["certificates"]
    matrices = certificates.get("M") or []
    if len(matrices) not in (1, len(modes)):
        return False, "'certificates.M' must hold one shared matrix or one matrix per mode."
    for idx, matrix in enumerate(matrices, start=1):
        ok, message = validate_matrix(f"certificates.M[{idx}]", matrix, n)
        if not ok:
            return ok, message
    ok, message = validate_positive("certificates.kappa", certificates.get("kappa"))
    if not ok:
        return ok, message

    ok, message = validate_positive("sampling.tau_s", doc["sampling"].get("tau_s"))
    if not ok:
        return ok, message

    abstraction = doc["abstraction"]
    if abstraction.get("eta") is None and abstraction.get("epsilon") is None:
        return False, "'abstraction' needs at least one of 'eta' or 'epsilon'."
    for key in ("eta", "epsilon"):
        if abstraction.get(key) is not None:
            ok, message = validate_positive(f"abstraction.{key}", abstraction[key])
            if not ok:
                return ok, message
    region = abstraction.get("region") or {}
    ok, message = validate_box("abstraction.region", region.get("lo"), region.get("hi"), n)
    if not ok:
        return ok, message
    if abstraction.get("exit_policy", "drop") not in ("drop", "block"):
        return False, f"'abstraction.exit_policy' must be 'drop' or 'block' (got {abstraction['exit_policy']!r})."

    dwell = doc.get("dwell") or {}
    if dwell.get("tau_d") is not None:
        ok, message = validate_positive("dwell.tau_d", dwell["tau_d"])
        if not ok:
            return ok, message
        ok, message = validate_dwell_multiple(float(dwell["tau_d"]), float(doc["sampling"]["tau_s"]))
        if not ok:
            return ok, message

    spec = doc["spec"]
    keep = spec.get("keep") or {}
    ok, message = validate_box("spec.keep", keep.get("lo"), keep.get("hi"), n)
    if not ok:
        return ok, message
    if spec.get("avoid"):
        avoid = spec["avoid"]
        ok, message = validate_box("spec.avoid", avoid.get("lo"), avoid.get("hi"), n)
        if not ok:
            return ok, message
        ok, message = validate_box_inside("spec.avoid", avoid, keep)
        if not ok:
            return ok, message

    simulation = doc.get("simulation") or {}
    if simulation.get("x0") is not None:
        ok, message = validate_vector("simulation.x0", simulation["x0"], n)
        if not ok:
            return ok, message
    horizon = simulation.get("horizon", 0)
    if not isinstance(horizon, int) or horizon < 0:
        return False, "'simulation.horizon' must be a non-negative integer."

    return True, None
