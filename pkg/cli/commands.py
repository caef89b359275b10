import logging
from pathlib import Path
from typing import Optional

from abstraction.builder import degree_stats, state_count
from abstraction.model import ModelKind
from cli.pipeline import build_model, resolve_precision, simulate, synthesize, verify_problem
from cli.problem_config import ProblemConfig
from closedloop.refinement import switch_spacing
from config.settings import EXIT_CODES, OUTPUT_DIR, STATUS_MESSAGES
from export.model_exporter import ModelExporter, read_model_tables
from export.report_exporter import ReportExporter, read_controller
from synthesis.maps import classification_map, dwell_projection_map, lazy_classification_map
from synthesis.safety import lazy_controller
from transys.bisimulation import are_bisimilar
from transys.finite_ts import FiniteTS
from utils.error_handlers import handle_errors, log_command

logger = logging.getLogger(__name__)


def _out(out_dir, config: ProblemConfig, command: str) -> Path:
    return Path(out_dir) if out_dir else OUTPUT_DIR / config.name / command


@handle_errors("Certificate verification failed")
def cmd_verify(config: ProblemConfig, out_dir=None) -> int:
    log_command("verify", {"problem": config.name})
    print(STATUS_MESSAGES["verifying"])
    report = verify_problem(config)

    for check in report.checks:
        status = "✓" if check.valid else "✗"
        print(f"  {status} mode {check.mode}: margin {check.margin:.3e}")
    chars = report.characteristics
    print(f"  a_lower = {chars.a_lower:.6g}, a_upper = {chars.a_upper:.6g}, kappa = {report.kappa:g}")
    print(f"  mu = {report.mu:.12g}, minimum dwell time = {report.min_dwell:.6g}")
    if report.tau_d is not None:
        print(f"  tau_d = {report.tau_d:g} {'clears' if report.dwell_ok else 'does NOT clear'} the bound")

    if out_dir:
        ReportExporter(out_dir).write_json(report.to_dict(), "verify.json")
    if not report.passed:
        print("❌ Certificate check failed")
        return EXIT_CODES["validation"]
    print(STATUS_MESSAGES["complete"])
    return EXIT_CODES["success"]


@handle_errors("Budget computation failed")
def cmd_budget(config: ProblemConfig, out_dir=None) -> int:
    log_command("budget", {"problem": config.name})
    print(STATUS_MESSAGES["budgeting"])
    precision = resolve_precision(config)
    print(f"  {precision.kind.value} bound: eta <= epsilon / {precision.epsilon / precision.eta_max:.4f}")
    print(f"  epsilon = {precision.epsilon:.6g}, eta = {precision.eta:.6g}, eta_max = {precision.eta_max:.6g}")
    if out_dir:
        ReportExporter(out_dir).write_json(precision.to_dict(), "budget.json")
    print(STATUS_MESSAGES["complete"])
    return EXIT_CODES["success"]


@handle_errors("Abstraction failed")
def cmd_abstract(config: ProblemConfig, out_dir=None, threads: Optional[int] = None) -> int:
    log_command("abstract", {"problem": config.name, "threads": threads})
    print(STATUS_MESSAGES["abstracting"])
    precision = resolve_precision(config)
    model = build_model(config, precision, threads)
    stats = degree_stats(model)

    out_dir = _out(out_dir, config, "abstract")
    ModelExporter().export(model, out_dir)
    ReportExporter(out_dir).write_json({
        "states": state_count(model),
        "kind": model.kind.value,
        "grid_shape": list(model.grid.shape),
        "precision": precision.to_dict(),
        "degree": {"min": stats.min, "max": stats.max, "mean": stats.mean},
    }, "abstract_report.json")

    print(f"  {state_count(model)} states, successors per usable pair: "
          f"min {stats.min}, max {stats.max}, mean {stats.mean:.3f}")
    print(STATUS_MESSAGES["complete"])
    return EXIT_CODES["success"]


@handle_errors("Synthesis failed")
def cmd_synthesize(config: ProblemConfig, out_dir=None, threads: Optional[int] = None) -> int:
    log_command("synthesize", {"problem": config.name, "threads": threads})
    precision = resolve_precision(config)
    print(STATUS_MESSAGES["abstracting"])
    model = build_model(config, precision, threads)
    print(STATUS_MESSAGES["synthesizing"])
    controller = synthesize(config, model)
    lazy = lazy_controller(controller)

    exporter = ReportExporter(_out(out_dir, config, "synthesize"))
    exporter.write_controller(controller)
    summary = {"states": model.n_states, "controllable": controller.domain_size, "rounds": controller.rounds,
               "precision": precision.to_dict()}

    if model.kind is ModelKind.COMMON:
        grid = classification_map(model, controller)
        exporter.write_frame(grid, "classes.csv")
        exporter.write_frame(lazy_classification_map(model, controller, lazy), "lazy_classes.csv")
        summary["classes"] = grid["class"].value_counts().to_dict()
    else:
        summary["classes"] = {}
        for p in model.labels:
            grid = dwell_projection_map(model, controller, p)
            exporter.write_frame(grid, f"classes_mode{p}.csv")
            exporter.write_frame(lazy_classification_map(model, controller, lazy, mode=p), f"lazy_classes_mode{p}.csv")
            summary["classes"][f"mode{p}"] = grid["class"].value_counts().to_dict()
    exporter.write_json(summary, "synthesis_report.json")

    print(f"  {controller.domain_size} of {model.n_states} states controllable ({controller.rounds} rounds)")
    if controller.is_empty:
        print("❌ Synthesis produced an empty controller")
        return EXIT_CODES["empty_controller"]
    print(STATUS_MESSAGES["complete"])
    return EXIT_CODES["success"]


@handle_errors("Simulation failed")
def cmd_simulate(config: ProblemConfig, out_dir=None, controller_path=None, threads: Optional[int] = None) -> int:
    log_command("simulate", {"problem": config.name, "controller": controller_path})
    precision = resolve_precision(config)
    model = build_model(config, precision, threads)
    if controller_path:
        controller = read_controller(controller_path)
    else:
        print(STATUS_MESSAGES["synthesizing"])
        controller = synthesize(config, model)
    if controller.is_empty:
        print("❌ Controller is empty")
        return EXIT_CODES["empty_controller"]

    print(STATUS_MESSAGES["simulating"])
    trace, report = simulate(config, model, controller, precision)
    exporter = ReportExporter(_out(out_dir, config, "simulate"))
    exporter.write_trace(trace)
    summary = report.to_dict()
    summary["switch_spacing"] = switch_spacing(trace.modes)
    summary["max_relation_ratio"] = float((trace.values / trace.levels).max())
    exporter.write_json(summary, "monitor.json")

    print(f"  {trace.horizon} steps, minimal switch spacing {summary['switch_spacing']}, "
          f"{report.dense_excursions} inter-sample excursions")
    if not report.passed:
        print(f"❌ Monitor violation: {report.first_violation}")
        return EXIT_CODES["monitor_violation"]
    print(STATUS_MESSAGES["complete"])
    return EXIT_CODES["success"]


def _load_ts(model_dir) -> FiniteTS:
    states, transitions, meta = read_model_tables(model_dir)
    return FiniteTS.from_tables(states, transitions, labels=meta.get("labels"))


@handle_errors("Bisimilarity check failed")
def cmd_check_bisim(model_a, model_b, epsilon: float, out_dir=None) -> int:
    log_command("check-bisim", {"first": str(model_a), "second": str(model_b), "epsilon": epsilon})
    print(STATUS_MESSAGES["bisim"])
    ts_a, ts_b = _load_ts(model_a), _load_ts(model_b)
    verdict = are_bisimilar(ts_a, ts_b, float(epsilon))

    if out_dir:
        exporter = ReportExporter(out_dir)
        exporter.write_relation(verdict.relation)
        exporter.write_json({"bisimilar": verdict.bisimilar, "epsilon": float(epsilon),
                             "pairs": len(verdict.relation), "reason": verdict.reason}, "bisim.json")

    if verdict.bisimilar:
        print(f"  ✓ bisimilar with precision {epsilon:g} ({len(verdict.relation)} related pairs)")
        return EXIT_CODES["success"]
    print(f"  ✗ not bisimilar with precision {epsilon:g}: {verdict.reason}")
    return EXIT_CODES["not_bisimilar"]
