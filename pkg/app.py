"""
Symbolic safety control for switched affine systems.

Commands:
- verify       check the Lyapunov certificates and the dwell-time bound
- budget       compute the precision budget (eta from epsilon or epsilon from eta)
- abstract     build the symbolic model and export it
- synthesize   compute the maximal safety controller and its class grids
- simulate     run the refined controller in closed loop and monitor it
- check-bisim  check approximate bisimilarity of two exported models
"""

import argparse
import logging
import sys

from config.settings import EXIT_CODES, LOG_FORMAT, LOG_LEVEL

logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

from cli.commands import (
    cmd_abstract, cmd_budget, cmd_check_bisim, cmd_simulate, cmd_synthesize, cmd_verify,
)
from cli.problem_config import ProblemConfig
from utils.error_handlers import ValidationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symctrl", description="Symbolic safety control for switched systems")
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_command(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="problem JSON file or bundled name (e.g. boost_fine)")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--eta", type=float, default=None, help="override abstraction.eta")
        cmd.add_argument("--epsilon", type=float, default=None, help="override abstraction.epsilon")
        return cmd

    problem_command("verify", "check certificates and dwell time")
    problem_command("budget", "compute the precision budget")
    for name, help_text in (("abstract", "build and export the symbolic model"),
                            ("synthesize", "synthesize the safety controller")):
        problem_command(name, help_text).add_argument("--threads", type=int, default=None)
    simulate = problem_command("simulate", "run the closed loop")
    simulate.add_argument("--threads", type=int, default=None)
    simulate.add_argument("--controller", default=None, help="controller.json from a previous synthesize run")

    bisim = sub.add_parser("check-bisim", help="check approximate bisimilarity of two exported models")
    bisim.add_argument("first", help="model directory written by 'abstract'")
    bisim.add_argument("second", help="model directory written by 'abstract'")
    bisim.add_argument("--epsilon", type=float, required=True)
    bisim.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "check-bisim":
        return cmd_check_bisim(args.first, args.second, args.epsilon, out_dir=args.out)

    try:
        config = ProblemConfig.load(args.config).with_overrides(eta=args.eta, epsilon=args.epsilon)
    except ValidationError as e:
        logger.error(str(e))
        print(f"❌ {str(e)}")
        return EXIT_CODES["validation"]

    if args.command == "verify":
        return cmd_verify(config, out_dir=args.out)
    if args.command == "budget":
        return cmd_budget(config, out_dir=args.out)
    if args.command == "abstract":
        return cmd_abstract(config, out_dir=args.out, threads=args.threads)
    if args.command == "synthesize":
        return cmd_synthesize(config, out_dir=args.out, threads=args.threads)
    return cmd_simulate(config, out_dir=args.out, controller_path=args.controller, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
