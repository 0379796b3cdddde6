"""
Main Entry Point - Fractional exterior-value laboratory

Runs the identity suite, forward solves, DN record assembly and the
coefficient recoveries from one JSON experiment file.
"""
import argparse
import logging
import sys
from typing import Any, Dict, Optional

from rich.console import Console
from rich.table import Table

from config.experiment import load_config
from config.settings import create_directories, settings
from numerics.errors import ConfigError
from orchestrator import StageCoordinator, WorkflowManager, WorkflowType

console = Console()

COMMANDS = {
    "verify": WorkflowType.VERIFY,
    "forward": WorkflowType.FORWARD,
    "dnmap": WorkflowType.DNMAP,
    "invert-q": WorkflowType.INVERT_Q,
    "invert-a": WorkflowType.INVERT_A,
    "invert-semilinear": WorkflowType.INVERT_SEMILINEAR,
    "runge": WorkflowType.RUNGE,
    "pipeline": WorkflowType.PIPELINE,
}


def setup_logging():
    """Set up logging configuration"""
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL),
        format=settings.LOG_FORMAT,
        handlers=[
            logging.FileHandler(settings.LOGS_DIR / "lab.log"),
            logging.StreamHandler(sys.stdout)
        ]
    )


def render_workflow(result: Dict[str, Any]) -> None:
    """Print the check table of every executed stage"""
    table = Table(title=f"Workflow '{result['workflow_type']}': {result['status']}")
    table.add_column("Stage")
    table.add_column("Check")
    table.add_column("Value", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Result")
    for stage_name, stage_result in result["results"].items():
        for check in stage_result.checks:
            verdict = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(stage_name, check.name, f"{check.value:.3e}", f"{check.tolerance:.3e}", verdict)
    console.print(table)
    console.print(f"Processing time: {result['processing_time']:.2f}s")
    for warning in result["warnings"]:
        console.print(f"[yellow]warning[/yellow] {warning}")
    for error in result["errors"]:
        console.print(f"[red]error[/red] {error}")


def run_command(command: str, config_path: Optional[str], out_dir: Optional[str],
                seed: Optional[int], threads: Optional[int]) -> bool:
    """Run one command; True iff every executed stage passed all its checks"""
    logger = logging.getLogger(__name__)

    try:
        experiment = load_config(config_path, require_magnetic=COMMANDS[command] == WorkflowType.INVERT_A)
    except ConfigError as e:
        logger.error(str(e))
        console.print(f"[red]error[/red] {e}")
        return False

    workflow_manager = WorkflowManager(StageCoordinator())
    result = workflow_manager.execute_workflow(
        workflow_type=COMMANDS[command],
        experiment=experiment,
        out_dir=out_dir,
        seed=seed,
        threads=threads
    )
    render_workflow(result)
    return result["status"] == "passed"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Fractional exterior-value laboratory",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Identity suite with the default experiment
  python main.py verify

  # Records then potential recovery, sharing one run directory
  python main.py dnmap --config twin.json --out runs/twin
  python main.py invert-q --config twin.json --out runs/twin

  # Everything, with four solver threads
  python main.py pipeline --config twin.json --out runs/twin --threads 4
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')
    for name, workflow in COMMANDS.items():
        sub = subparsers.add_parser(name, help=f"Run the {workflow.value} workflow")
        sub.add_argument('--config', default=None, help='Experiment JSON file (defaults if omitted)')
        sub.add_argument('--out', default=None, help='Run directory shared by chained commands')
        sub.add_argument('--seed', type=int, default=None, help='Noise seed override')
        sub.add_argument('--threads', type=int, default=None, help='Worker threads for source solves')
    return parser


def main():
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(1)

    create_directories()
    setup_logging()

    success = run_command(args.command, args.config, args.out, args.seed, args.threads)
    sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
