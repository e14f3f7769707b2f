import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from composer.commands import (
    cmd_detect, cmd_mix, cmd_report, cmd_run, cmd_simulate, cmd_step,
)
from composer.core.errors import ComposerError, DataError
from storage.models import load_run_config

logger = logging.getLogger('composer')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def setup_logging(verbose: int):
    if verbose > 1:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = os.getenv('LOG_LEVEL', 'WARNING').upper()
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


@click.group(invoke_without_command=True, context_settings={'help_option_names': ['-h', '--help']})
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='JSON run config; relative paths inside it resolve against its directory.')
@click.option('--seed', type=int, default=None, help='Override the config seed.')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False, path_type=Path), default=None,
              help='Override the output directory.')
@click.option('--print-effective-config', is_flag=True, help='Print the validated config and exit.')
@click.option('-v', '--verbose', count=True, help='-v for info, -vv for debug logging.')
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], seed: Optional[int], out_dir: Optional[Path],
        print_effective_config: bool, verbose: int):
    """Domain-mixture scheduling: detect, schedule, mix and simulate."""
    load_dotenv()
    setup_logging(verbose)
    config = load_run_config(config_path, seed=seed, out_dir=out_dir)
    ctx.obj = config
    if print_effective_config:
        click.echo(json.dumps(config.model_dump(mode='json'), indent=2))
        ctx.exit(0)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())
        ctx.exit(1)


@cli.command()
@click.argument('samples', nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--iterations-from', multiple=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Earlier detection report whose iterations are folded in.')
@click.option('--progress/--no-progress', default=False)
@click.pass_obj
def detect(config, samples, iterations_from, progress):
    """Annotate SAMPLES files (one per iteration) and write the detection report."""
    report = asyncio.run(cmd_detect(config, samples, iterations_from, progress=progress))
    domains = config.domain_set()
    click.echo(json.dumps({'mean': domains.mapping(report.mean.weights),
                           'max_stddev_pct': report.max_stddev_pct}, indent=2))


@cli.command()
@click.option('--state', 'state_path', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option('--line', 'feedback_line', default=None, help='One feedback line as JSON.')
@click.option('--feedback', 'feedback_file', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help='Feedback JSONL; the line for the next step is used.')
@click.option('--detection', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def step(config, state_path, feedback_line, feedback_file, detection):
    """Apply one scheduler step to the persisted state."""
    if feedback_line is not None and feedback_file is not None:
        raise click.UsageError('--line and --feedback are mutually exclusive')
    line = None
    if feedback_line is not None:
        try:
            line = json.loads(feedback_line)
        except json.JSONDecodeError as exc:
            raise click.BadParameter(f"not JSON ({exc.msg})", param_hint='--line') from None
    state = asyncio.run(cmd_step(config, state_path, line, feedback_file, detection))
    click.echo(json.dumps({'step': state.step,
                           'proportions': config.domain_set().mapping(state.proportions.weights)}, indent=2))


@cli.command()
@click.option('--feedback', 'feedback_file', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None)
@click.option('--state', 'state_path', type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.option('--detection', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.pass_obj
def run(config, feedback_file, state_path, detection):
    """Fold a whole feedback file through the scheduler."""
    state = asyncio.run(cmd_run(config, feedback_file, state_path, detection))
    click.echo(json.dumps({'step': state.step,
                           'proportions': config.domain_set().mapping(state.proportions.weights)}, indent=2))


@cli.command()
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option('--epoch', type=int, default=None, help='Epoch number; defaults to the manifest step.')
@click.pass_obj
def mix(config, manifest, epoch):
    """Materialize the epoch dataset for a proportions MANIFEST."""
    dataset = asyncio.run(cmd_mix(config, manifest, epoch))
    click.echo(str(dataset.path))


@cli.command()
@click.option('--world', 'world_path', type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option('-s', '--strategy', 'strategies', multiple=True,
              help='uniform, inverse, adaptive, constant, single:<d>, expansion:<d>, expansion-uncapped:<d>')
@click.option('--seeds', type=click.IntRange(min=1), default=None)
@click.option('--steps', type=click.IntRange(min=1), default=None)
@click.option('--target', default=None, help='Domain reported as the target column.')
@click.option('--order', multiple=True, help='Expected strategy ordering by final mean loss, best first.')
@click.option('--csv/--no-csv', 'write_csv', default=None)
@click.pass_obj
def simulate(config, world_path, strategies, seeds, steps, target, order, write_csv):
    """Compare mixing strategies on a simulated world."""
    report = asyncio.run(cmd_simulate(config, world_path, strategies, seeds, steps, target, order, write_csv))
    click.echo(f"ranking: {', '.join(report['ranking'])}")


@cli.command()
@click.argument('path', type=click.Path(exists=True, dir_okay=False, path_type=Path))
def report(path):
    """Render a comparison report or a history JSONL as a table."""
    click.echo(asyncio.run(cmd_report(path)), nl=False)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name='composer', standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo('Aborted!', err=True)
        return 1
    except ComposerError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("invalid configuration:\n%s", exc)
        return DataError.exit_code
    except (FileNotFoundError, ValueError) as exc:
        logger.error("%s", exc)
        return DataError.exit_code
    return rv if isinstance(rv, int) else 0


if __name__ == '__main__':
    sys.exit(main())
