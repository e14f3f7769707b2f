import logging
from pathlib import Path
from typing import Optional, Sequence

import httpx

from composer.core.distribution import Distribution, LossVector
from composer.core.errors import ConfigError, FeedbackExhaustedError, MalformedRecordError
from composer.detector.aggregate import aggregate_iteration, detect
from composer.detector.classifier import annotate
from composer.detector.models import DetectionReport
from composer.detector.samples import load_samples
from composer.mixer.materialize import DomainPool, EpochDataset, materialize
from composer.mixer.plan import build_mix_plan
from composer.scheduler.models import SchedulerState
from composer.scheduler.steps import apply_step, init_state, iter_schedule
from composer.simulator.report import (
    compare_report, ordering_summary, render_history_table, render_table, trajectories_csv,
)
from composer.simulator.strategies import parse_strategy, run_sweep
from composer.simulator.world import SimWorld, default_world
from composer.utils.jsonl import read_jsonl
from composer.utils.seeding import derive_rng
from config import DETECTION_ITERATIONS, DETECTION_SAMPLE_COUNT
from storage.models import ProportionsManifest, RunConfig
from storage.repositories.artifacts import ArtifactRepository
from storage.repositories.feedback import FeedbackRepository
from storage.repositories.state import StateRepository

logger = logging.getLogger(__name__)

DETECTION_FILE = 'detection.json'
DETECTION_SUMMARY_FILE = 'detect_summary.json'
STATE_FILE = 'state.json'
HISTORY_FILE = 'history.jsonl'


def _artifacts(config: RunConfig) -> ArtifactRepository:
    return ArtifactRepository(config.paths.output_dir)


async def _load_detection(path: Path) -> DetectionReport:
    payload = await ArtifactRepository(path.parent).read_json(path.name)
    try:
        return DetectionReport.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecordError(path, 1, f"not a detection report ({exc})") from None


async def cmd_detect(config: RunConfig, samples_files: Sequence[Path] = (), iterations_from: Sequence[Path] = (),
                     http_client: Optional[httpx.AsyncClient] = None, progress: bool = False) -> DetectionReport:
    if config.classifier is None:
        raise ConfigError("detect needs a 'classifier' section in the run config")
    files = list(samples_files) or [Path(p) for p in config.paths.samples]
    if not files and not iterations_from:
        raise ConfigError("detect needs at least one samples file")

    domains = config.domain_set()
    iterations: list[Distribution] = []
    for path in iterations_from:
        iterations.extend((await _load_detection(Path(path))).per_iteration)

    runs = []
    for path in files:
        samples = await load_samples(path)
        if len(samples) < DETECTION_SAMPLE_COUNT:
            logger.info("%s holds %d samples, fewer than the usual %d", path, len(samples), DETECTION_SAMPLE_COUNT)
        run = await annotate(samples, config.classifier, domains, http_client=http_client, progress=progress)
        iterations.append(aggregate_iteration(run.annotations))
        runs.append({'file': str(path), **run.summary()})
        logger.info("%s: %d annotated, %d dropped", path, len(run.annotations), run.dropped)

    if len(iterations) < DETECTION_ITERATIONS:
        logger.warning("detecting over %d iterations, fewer than the usual %d", len(iterations), DETECTION_ITERATIONS)
    report = detect(iterations)
    artifacts = _artifacts(config)
    await artifacts.write_json(DETECTION_FILE, {**report.to_dict(), 'domains': list(domains.names)})
    await artifacts.write_json(DETECTION_SUMMARY_FILE, {'iterations': runs})
    logger.info("detection over %d iterations, max stddev %.3f%%", len(iterations), report.max_stddev_pct)
    return report


async def _initial_state(config: RunConfig, state_path: Path, detection: Optional[Path]) -> SchedulerState:
    domains = config.domain_set()
    state = await StateRepository(state_path).load(domains)
    if state is not None:
        return state
    source = detection or (Path(config.paths.detection) if config.paths.detection else None)
    if source is None:
        raise ConfigError(f"no state at {state_path} and no detection report to initialize from")
    report = await _load_detection(Path(source))
    if report.mean.k != domains.k:
        raise ConfigError(f"detection report has {report.mean.k} domains, config has {domains.k}")
    logger.info("initialized state from %s", source)
    return init_state(report.mean, config.scheduler_config())


async def _reference(config: RunConfig):
    if config.reference_losses is None:
        raise ConfigError("scheduling needs 'reference_losses' in the run config")
    return await FeedbackRepository(config.domain_set()).load_reference(config.reference_losses)


async def _persist_schedule(config: RunConfig, state: SchedulerState, state_path: Path,
                            manifest_steps: Sequence[int]):
    domains = config.domain_set()
    artifacts = _artifacts(config)
    manifests = {entry.step: ProportionsManifest.from_entry(entry, domains).model_dump(mode='json')
                 for entry in state.history}
    for step in manifest_steps:
        await artifacts.write_json(f'manifest_step_{step}.json', manifests[step])
    await artifacts.write_jsonl(HISTORY_FILE, manifests.values())
    await StateRepository(state_path).save(state, domains)


async def cmd_step(config: RunConfig, state_path: Optional[Path] = None, feedback_line: Optional[dict] = None,
                   feedback_file: Optional[Path] = None, detection: Optional[Path] = None) -> SchedulerState:
    """Apply one scheduler step; with no feedback, only initialize the state file."""
    state_path = Path(state_path or _artifacts(config).path(STATE_FILE))
    state = await _initial_state(config, state_path, detection)
    feedback = FeedbackRepository(config.domain_set())

    losses: Optional[LossVector] = None
    if feedback_line is not None:
        losses = feedback.parse_line(feedback_line)
    elif feedback_file is not None or config.paths.feedback:
        path = Path(feedback_file or config.paths.feedback)
        pending = [lv for lv in await feedback.load_feedback(path) if lv.step == state.step + 1]
        if not pending:
            raise FeedbackExhaustedError(f"{path} has no line for step {state.step + 1}")
        losses = pending[0]

    if losses is None:
        await StateRepository(state_path).save(state, config.domain_set())
        return state

    state = apply_step(state, losses, await _reference(config))
    await _persist_schedule(config, state, state_path, [state.step])
    logger.info("step %d: %s", state.step, config.domain_set().mapping(state.proportions.weights))
    return state


async def cmd_run(config: RunConfig, feedback_file: Optional[Path] = None, state_path: Optional[Path] = None,
                  detection: Optional[Path] = None) -> SchedulerState:
    """
    Fold the whole feedback file, persisting state, history and manifest after
    every step. An existing state file is resumed from its step.
    """
    state_path = Path(state_path or _artifacts(config).path(STATE_FILE))
    path = feedback_file or (Path(config.paths.feedback) if config.paths.feedback else None)
    if path is None:
        raise ConfigError("run needs a feedback file")

    state = await _initial_state(config, state_path, detection)
    ref = await _reference(config)
    snapshots = [lv for lv in await FeedbackRepository(config.domain_set()).load_feedback(path)
                 if lv.step > state.step]
    # a failing step leaves the files at the last step that succeeded
    for state in iter_schedule(state, snapshots, ref):
        await _persist_schedule(config, state, state_path, [state.step])
        logger.info("step %d: %s", state.step, config.domain_set().mapping(state.proportions.weights))
    return state


async def cmd_mix(config: RunConfig, manifest_path: Path, epoch: Optional[int] = None) -> EpochDataset:
    domains = config.domain_set()
    payload = await ArtifactRepository(Path(manifest_path).parent).read_json(Path(manifest_path).name)
    manifest = ProportionsManifest.model_validate(payload)
    epoch = manifest.step if epoch is None else epoch

    seed = int(derive_rng(config.seed, 'epoch', epoch).integers(1 << 63))
    plan = build_mix_plan(manifest.distribution(domains), config.budget, seed)
    pools = [DomainPool(domain=domains.index(name), path=Path(path)) for name, path in config.paths.pools.items()]

    artifacts = _artifacts(config)
    await artifacts.write_json(f'plan_epoch_{epoch}.json', plan.to_dict(domains))
    dataset = await materialize(plan, pools, domains, artifacts.path(f'epoch_{epoch}.jsonl'))
    logger.info("epoch %d: %d records written to %s", epoch, plan.budget, dataset.path)
    return dataset


async def _load_world(config: RunConfig, world_path: Optional[Path]) -> SimWorld:
    path = world_path or (Path(config.paths.world) if config.paths.world else None)
    if path is None:
        return default_world()
    return SimWorld.from_dict(await ArtifactRepository(Path(path).parent).read_json(Path(path).name))


async def cmd_simulate(config: RunConfig, world_path: Optional[Path] = None, strategies: Sequence[str] = (),
                       seeds: Optional[int] = None, steps: Optional[int] = None, target: Optional[str] = None,
                       order: Sequence[str] = (), write_csv: Optional[bool] = None) -> dict:
    settings = config.simulation
    world = await _load_world(config, world_path)
    domains = world.domains
    parsed = [parse_strategy(s, domains) for s in (strategies or settings.strategies)]
    seed_list = list(range(config.seed, config.seed + (seeds or settings.seeds)))
    steps = steps or settings.steps
    if config.reference_losses is not None:
        ref = await FeedbackRepository(domains).load_reference(config.reference_losses)
    else:
        ref = world.reference_losses()

    scheduler = config.scheduler_config().model_copy(update={'target_domain': None})
    trajectories = run_sweep(world, parsed, ref, steps, seed_list, scheduler)

    report = compare_report(trajectories, target=target or settings.target).to_dict()
    report['ordering'] = ordering_summary(trajectories, order=list(order) or settings.order)

    artifacts = _artifacts(config)
    rows = [{'strategy': t.label, 'seed': t.seed, **row} for t in trajectories for row in t.rows()]
    await artifacts.write_jsonl('trajectories.jsonl', rows)
    await artifacts.write_json('comparison.json', report)
    await artifacts.write_text('comparison.txt', render_table(report))
    if write_csv is None:
        write_csv = settings.csv
    if write_csv:
        await artifacts.write_text('trajectories.csv', trajectories_csv(trajectories))
    return report


async def cmd_report(path: Path) -> str:
    path = Path(path)
    if path.suffix == '.jsonl':
        return render_history_table([obj for _, obj in await read_jsonl(path)])
    payload = await ArtifactRepository(path.parent).read_json(path.name)
    if not isinstance(payload, dict) or 'strategies' not in payload:
        raise MalformedRecordError(path, 1, "expected a comparison report or a history JSONL")
    return render_table(payload)
