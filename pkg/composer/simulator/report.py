"""
Comparison reports over simulated trajectories.

Deltas are final minus step-0 losses, so negative numbers are improvements
and positive non-target sums measure forgetting.
"""

import csv
import io
from collections import defaultdict
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from composer.core.errors import DimensionMismatchError, EmptyInputError
from composer.simulator.strategies import Trajectory


@dataclass(frozen=True)
class StrategySummary:
    label: str
    seed: int
    final_mean_loss: float
    per_domain_delta: dict[str, float]
    target: Optional[str] = None
    target_delta: Optional[float] = None
    non_target_delta_sum: Optional[float] = None
    non_target_sum_by_step: Optional[list[float]] = None


@dataclass(frozen=True)
class ComparisonReport:
    domains: list[str]
    steps: int
    strategies: list[StrategySummary]
    ranking: list[str]

    def to_dict(self) -> dict:
        return {'domains': self.domains, 'steps': self.steps, 'ranking': self.ranking,
                'strategies': [asdict(s) for s in self.strategies]}

    def to_text(self) -> str:
        return render_table(self.to_dict())


def _target_index(trajectory: Trajectory, target: Optional[str]) -> Optional[int]:
    if trajectory.strategy.target is not None:
        return trajectory.strategy.target
    if target is not None:
        return trajectory.domains.index(target)
    return None


def summarize(trajectory: Trajectory, target: Optional[str] = None) -> StrategySummary:
    names = trajectory.domains.names
    start = trajectory.initial.losses
    final = trajectory.final.losses
    delta = final - start
    summary = dict(
        label=trajectory.label,
        seed=trajectory.seed,
        final_mean_loss=float(final.mean()),
        per_domain_delta={n: float(d) for n, d in zip(names, delta)},
    )
    e = _target_index(trajectory, target)
    if e is not None:
        rest = [j for j in range(len(names)) if j != e]
        summary.update(
            target=names[e],
            target_delta=float(delta[e]),
            non_target_delta_sum=float(delta[rest].sum()),
            non_target_sum_by_step=[float((s.losses.losses[rest] - start[rest]).sum()) for s in trajectory.steps],
        )
    return StrategySummary(**summary)


def _check_compatible(trajectories: Sequence[Trajectory]):
    if not trajectories:
        raise EmptyInputError("no trajectories to compare")
    first = trajectories[0]
    for t in trajectories[1:]:
        if t.domains.k != first.domains.k:
            raise DimensionMismatchError(first.domains.k, t.domains.k, f"trajectory {t.label}")
        if len(t.steps) != len(first.steps):
            raise DimensionMismatchError(len(first.steps), len(t.steps), f"steps of trajectory {t.label}")


def compare_report(trajectories: Sequence[Trajectory], target: Optional[str] = None) -> ComparisonReport:
    _check_compatible(trajectories)
    summaries = [summarize(t, target) for t in trajectories]
    ranking = [s.label for s in sorted(summaries, key=lambda s: s.final_mean_loss)]
    return ComparisonReport(
        domains=list(trajectories[0].domains.names),
        steps=len(trajectories[0].steps),
        strategies=summaries,
        ranking=ranking,
    )


def ordering_summary(trajectories: Sequence[Trajectory], order: Optional[Sequence[str]] = None) -> dict:
    """
    Cross-seed view of a sweep: mean final loss per strategy, pairwise win
    rates (share of seeds where the row strategy ends strictly lower) and the
    share of seeds whose final means follow `order` strictly.
    """
    _check_compatible(trajectories)
    by_seed: dict[int, dict[str, float]] = defaultdict(dict)
    for t in trajectories:
        by_seed[t.seed][t.label] = float(t.final.losses.mean())
    labels = list(dict.fromkeys(t.label for t in trajectories))
    seeds = sorted(by_seed)

    mean_final = {label: float(np.mean([by_seed[s][label] for s in seeds])) for label in labels}
    wins = {}
    for a, b in combinations(labels, 2):
        wins[f"{a} < {b}"] = sum(by_seed[s][a] < by_seed[s][b] for s in seeds) / len(seeds)
        wins[f"{b} < {a}"] = sum(by_seed[s][b] < by_seed[s][a] for s in seeds) / len(seeds)

    result = {'seeds': len(seeds), 'mean_final_loss': mean_final, 'win_rates': wins}
    if order:
        held = sum(all(by_seed[s][x] < by_seed[s][y] for x, y in zip(order, order[1:])) for s in seeds)
        result['order'] = list(order)
        result['order_fraction'] = held / len(seeds)
    return result


def render_table(report: dict) -> str:
    """Aligned plain-text table of a comparison report dict."""
    domains = report['domains']
    header = ['strategy', 'seed', 'final_mean'] + [f"d_{n}" for n in domains] + ['target_d', 'non_target_sum']
    rows = []
    for s in report['strategies']:
        rows.append([
            s['label'], str(s['seed']), f"{s['final_mean_loss']:.4f}",
            *(f"{s['per_domain_delta'][n]:+.4f}" for n in domains),
            '-' if s['target_delta'] is None else f"{s['target_delta']:+.4f}",
            '-' if s['non_target_delta_sum'] is None else f"{s['non_target_delta_sum']:+.4f}",
        ])
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    lines = ['  '.join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in [header, *rows]]
    lines.insert(1, '  '.join('-' * w for w in widths))
    lines.append(f"ranking: {' < '.join(report['ranking'])}")
    return '\n'.join(line.rstrip() for line in lines) + '\n'


def render_history_table(rows: Sequence[dict]) -> str:
    """Aligned table of a schedule history (one manifest per row)."""
    if not rows:
        raise EmptyInputError("history is empty")
    domains = list(rows[0]['proportions'])
    header = ['step'] + domains + ['gate', 'cap_blocked']
    body = [[str(r['step']), *(f"{r['proportions'][n]:.4f}" for n in domains),
             '-' if r.get('gate') is None else str(r['gate']).lower(), str(r.get('cap_blocked', False)).lower()]
            for r in rows]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ['  '.join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header, *body]]
    lines.insert(1, '  '.join('-' * w for w in widths))
    return '\n'.join(lines) + '\n'


def trajectories_csv(trajectories: Sequence[Trajectory]) -> str:
    """Long format: strategy,seed,step,domain,proportion,loss (step 0 has no proportion)."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['strategy', 'seed', 'step', 'domain', 'proportion', 'loss'])
    for t in trajectories:
        for j, name in enumerate(t.domains.names):
            writer.writerow([t.label, t.seed, 0, name, '', repr(float(t.initial.losses[j]))])
        for s in t.steps:
            for j, name in enumerate(t.domains.names):
                writer.writerow([t.label, t.seed, s.step, name, repr(float(s.proportions.weights[j])),
                                 repr(float(s.losses.losses[j]))])
    return buffer.getvalue()
