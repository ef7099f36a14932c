"""
``maskprune`` command-line entry point.

Subcommands ``score``, ``prune``, ``stats`` and ``synth``.  A single JSON
summary line goes to standard output; logs go to standard error.

Exit codes: 0 on success, 1 when the input cannot be read or parsed (or a
mask is malformed), 2 on referential integrity errors and bad arguments.
"""
import argparse
import dataclasses
import logging
import os
import pathlib
import sys
import time
from typing import Dict, List, Mapping, Optional

import orjson
import psutil

from . import reports, scoring, selector, stats, synth
from .dataset import emit_coco, load_coco
from .util import (AnnotationParseError, ArgumentError, GeometryError,
                   IntegrityError, atomic_write, check_pruning_rate,
                   config_logging)

logger = logging.getLogger(__name__)

COMMANDS = ('score', 'prune', 'stats', 'synth')
METHODS = [method.value for method in scoring.Method]
WORKERS_ENV = 'MASKPRUNE_WORKERS'
# Image ids listed at either end of the ranking in the ``score`` summary.
SUMMARY_RANK_IDS = 5


def parse_class_mix(text: str) -> Dict[str, float]:
    """Parse ``name=weight,name=weight`` into an ordered mapping."""
    mix = {}
    for item in text.split(','):
        name, sep, weight = item.partition('=')
        if not sep or not name.strip():
            raise ArgumentError(f'Invalid class mix entry: {item!r}')
        try:
            mix[name.strip()] = float(weight)
        except ValueError:
            raise ArgumentError(
                f'Invalid weight in class mix entry: {item!r}'
            ) from None
    return mix


@dataclasses.dataclass
class RunConfig:
    """Everything one ``maskprune`` invocation needs."""
    command: str
    annotations: Optional[pathlib.Path] = None
    out: Optional[pathlib.Path] = None
    report: Optional[pathlib.Path] = None
    pruning_rate: Optional[float] = None
    method: scoring.Method = scoring.Method.cb
    seed: Optional[int] = None
    crowd: scoring.CrowdPolicy = scoring.CrowdPolicy.score
    workers: int = 1
    log_level: str = 'INFO'
    count: Optional[int] = None
    class_mix: Mapping[str, float] = dataclasses.field(
        default_factory=lambda: dict(synth.DEFAULT_CLASS_MIX))
    compare: Optional[pathlib.Path] = None

    @classmethod
    def from_namespace(cls, args: argparse.Namespace,
                       environ: Mapping[str, str] = os.environ
                       ) -> 'RunConfig':
        """
        Build from parsed arguments.

        The worker count falls back to ``$MASKPRUNE_WORKERS`` and then 1.
        """
        workers = args.workers
        if workers is None:
            env_workers = environ.get(WORKERS_ENV, '').strip()
            try:
                workers = int(env_workers) if env_workers else 1
            except ValueError:
                raise ArgumentError(
                    f'{WORKERS_ENV} must be an integer, got {env_workers!r}'
                ) from None

        def path(value):
            return pathlib.Path(value) if value is not None else None

        return cls(
            command=args.command,
            annotations=path(args.annotations),
            out=path(args.out),
            report=path(args.report),
            pruning_rate=args.pruning_rate,
            method=scoring.Method(args.method),
            seed=args.seed,
            crowd=scoring.CrowdPolicy(args.crowd),
            workers=workers,
            log_level=args.log_level,
            count=args.count,
            class_mix=(parse_class_mix(args.class_mix) if args.class_mix
                       else dict(synth.DEFAULT_CLASS_MIX)),
            compare=path(args.compare),
        )

    def validate(self):
        """
        Check the flag combination for ``command``.

        Raises
        ------
        ArgumentError
            Describing the first problem found.
        """
        required = {
            'score': ('annotations', 'report'),
            'prune': ('annotations', 'out', 'pruning_rate'),
            'stats': ('annotations', 'report'),
            'synth': ('out', 'count'),
        }[self.command]
        for name in required:
            if getattr(self, name) is None:
                flag = '--' + name.replace('_', '-')
                raise ArgumentError(f'{self.command} requires {flag}')

        if self.workers < 1:
            raise ArgumentError(f'Workers must be >= 1, got {self.workers}')

        if self.command == 'prune':
            check_pruning_rate(self.pruning_rate)

        if self.command in ('score', 'prune'):
            is_random = self.method is scoring.Method.random
            if is_random and self.seed is None:
                raise ArgumentError('--method random requires --seed')
            if not is_random and self.seed is not None:
                raise ArgumentError('--seed only applies to --method random')
            if is_random and self.command == 'score':
                raise ArgumentError('--method random does not score images')

        if self.command == 'synth' and self.count < 1:
            raise ArgumentError(f'--count must be >= 1, got {self.count}')

        paths = [path.resolve() for path in
                 (self.annotations, self.out, self.report, self.compare)
                 if path is not None]
        if len(set(paths)) != len(paths):
            raise ArgumentError('Input and output paths must be distinct')


def _resident_mb() -> float:
    return round(psutil.Process().memory_info().rss / 2 ** 20, 1)


def _summary(config: RunConfig, t0: float, **fields) -> dict:
    summary = {'command': config.command}
    summary.update(fields)
    summary['elapsed_s'] = round(time.monotonic() - t0, 3)
    summary['rss_mb'] = _resident_mb()
    return summary


def cmd_score(config: RunConfig) -> dict:
    """Score the annotation file and write instance and image reports."""
    t0 = time.monotonic()
    dataset = load_coco(config.annotations)
    instance_scores, image_scores = scoring.score_dataset(
        dataset, method=config.method, crowd=config.crowd,
        workers=config.workers,
    )
    reports.write_score_reports(config.report, instance_scores,
                                image_scores)

    ranked = [score.image_id for score in scoring.rank_images(image_scores)]
    elapsed = time.monotonic() - t0
    logger.info('Scored %d images in %.2f s', len(image_scores), elapsed)
    return _summary(
        config, t0,
        method=config.method.value,
        images=len(dataset.images),
        instances=len(dataset.instances),
        degenerate=sum(score.degenerate for score in instance_scores),
        top_image_ids=ranked[:SUMMARY_RANK_IDS],
        bottom_image_ids=ranked[-SUMMARY_RANK_IDS:][::-1],
    )


def cmd_prune(config: RunConfig) -> dict:
    """
    Select images and write the pruned annotation file, its manifest and
    the class coverage report.
    """
    t0 = time.monotonic()
    dataset = load_coco(config.annotations)
    degenerate = 0
    instance_scores = image_scores = None
    if config.method is scoring.Method.random:
        selection = selector.select_random(dataset.image_ids,
                                           config.pruning_rate, config.seed)
    else:
        instance_scores, image_scores = scoring.score_dataset(
            dataset, method=config.method, crowd=config.crowd,
            workers=config.workers,
        )
        degenerate = sum(score.degenerate for score in instance_scores)
        selection = selector.select_top_k(image_scores, config.pruning_rate,
                                          method=config.method.value)

    pruned = selector.prune(dataset, selection)
    full_counts = stats.class_histogram(dataset)
    pruned_counts = stats.class_histogram(pruned)
    coverage = stats.coverage_delta(dataset, pruned)

    # Everything is computed; only writes from here on.
    atomic_write(config.out, emit_coco(dataset, selection.kept_image_ids))
    reports.write_manifest(config.out, selection)
    if config.report is not None:
        coverage_path = config.report / 'coverage.csv'
        if image_scores is not None:
            reports.write_score_reports(config.report, instance_scores,
                                        image_scores)
    else:
        coverage_path = config.out.with_name(
            f'{config.out.stem}.coverage.csv')
    reports.write_coverage(coverage_path, coverage, full_counts,
                           pruned_counts)

    return _summary(
        config, t0,
        method=config.method.value,
        images=len(dataset.images),
        instances=len(dataset.instances),
        degenerate=degenerate,
        kept=selection.K,
        kept_instances=len(pruned.instances),
    )


def cmd_stats(config: RunConfig) -> dict:
    """Write distribution reports, and coverage against ``--compare``."""
    t0 = time.monotonic()
    dataset = load_coco(config.annotations)
    report = stats.distribution_report(dataset)
    compare_report = coverage = None
    if config.compare is not None:
        pruned = load_coco(config.compare)
        compare_report = stats.distribution_report(pruned)
        coverage = stats.coverage_delta(dataset, pruned)

    reports.write_stats_reports(config.report, report,
                                compare=compare_report, coverage=coverage)
    return _summary(
        config, t0,
        images=report.num_images,
        instances=report.num_instances,
        degenerate=report.area_histogram.degenerate,
    )


def cmd_synth(config: RunConfig) -> dict:
    """Generate a synthetic corpus and write it as an annotation file."""
    t0 = time.monotonic()
    seed = config.seed if config.seed is not None else 0
    dataset = synth.gen_corpus(config.count, class_mix=config.class_mix,
                               seed=seed)
    atomic_write(config.out, emit_coco(dataset))
    return _summary(
        config, t0,
        images=len(dataset.images),
        instances=len(dataset.instances),
        seed=seed,
    )


_COMMANDS = {
    'score': cmd_score,
    'prune': cmd_prune,
    'stats': cmd_stats,
    'synth': cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='maskprune',
        description='Training-free dataset pruning for instance segmentation',
    )
    parser.add_argument('command', choices=COMMANDS)
    parser.add_argument('--annotations', metavar='PATH',
                        help='Input COCO-style annotation file')
    parser.add_argument('--out', metavar='PATH',
                        help='Output annotation file (prune, synth)')
    parser.add_argument('--report', metavar='DIR',
                        help='Directory for report files')
    parser.add_argument('--pruning-rate', type=float, metavar='FLOAT',
                        help='Fraction of images to remove, in [0, 1)')
    parser.add_argument('--method', choices=METHODS,
                        default=scoring.Method.cb.value,
                        help='Image ranking method (default: %(default)s)')
    parser.add_argument('--seed', type=int,
                        help='Random seed (random method, synth)')
    parser.add_argument('--crowd', choices=['score', 'skip'],
                        default='score',
                        help='Crowd annotation policy (default: %(default)s)')
    parser.add_argument('--workers', type=int,
                        help=f'Scoring processes (default: ${WORKERS_ENV} '
                        f'or 1)')
    parser.add_argument('--count', type=int,
                        help='Number of images to generate (synth)')
    parser.add_argument('--class-mix', metavar='NAME=WEIGHT,...',
                        help='Class frequencies for synth')
    parser.add_argument('--compare', metavar='PATH',
                        help='Pruned annotation file to compare (stats)')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: %(default)s)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig.from_namespace(args)
        config.validate()
    except ArgumentError as ex:
        parser.error(str(ex))

    config_logging(logging.getLogger('maskprune'), file=sys.stderr,
                   level=config.log_level)

    try:
        summary = _COMMANDS[config.command](config)
    except IntegrityError as ex:
        logger.error('Integrity error: %s', ex)
        return 2
    except ArgumentError as ex:
        logger.error('Invalid argument: %s', ex)
        return 2
    except AnnotationParseError as ex:
        logger.error('Failed to parse %s: %s', config.annotations, ex)
        return 1
    except (GeometryError, OSError) as ex:
        logger.error('%s: %s', type(ex).__name__, ex)
        return 1

    sys.stdout.write(orjson.dumps(summary).decode('utf-8') + '\n')
    sys.stdout.flush()
    return 0

