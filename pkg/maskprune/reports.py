"""
Report files: score CSVs, the selection manifest and distribution reports.

Rows are sorted by id, so outputs only depend on dataset content.  Every file
is written atomically.
"""
import csv
import io
import logging
import math
import pathlib
import typing
from typing import Dict, List, Optional, Sequence

import orjson

from .scoring import ImageScore, InstanceScore
from .selector import SelectionResult
from .stats import DistributionReport
from .util import atomic_write

logger = logging.getLogger(__name__)

__all__ = [
    'format_float',
    'instance_scores_csv',
    'image_scores_csv',
    'coverage_csv',
    'manifest_text',
    'write_score_reports',
    'manifest_path',
    'write_manifest',
    'write_coverage',
    'write_stats_reports',
]

INSTANCE_COLUMNS = ['instance_id', 'image_id', 'category_id', 'perimeter',
                    'area', 'scs', 'si_scs', 'cb_scs']
IMAGE_COLUMNS = ['image_id', 'instance_count', 'image_score']
COVERAGE_COLUMNS = ['category_id', 'full_instances', 'kept_instances',
                    'retention']

PathLike = typing.Union[str, pathlib.Path]


def format_float(value: float) -> str:
    """Six significant digits."""
    if math.isnan(value):
        return 'nan'
    return '%.6g' % value


def _csv_bytes(header: Sequence[str], rows: typing.Iterable) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode('utf-8')


def instance_scores_csv(scores: typing.Iterable[InstanceScore]) -> bytes:
    rows = (
        [score.instance_id, score.image_id, score.category_id,
         format_float(score.perimeter), format_float(score.area),
         format_float(score.raw_scs), format_float(score.si_scs),
         format_float(score.cb_scs)]
        for score in sorted(scores, key=lambda score: score.instance_id)
    )
    return _csv_bytes(INSTANCE_COLUMNS, rows)


def image_scores_csv(scores: typing.Iterable[ImageScore]) -> bytes:
    rows = (
        [score.image_id, score.instance_count, format_float(score.value)]
        for score in sorted(scores, key=lambda score: score.image_id)
    )
    return _csv_bytes(IMAGE_COLUMNS, rows)


def coverage_csv(coverage: Dict[int, float], full_counts: Dict[int, int],
                 pruned_counts: Dict[int, int]) -> bytes:
    rows = (
        [cat, full_counts.get(cat, 0), pruned_counts.get(cat, 0),
         format_float(fraction)]
        for cat, fraction in sorted(coverage.items())
    )
    return _csv_bytes(COVERAGE_COLUMNS, rows)


def manifest_text(selection: SelectionResult) -> bytes:
    """Kept image ids, one per line, in rank order."""
    return ''.join(f'{image_id}\n'
                   for image_id in selection.kept_image_ids).encode('ascii')


def manifest_path(out: PathLike) -> pathlib.Path:
    """``<stem>.manifest.txt`` next to the pruned annotation file."""
    out = pathlib.Path(out)
    return out.with_name(f'{out.stem}.manifest.txt')


def write_score_reports(report_dir: PathLike,
                        instance_scores: Sequence[InstanceScore],
                        image_scores: Sequence[ImageScore]
                        ) -> List[pathlib.Path]:
    report_dir = pathlib.Path(report_dir)
    written = []
    for name, data in (
            ('instance_scores.csv', instance_scores_csv(instance_scores)),
            ('image_scores.csv', image_scores_csv(image_scores))):
        path = report_dir / name
        atomic_write(path, data)
        written.append(path)
    logger.info('Wrote score reports to %s', report_dir)
    return written


def write_manifest(out: PathLike,
                   selection: SelectionResult) -> pathlib.Path:
    path = manifest_path(out)
    atomic_write(path, manifest_text(selection))
    return path


def write_coverage(path: PathLike, coverage: Dict[int, float],
                   full_counts: Dict[int, int],
                   pruned_counts: Dict[int, int]) -> pathlib.Path:
    path = pathlib.Path(path)
    atomic_write(path, coverage_csv(coverage, full_counts, pruned_counts))
    return path


def write_stats_reports(report_dir: PathLike, report: DistributionReport,
                        compare: Optional[DistributionReport] = None,
                        coverage: Optional[Dict[int, float]] = None
                        ) -> List[pathlib.Path]:
    """
    Write ``stats.json``, ``class_histogram.csv`` and
    ``area_distribution.csv``; with ``coverage``, also ``coverage.csv``.
    """
    report_dir = pathlib.Path(report_dir)
    doc = {'full': report.to_dict()}
    if compare is not None:
        doc['pruned'] = compare.to_dict()

    hist = report.area_histogram
    outputs = [
        ('stats.json',
         orjson.dumps(doc, option=orjson.OPT_INDENT_2) + b'\n'),
        ('class_histogram.csv',
         _csv_bytes(['category_id', 'instances'],
                    sorted(report.class_counts.items()))),
        ('area_distribution.csv',
         _csv_bytes(['bucket', 'instances'],
                    zip(hist.bucket_labels(), hist.counts))),
    ]

    written = []
    for name, data in outputs:
        path = report_dir / name
        atomic_write(path, data)
        written.append(path)

    if coverage is not None and compare is not None:
        written.append(
            write_coverage(report_dir / 'coverage.csv', coverage,
                           report.class_counts, compare.class_counts)
        )
    logger.info('Wrote distribution reports to %s', report_dir)
    return written
