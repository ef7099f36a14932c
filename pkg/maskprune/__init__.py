from . import (dataset, geometry, reports, rle, scoring, selector, stats,
               synth, util)

try:
    from ._version import get_versions
except ImportError:
    # Source checkout; versioneer writes _version.py at build time.
    __version__ = '0+unknown'
else:
    __version__ = get_versions()['version']
    del get_versions

__all__ = [
    'dataset',
    'geometry',
    'reports',
    'rle',
    'scoring',
    'selector',
    'stats',
    'synth',
    'util',
]
