import decimal
import logging
import os
import pathlib
import sys
import tempfile
import typing

_handlers: typing.Dict[str, logging.Handler] = {}


class MaskPruneError(Exception):
    """Base class for all maskprune errors."""
    ...


class AnnotationParseError(MaskPruneError, ValueError):
    """The annotation document could not be decoded."""

    def __init__(self, message: str, offset: typing.Optional[int] = None):
        if offset is not None:
            message = f'{message} (at offset {offset})'
        super().__init__(message)
        self.offset = offset


class IntegrityError(MaskPruneError):
    """Records reference images or categories that do not exist."""

    def __init__(self, message: str,
                 annotation_id: typing.Optional[int] = None):
        super().__init__(message)
        self.annotation_id = annotation_id


class GeometryError(MaskPruneError, ValueError):
    """A mask violates its representation invariants."""
    ...


class DegenerateGeometryError(GeometryError):
    """The mask has no area (or too few vertices) to be measured."""

    def __init__(self, message: str,
                 instance_id: typing.Optional[int] = None):
        super().__init__(message)
        self.instance_id = instance_id


class CodecError(GeometryError):
    """A COCO compressed counts string is malformed."""
    ...


class ArgumentError(MaskPruneError, ValueError):
    """An argument is outside of its supported range."""
    ...


def config_logging(logger, file=sys.stderr, datefmt='%H:%M:%S',
                   level='WARNING'):
    """
    Add a new handler to the logger.

    Calling this again for the same logger replaces the handler installed
    the previous time.

    Parameters
    ----------
    logger : logging.Logger
        The logger to configure.

    file : object with ``write`` method or filename string
        Default is ``sys.stderr``.

    datefmt : string
        Date format. Default is ``'%H:%M:%S'``.

    level : str or int
        Python logging level, given as string or corresponding integer.
        Default is 'WARNING'.

    Examples
    --------
    Log to a file.

    >>> config_logging(logger, file='/tmp/what_is_happening.txt')

    Increase verbosity: show level INFO or higher.

    >>> config_logging(logger, level='INFO')
    """
    if isinstance(file, (str, pathlib.Path)):
        handler = logging.FileHandler(file)
    else:
        handler = logging.StreamHandler(file)

    handler.setFormatter(
        logging.Formatter(
            fmt='[%(asctime)s %(levelname)-7s %(module)s] %(message)s',
            datefmt=datefmt,
        )
    )

    previous = _handlers.pop(logger.name, None)
    if previous is not None:
        logger.removeHandler(previous)

    _handlers[logger.name] = handler
    logger.addHandler(handler)
    logger.setLevel(level)
    return handler


def check_pruning_rate(pruning_rate: float) -> float:
    """Ensure ``0 <= pruning_rate < 1``, returning it as a float."""
    try:
        pruning_rate = float(pruning_rate)
    except (TypeError, ValueError):
        raise ArgumentError(
            f'Pruning rate must be a number, got {pruning_rate!r}'
        ) from None

    if not 0.0 <= pruning_rate < 1.0:
        raise ArgumentError(
            f'Pruning rate must be in [0, 1), got {pruning_rate}'
        )
    return pruning_rate


def kept_count(num_images: int, pruning_rate: float) -> int:
    """
    Number of images kept when pruning ``pruning_rate`` of ``num_images``.

    Rounds ``(1 - pruning_rate) * num_images`` half-up.  Decimal arithmetic
    keeps e.g. ``p=0.5, D=5`` from landing on ``2.4999...``.

    Parameters
    ----------
    num_images : int
        Dataset size D.

    pruning_rate : float
        Fraction of images removed, in ``[0, 1)``.

    Returns
    -------
    int
        The kept count K.
    """
    pruning_rate = check_pruning_rate(pruning_rate)
    kept = (decimal.Decimal(1) - decimal.Decimal(repr(pruning_rate)))
    kept *= int(num_images)
    return int(kept.quantize(decimal.Decimal(1),
                             rounding=decimal.ROUND_HALF_UP))


def atomic_write(path: typing.Union[str, pathlib.Path], data: bytes):
    """
    Write ``data`` to ``path`` through a temporary file and a rename.

    Readers never observe a partially-written file, and a failure leaves any
    previous file untouched.
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.',
                                    dir=str(path.parent))
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            ...
        raise
