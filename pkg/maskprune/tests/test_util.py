import io
import logging

import pytest

from .. import util


@pytest.fixture
def logger():
    logger = logging.getLogger("maskprune.tests.util")
    yield logger
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    util._handlers.pop(logger.name, None)


def test_config_logging_replaces_handler(logger):
    first, second = io.StringIO(), io.StringIO()
    util.config_logging(logger, file=first, level="INFO")
    util.config_logging(logger, file=second, level="INFO")
    assert len(logger.handlers) == 1

    logger.info("scored %d images", 3)
    assert first.getvalue() == ""
    assert "INFO" in second.getvalue()
    assert "scored 3 images" in second.getvalue()


def test_config_logging_level(logger):
    stream = io.StringIO()
    util.config_logging(logger, file=stream, level="WARNING")
    logger.info("hidden")
    logger.warning("shown")
    assert "hidden" not in stream.getvalue()
    assert "shown" in stream.getvalue()


def test_atomic_write(tmp_path):
    path = tmp_path / "nested" / "out.txt"
    util.atomic_write(path, b"first\n")
    util.atomic_write(path, b"second\n")
    assert path.read_bytes() == b"second\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_atomic_write_failure_keeps_previous(tmp_path):
    path = tmp_path / "out.txt"
    util.atomic_write(path, b"kept\n")
    with pytest.raises(TypeError):
        util.atomic_write(path, "not bytes")
    assert path.read_bytes() == b"kept\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_error_context():
    ex = util.AnnotationParseError("Unexpected end of input", offset=42)
    assert "offset 42" in str(ex)
    assert ex.offset == 42
    assert isinstance(ex, ValueError)

    ex = util.DegenerateGeometryError("No area", instance_id=7)
    assert isinstance(ex, util.GeometryError)
    assert ex.instance_id == 7
    assert util.IntegrityError("dangling", annotation_id=3).annotation_id == 3
    assert issubclass(util.CodecError, util.MaskPruneError)


@pytest.mark.parametrize(
    "pruning_rate",
    [
        pytest.param(-0.1, id="negative"),
        pytest.param(1.0, id="one"),
        pytest.param("half", id="text"),
        pytest.param(None, id="none"),
    ],
)
def test_check_pruning_rate_invalid(pruning_rate):
    with pytest.raises(util.ArgumentError):
        util.check_pruning_rate(pruning_rate)
