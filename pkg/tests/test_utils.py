import logging
import os

import numpy as np
import pytest

from utils.config.env_loader import load_env, resolve_env_path
from utils.config.settings import get_runtime_settings
from utils.core.exceptions import ConfigurationError, DimensionError, ResNetLabException, ValidationError
from frontend.ui_components import run_parallel
from utils.core.logging import (
    PROJECT_ROOT,
    RunContextFilter,
    get_project_logger,
    resolve_log_file,
    run_context,
    setup_logger,
)
from utils.core.seeding import make_rng


class TestSeeding:
    def test_same_key_path_same_stream(self):
        assert np.array_equal(make_rng(42, "train", 3).random(5), make_rng(42, "train", 3).random(5))

    def test_streams_are_independent(self):
        a = make_rng(42, "train", 0).random(5)
        b = make_rng(42, "train", 1).random(5)
        c = make_rng(42, "data").random(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_negative_key_is_rejected(self):
        with pytest.raises(ValueError):
            make_rng(0, -1)


class TestRuntimeSettings:
    def test_thread_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv("RESNETLAB_THREADS", "3")
        monkeypatch.setenv("RESNETLAB_OUTPUT", str(tmp_path))
        monkeypatch.setenv("LOG_LEVEL", "debug")
        settings = get_runtime_settings()
        assert settings.threads == 3
        assert settings.output_root == tmp_path
        assert settings.log_level == "DEBUG"

    def test_defaults_to_cpu_count(self, monkeypatch):
        monkeypatch.delenv("RESNETLAB_THREADS", raising=False)
        assert get_runtime_settings().threads >= 1

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_bad_thread_count(self, monkeypatch, raw):
        monkeypatch.setenv("RESNETLAB_THREADS", raw)
        with pytest.raises(ConfigurationError) as exc:
            get_runtime_settings()
        assert exc.value.error_code == "BAD_THREADS"


def test_exception_exit_codes():
    assert ResNetLabException("x").exit_code == 1
    assert DimensionError("x").exit_code == 2
    assert isinstance(DimensionError("x"), ValidationError)


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__()
        self.records = []

    def emit(self, record):
        self.records.append(record)


def test_records_carry_run_context():
    logger = get_project_logger("tests.context")
    handler = _Collect()
    handler.addFilter(RunContextFilter())
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    try:
        with run_context("bounds", 11):
            logger.info("inside")
        logger.info("outside")
    finally:
        logger.removeHandler(handler)
    assert logger.name == "resnetlab.tests.context"
    assert (handler.records[0].command, handler.records[0].seed) == ("bounds", "11")
    assert (handler.records[1].command, handler.records[1].seed) == ("-", "-")


def test_records_from_worker_threads_carry_run_context(monkeypatch):
    monkeypatch.setenv("RESNETLAB_THREADS", "3")
    logger = get_project_logger("tests.workers")
    handler = _Collect()
    handler.addFilter(RunContextFilter())
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)

    def work(item):
        logger.info(f"item {item}")
        return item * 2

    try:
        with run_context("bounds", 5):
            assert run_parallel(work, [1, 2, 3, 4]) == [2, 4, 6, 8]
    finally:
        logger.removeHandler(handler)
    assert len(handler.records) == 4
    assert {(r.command, r.seed) for r in handler.records} == {("bounds", "5")}


class TestLogFile:
    def test_unset_defaults_to_project_logs(self, monkeypatch):
        monkeypatch.delenv("RESNETLAB_LOG_FILE", raising=False)
        assert resolve_log_file() == PROJECT_ROOT / "logs" / "resnetlab.log"

    @pytest.mark.parametrize("raw", ["0", "", "  "])
    def test_zero_or_empty_disables(self, monkeypatch, tmp_path, raw):
        monkeypatch.setenv("RESNETLAB_LOG_FILE", raw)
        monkeypatch.chdir(tmp_path)
        assert resolve_log_file() is None
        logger = setup_logger(name=f"resnetlab_disabled_{len(raw)}")
        try:
            assert not any(isinstance(h, logging.FileHandler) for h in logger.handlers)
        finally:
            logger.handlers.clear()
        assert not (tmp_path / "0").exists()
        assert not (PROJECT_ROOT / "0").exists()

    def test_explicit_path_receives_records(self, tmp_path):
        target = tmp_path / "nested" / "run.log"
        logger = setup_logger(log_file=str(target), name="resnetlab_file_target")
        try:
            logger.warning("written")
            for h in logger.handlers:
                h.flush()
        finally:
            for h in logger.handlers:
                h.close()
            logger.handlers.clear()
        assert "written" in target.read_text(encoding="utf-8")


class TestEnvLoader:
    def test_file_does_not_override_process_environment(self, monkeypatch, tmp_path):
        env_file = tmp_path / "custom.env"
        env_file.write_text("RESNETLAB_THREADS=7\nRESNETLAB_TEST_ONLY=from_file\n", encoding="utf-8")
        monkeypatch.setenv("RESNETLAB_THREADS", "2")
        monkeypatch.delenv("RESNETLAB_TEST_ONLY", raising=False)
        monkeypatch.setenv("RESNETLAB_ENV_FILE", str(env_file))
        try:
            assert resolve_env_path() == env_file
            assert load_env()
            assert get_runtime_settings().threads == 2
            assert os.environ["RESNETLAB_TEST_ONLY"] == "from_file"
        finally:
            os.environ.pop("RESNETLAB_TEST_ONLY", None)

    def test_missing_file(self, tmp_path):
        assert not load_env(str(tmp_path / "absent.env"))
