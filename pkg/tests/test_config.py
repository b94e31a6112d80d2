"""
設定とエラー処理のテスト
"""
import logging

import pytest

from fidelimax.core.config import MleConfig, RuntimeSettings, SolverConfig
from fidelimax.core.errors import (
    ConvergenceError,
    ErrorHandler,
    IntegrityError,
    InvalidInputError,
    ParseError,
    PerturbationError,
    retry,
)


def test_solver_defaults():
    """既定値"""
    config = SolverConfig()
    assert config.inner_tolerance == 1e-6
    assert config.alpha_lo < config.alpha_hi
    assert MleConfig().tolerance == 1e-8


def test_solver_config_from_yaml(tmp_path):
    """YAML の値が既定値を上書き"""
    path = tmp_path / "solver.yaml"
    path.write_text("inner_max_iters: 200\nreported_precision: 0.001\n", encoding="utf-8")
    config = SolverConfig.from_yaml(path)
    assert config.inner_max_iters == 200
    assert config.reported_precision == 0.001
    assert config.outer_tolerance == SolverConfig().outer_tolerance


def test_solver_config_rejects_unknown_and_invalid(tmp_path):
    """未知のキー・不正な値・壊れた YAML"""
    path = tmp_path / "solver.yaml"
    path.write_text("no_such_key: 1\n", encoding="utf-8")
    with pytest.raises(InvalidInputError):
        SolverConfig.from_yaml(path)
    with pytest.raises(InvalidInputError):
        SolverConfig.from_mapping({"alpha_lo": 10.0, "alpha_hi": 1.0})
    path.write_text("a: [1, 2\n", encoding="utf-8")
    with pytest.raises(ParseError):
        SolverConfig.from_yaml(path)


def test_with_overrides_skips_none():
    """None の上書きは無視"""
    config = SolverConfig().with_overrides(reported_precision=None, inner_max_iters=42)
    assert config.inner_max_iters == 42
    assert config.reported_precision == SolverConfig().reported_precision


def test_runtime_settings_from_env(monkeypatch, tmp_path):
    """FIDELIMAX_THREADS と FIDELIMAX_LOG_LEVEL"""
    monkeypatch.setenv("FIDELIMAX_THREADS", "4")
    monkeypatch.setenv("FIDELIMAX_LOG_LEVEL", "info")
    settings = RuntimeSettings.from_env(tmp_path / "missing.env")
    assert settings.threads == 4
    assert settings.log_level == "INFO"

    monkeypatch.setenv("FIDELIMAX_THREADS", "0")
    with pytest.raises(InvalidInputError):
        RuntimeSettings.from_env(tmp_path / "missing.env")


def test_retry_eventually_succeeds(caplog):
    """指定の例外ならリトライし、警告を残す"""
    calls = []

    @retry(max_attempts=3, exceptions=(PerturbationError,))
    def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise PerturbationError("まだ")
        return "ok"

    with caplog.at_level(logging.WARNING, logger="fidelimax"):
        assert flaky() == "ok"
    assert len(calls) == 3
    assert sum(1 for r in caplog.records if r.levelno == logging.WARNING) == 2


def test_retry_reraises_after_limit():
    """上限に達したら最後の例外を送出"""
    @retry(max_attempts=2, exceptions=(PerturbationError,))
    def always():
        raise PerturbationError("失敗")

    with pytest.raises(PerturbationError):
        always()


def test_retry_ignores_other_exceptions():
    """対象外の例外はそのまま送出"""
    calls = []

    @retry(max_attempts=5, exceptions=(PerturbationError,))
    def broken():
        calls.append(1)
        raise InvalidInputError("不正")

    with pytest.raises(InvalidInputError):
        broken()
    assert len(calls) == 1


def test_error_handler_exit_codes():
    """解析エラーは 2、その他は 1"""
    assert ErrorHandler.exit_code(ParseError("x")) == 2
    assert ErrorHandler.exit_code(IntegrityError("x")) == 1
    assert ErrorHandler.exit_code(ConvergenceError("x")) == 1
    assert "解析" in ErrorHandler.describe(ParseError("x"))
    assert "対応していません" in ErrorHandler.describe(IntegrityError("x"))
