"""
ソルバー設定と実行時設定

設定の優先順位は CLI フラグ > 設定ファイル（YAML） > 既定値。
"""
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import InvalidInputError, ParseError

logger = logging.getLogger(__name__)


class AscentConfig(BaseModel):
    """加速射影勾配法のバックトラッキング設定（鞍点ソルバーと MLE で共通）"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    initial_step: float = 1.0
    step_shrink: float = 0.5
    sufficient_increase: float = 1e-4

    @field_validator("initial_step")
    @classmethod
    def _positive_step(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("initial_step は正の値が必要です")
        return v

    @field_validator("step_shrink", "sufficient_increase")
    @classmethod
    def _unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError("値は (0, 1) の範囲が必要です")
        return v


class SolverConfig(AscentConfig):
    """鞍点ソルバーの設定"""

    inner_tolerance: float = 1e-6
    inner_max_iters: int = 5000
    outer_tolerance: float = 1e-6
    alpha_lo: float = 1e-8
    alpha_hi: float = 1e3
    reported_precision: float = 1e-4
    gradient_tolerance: float = 1e-4
    stall_iterations: int = 20

    @field_validator(
        "inner_tolerance", "outer_tolerance", "alpha_lo", "alpha_hi",
        "reported_precision", "gradient_tolerance",
    )
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("許容誤差と区間端は正の値が必要です")
        return v

    @field_validator("inner_max_iters", "stall_iterations")
    @classmethod
    def _positive_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError("反復回数は 1 以上が必要です")
        return v

    @model_validator(mode="after")
    def _bracket_order(self) -> "SolverConfig":
        if not self.alpha_lo < self.alpha_hi:
            raise ValueError("alpha_lo < alpha_hi が必要です")
        return self

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "SolverConfig":
        """YAML ファイルからソルバー設定を読み込む"""
        return cls.from_mapping(_read_yaml(path))

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "SolverConfig":
        try:
            return cls(**data)
        except ValidationError as e:
            raise InvalidInputError(f"ソルバー設定が不正です: {e}") from e

    def with_overrides(self, **overrides: Any) -> "SolverConfig":
        """None でない値だけを上書きした新しい設定を返す"""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig.from_mapping(values)


class MleConfig(AscentConfig):
    """最尤推定の設定"""

    tolerance: float = 1e-8
    max_iters: int = 3000

    @field_validator("tolerance")
    @classmethod
    def _positive_tol(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("tolerance は正の値が必要です")
        return v

    @field_validator("max_iters")
    @classmethod
    def _positive_iters(cls, v: int) -> int:
        if v < 1:
            raise ValueError("max_iters は 1 以上が必要です")
        return v


class RuntimeSettings(BaseModel):
    """環境変数から読み込む実行時設定"""

    model_config = ConfigDict(frozen=True)

    threads: int = 1
    log_level: str = "WARNING"

    @field_validator("threads")
    @classmethod
    def _threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("スレッド数は 1 以上が必要です")
        return v

    @field_validator("log_level")
    @classmethod
    def _level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"):
            raise ValueError(f"未知のログレベルです: {v}")
        return level

    @classmethod
    def from_env(cls, dotenv_path: Optional[Union[str, Path]] = None) -> "RuntimeSettings":
        """
        .env と環境変数から設定を構築

        Args:
            dotenv_path: .env ファイルのパス（省略時は探索）

        Returns:
            RuntimeSettings
        """
        load_dotenv(dotenv_path)
        raw_threads = os.getenv("FIDELIMAX_THREADS", "1")
        try:
            return cls(
                threads=int(raw_threads),
                log_level=os.getenv("FIDELIMAX_LOG_LEVEL", "WARNING"),
            )
        except (ValueError, ValidationError) as e:
            raise InvalidInputError(f"環境変数の設定が不正です: {e}") from e


def _read_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ParseError(f"YAML を解析できません: {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParseError(f"YAML のトップレベルはマッピングである必要があります: {path}")
    logger.debug(f"設定ファイルを読み込みました: {path}")
    return data
