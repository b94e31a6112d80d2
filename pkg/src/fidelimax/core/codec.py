"""
JSON 形式の読み書きとフィンガープリント

行列は行優先のリストで、各成分は [実部, 虚部] の 2 要素配列。
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import InvalidInputError, ParseError
from .quantum import (
    DEFAULT_EPSILON_O,
    DensityMatrix,
    MeasurementPlan,
    PovmSetting,
    plan_violations,
    setting_violations,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MatrixJson = List[List[Tuple[float, float]]]

ModelT = TypeVar("ModelT", bound=BaseModel)


def encode_matrix(m: np.ndarray) -> MatrixJson:
    return [[(float(z.real), float(z.imag)) for z in row] for row in np.asarray(m)]


def decode_matrix(rows: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
    """[[ [re, im], … ], …] を複素行列に変換"""
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as e:
        raise ParseError(f"行列の形式が不正です: {e}") from e
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"行列は [re, im] を成分とする正方配列である必要があります: {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


class SettingDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str
    repetitions: int
    effects: List[MatrixJson]
    values: Optional[List[float]] = None


class PlanDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dimension: int
    epsilon: float
    epsilon_o: float = DEFAULT_EPSILON_O
    target: MatrixJson
    settings: List[SettingDocument] = Field(default_factory=list)
    observable: Optional[MatrixJson] = None

    def violations(self) -> List[str]:
        """すべての不変条件違反を列挙（最初の違反で止まらない）"""
        target = decode_matrix(self.target)
        issues: List[str] = []
        if target.shape[0] != self.dimension:
            issues.append(f"target の次元 {target.shape[0]} が dimension {self.dimension} と一致しません")
        dims = []
        for s in self.settings:
            effects = np.stack([decode_matrix(e) for e in s.effects]) if s.effects else np.empty(0)
            issues.extend(setting_violations(s.label, effects, s.repetitions, self.dimension))
            if s.repetitions == 0:
                issues.append(f"設定 '{s.label}': 繰り返し回数は正の整数が必要です")
            if s.values is not None and len(s.values) != len(s.effects):
                issues.append(f"設定 '{s.label}': values の長さが結果数と一致しません")
            dims.append(effects.shape[1] if effects.ndim == 3 else -1)
        observable = decode_matrix(self.observable) if self.observable is not None else None
        issues.extend(plan_violations(target, self.epsilon, self.epsilon_o, dims, observable))
        return issues

    def to_plan(self) -> MeasurementPlan:
        issues = self.violations()
        if issues:
            raise InvalidInputError("; ".join(issues))
        settings = tuple(
            PovmSetting(
                label=s.label,
                effects=np.stack([decode_matrix(e) for e in s.effects]),
                repetitions=s.repetitions,
                values=tuple(s.values) if s.values is not None else None,
            )
            for s in self.settings
        )
        return MeasurementPlan(
            target=DensityMatrix(decode_matrix(self.target)),
            epsilon=self.epsilon,
            settings=settings,
            epsilon_o=self.epsilon_o,
            observable=decode_matrix(self.observable) if self.observable is not None else None,
        )

    @classmethod
    def from_plan(cls, plan: MeasurementPlan) -> "PlanDocument":
        return cls(
            dimension=plan.dim,
            epsilon=plan.epsilon,
            epsilon_o=plan.epsilon_o,
            target=encode_matrix(plan.target.matrix),
            settings=[
                SettingDocument(
                    label=s.label,
                    repetitions=s.repetitions,
                    effects=[encode_matrix(e) for e in s.effects],
                    values=list(s.values) if s.values is not None else None,
                )
                for s in plan.settings
            ],
            observable=encode_matrix(plan.observable) if plan.observable is not None else None,
        )


class DatasetDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = SCHEMA_VERSION
    counts: List[List[int]]
    plan_fingerprint: Optional[str] = None


def parse_model(model: Type[ModelT], raw: Union[str, bytes]) -> ModelT:
    """JSON テキストを pydantic モデルとして検証（失敗は ParseError）"""
    try:
        return model.model_validate_json(raw)
    except ValidationError as e:
        raise ParseError(f"{model.__name__} として解析できません: {e}") from e


def read_text(path: Union[str, Path]) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"UTF-8 として読めません: {path}") from e


def load_plan(path: Union[str, Path]) -> MeasurementPlan:
    return parse_model(PlanDocument, read_text(path)).to_plan()


def dump_plan(plan: MeasurementPlan) -> str:
    return PlanDocument.from_plan(plan).model_dump_json(indent=2, exclude_none=True)


def load_state(path: Union[str, Path]) -> DensityMatrix:
    """行列 JSON（行のリスト）から状態を読む"""
    try:
        rows = json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON を解析できません: {path}: {e}") from e
    return DensityMatrix(decode_matrix(rows))


def dump_state(state: DensityMatrix) -> str:
    return json.dumps(encode_matrix(state.matrix))


def _canonical(value: Any) -> str:
    """キーをソートし、数値を 17 桁で固定した JSON 文字列"""
    if isinstance(value, dict):
        items = sorted(value.items())
        return "{" + ",".join(f"{json.dumps(str(k))}:{_canonical(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in value) + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if x == 0:
            x = 0.0
        return format(x, ".17g")
    return json.dumps(str(value))


def canonical_json(value: Any) -> str:
    return _canonical(value)


def plan_fingerprint(plan: MeasurementPlan) -> str:
    """
    測定計画の正準 JSON 表現の SHA-256（16 進 64 文字）

    Args:
        plan: 測定計画

    Returns:
        フィンガープリント
    """
    payload = PlanDocument.from_plan(plan).model_dump(exclude_none=True)
    digest = hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
    logger.debug(f"計画のフィンガープリント: {digest}")
    return digest


def is_fingerprint(value: str) -> bool:
    return len(value) == 64 and all(ch in "0123456789abcdef" for ch in value)
