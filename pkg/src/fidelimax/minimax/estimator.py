"""
アフィン推定量の表現・評価・保存と、摂動に対する頑健性の上界
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from ..core.codec import SCHEMA_VERSION, DatasetDocument, is_fingerprint, parse_model, read_text
from ..core.errors import IntegrityError, InvalidInputError, ParseError

logger = logging.getLogger(__name__)

RISK_SLACK = 1e-3
QUANTITIES = ("fidelity", "observable")


@dataclass(frozen=True, eq=False)
class AffineEstimator:
    """
    F̂ = Σ_l Σ_k counts^(l)_k · a^(l)_k + c = Σ_l R_l ⟨a^(l), f^(l)⟩ + c

    risk は信頼度 1−ε の区間の半幅（精度 δ を含む）。
    """
    coefficients: Tuple[np.ndarray, ...]
    repetitions: Tuple[int, ...]
    constant: float
    risk: float
    epsilon: float
    epsilon_o: float
    plan_fingerprint: str
    quantity: str = "fidelity"

    def __post_init__(self) -> None:
        coefficients = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.coefficients)
        for a in coefficients:
            a.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "repetitions", tuple(int(r) for r in self.repetitions))
        if not is_fingerprint(self.plan_fingerprint):
            raise IntegrityError(f"フィンガープリントが壊れています: '{self.plan_fingerprint}'")
        if len(coefficients) != len(self.repetitions):
            raise InvalidInputError("係数と繰り返し回数の設定数が一致しません")
        if self.quantity not in QUANTITIES:
            raise InvalidInputError(f"未知の推定対象です: {self.quantity}")
        if not all(np.all(np.isfinite(a)) for a in coefficients):
            raise InvalidInputError("係数に有限でない値が含まれます")
        if self.quantity == "fidelity":
            if not 0 <= self.risk <= 0.5 + RISK_SLACK:
                raise InvalidInputError(f"リスクが [0, 0.5] の範囲外です: {self.risk}")
            if not -1e-6 <= self.constant <= 1 + 1e-6:
                raise InvalidInputError(f"定数項が [0, 1] の範囲外です: {self.constant}")
            if self.constant + self.risk > 1 + RISK_SLACK:
                raise InvalidInputError(
                    f"定数項とリスクの和が 1 を超えます: {self.constant + self.risk}"
                )

    @property
    def num_settings(self) -> int:
        return len(self.coefficients)

    @property
    def confidence(self) -> float:
        return 1.0 - self.epsilon


@dataclass(frozen=True, eq=False)
class Dataset:
    """設定ごとの結果カウント"""
    counts: Tuple[np.ndarray, ...]
    plan_fingerprint: Optional[str] = None

    def __post_init__(self) -> None:
        counts = tuple(np.asarray(c, dtype=np.int64).reshape(-1) for c in self.counts)
        for c in counts:
            if c.size == 0:
                raise InvalidInputError("結果数 0 の設定があります")
            if np.any(c < 0):
                raise InvalidInputError("カウントが負です")
            c.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.plan_fingerprint is not None and not is_fingerprint(self.plan_fingerprint):
            raise IntegrityError(f"フィンガープリントが壊れています: '{self.plan_fingerprint}'")

    @property
    def repetitions(self) -> Tuple[int, ...]:
        return tuple(int(c.sum()) for c in self.counts)

    @property
    def frequencies(self) -> Tuple[np.ndarray, ...]:
        """f^(l) = counts^(l)/R_l（R_l = 0 の設定は零ベクトル）"""
        return tuple(c / max(int(c.sum()), 1) for c in self.counts)


@dataclass(frozen=True)
class EstimateReport:
    """推定値と信頼区間"""
    value: float
    risk: float
    confidence: float
    quantity: str

    @property
    def lower(self) -> float:
        return self.value - self.risk

    @property
    def upper(self) -> float:
        return self.value + self.risk

    @property
    def physical(self) -> bool:
        """忠実度として [0, 1] に入っているか（区間はクリップしない）"""
        return self.quantity != "fidelity" or 0.0 <= self.value <= 1.0


@dataclass(frozen=True)
class RobustnessInput:
    """頑健性上界の入力（すべて 0 以上）"""
    delta_s: float
    delta_m: float
    hist_err: float
    hist_err_tilde: float
    max_effect_infnorm: float
    state_infnorm: float

    def __post_init__(self) -> None:
        for name in ("delta_s", "delta_m", "hist_err", "hist_err_tilde",
                     "max_effect_infnorm", "state_infnorm"):
            if not getattr(self, name) >= 0:
                raise InvalidInputError(f"{name} は 0 以上が必要です: {getattr(self, name)}")


def frequencies(
    outcomes: Sequence[Sequence[int]],
    num_outcomes: Sequence[int],
    plan_fingerprint: Optional[str] = None,
) -> Dataset:
    """
    生の結果インデックス列をビンに分けて Dataset を作る

    Args:
        outcomes: 設定ごとの結果インデックスのリスト
        num_outcomes: 設定ごとの結果数 N_l
        plan_fingerprint: 測定計画のフィンガープリント（任意）

    Returns:
        Dataset
    """
    if len(outcomes) != len(num_outcomes):
        raise InvalidInputError("設定数が一致しません")
    counts: List[np.ndarray] = []
    for index, (seq, n) in enumerate(zip(outcomes, num_outcomes)):
        arr = np.asarray(seq, dtype=np.int64).reshape(-1)
        if arr.size == 0:
            raise InvalidInputError(f"設定 {index} の結果が空です（R_l ≥ 1 が必要）")
        if arr.min() < 0 or arr.max() >= n:
            raise InvalidInputError(f"設定 {index} の結果インデックスが範囲外です（N = {n}）")
        counts.append(np.bincount(arr, minlength=n))
    return Dataset(tuple(counts), plan_fingerprint)


def _check_shapes(est: AffineEstimator, counts: Sequence[np.ndarray]) -> None:
    if len(counts) != est.num_settings:
        raise InvalidInputError(
            f"設定数が一致しません: 推定量 {est.num_settings}, データ {len(counts)}"
        )
    for index, (a, c) in enumerate(zip(est.coefficients, counts)):
        if a.size != len(c):
            raise InvalidInputError(f"設定 {index}: 結果数が一致しません（{a.size} != {len(c)}）")


def estimate(est: AffineEstimator, data: Dataset) -> float:
    """
    データに推定量を適用

    Args:
        est: アフィン推定量
        data: 結果カウント

    Returns:
        Σ_l R_l⟨a^(l), f^(l)⟩ + c（[0, 1] にはクリップしない）
    """
    if data.plan_fingerprint is not None and data.plan_fingerprint != est.plan_fingerprint:
        raise IntegrityError("データの計画フィンガープリントが推定量と一致しません")
    _check_shapes(est, data.counts)
    for index, (r, total) in enumerate(zip(est.repetitions, data.repetitions)):
        if r != total:
            raise InvalidInputError(f"設定 {index}: 繰り返し回数が一致しません（{r} != {total}）")
    value = sum(float(a @ c) for a, c in zip(est.coefficients, data.counts))
    return value + est.constant


def estimate_from_frequencies(est: AffineEstimator, freqs: Sequence[Sequence[float]]) -> float:
    """相対頻度から推定（R_l は推定量のものを使う）"""
    arrays = [np.asarray(f, dtype=float) for f in freqs]
    _check_shapes(est, arrays)
    return sum(r * float(a @ f) for a, f, r in zip(est.coefficients, arrays, est.repetitions)) \
        + est.constant


def evaluate(est: AffineEstimator, data: Dataset) -> EstimateReport:
    report = EstimateReport(estimate(est, data), est.risk, est.confidence, est.quantity)
    if not report.physical:
        logger.warning(f"推定値 {report.value:.6g} が [0, 1] の外にあります（クリップしません）")
    return report


def coefficient_norm(est: AffineEstimator) -> float:
    """‖C_a R‖₁ = Σ_l R_l Σ_k |a^(l)_k|"""
    return float(sum(r * np.abs(a).sum() for a, r in zip(est.coefficients, est.repetitions)))


def robustness_bound(est: AffineEstimator, rin: RobustnessInput) -> float:
    """
    状態と POVM の摂動に対する推定値のずれの上界

    ‖C_a R‖₁ · (max‖E‖∞·δ_S + ‖σ‖∞·δ_M + δ_M·δ_S + δ + δ̃)
    """
    spread = (
        rin.max_effect_infnorm * rin.delta_s
        + rin.state_infnorm * rin.delta_m
        + rin.delta_m * rin.delta_s
        + rin.hist_err
        + rin.hist_err_tilde
    )
    return coefficient_norm(est) * spread


def robust_risk(est: AffineEstimator, rin: RobustnessInput) -> float:
    """摂動込みで区間を広げたときの半幅"""
    return est.risk + robustness_bound(est, rin)


class EstimatorDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int
    constant: float
    risk: float
    epsilon: float
    epsilon_o: float
    repetitions: List[int]
    coefficients: List[List[float]]
    plan_fingerprint: str
    quantity: str = "fidelity"


def serialize(est: AffineEstimator) -> bytes:
    doc = EstimatorDocument(
        version=SCHEMA_VERSION,
        constant=est.constant,
        risk=est.risk,
        epsilon=est.epsilon,
        epsilon_o=est.epsilon_o,
        repetitions=list(est.repetitions),
        coefficients=[a.tolist() for a in est.coefficients],
        plan_fingerprint=est.plan_fingerprint,
        quantity=est.quantity,
    )
    return doc.model_dump_json(indent=2).encode("utf-8")


def deserialize(data: Union[str, bytes]) -> AffineEstimator:
    """
    推定量 JSON を読み込む

    Raises:
        ParseError: JSON が不正、またはバージョンが未知
        IntegrityError: フィンガープリントが壊れている
    """
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"推定量 JSON を解析できません: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError("推定量 JSON はオブジェクトである必要があります")
    if raw.get("version") != SCHEMA_VERSION:
        raise ParseError(f"未知のスキーマバージョンです: {raw.get('version')}")
    try:
        doc = EstimatorDocument.model_validate(raw)
    except ValidationError as e:
        raise ParseError(f"推定量 JSON の形式が不正です: {e}") from e
    return AffineEstimator(
        coefficients=tuple(np.asarray(a) for a in doc.coefficients),
        repetitions=tuple(doc.repetitions),
        constant=doc.constant,
        risk=doc.risk,
        epsilon=doc.epsilon,
        epsilon_o=doc.epsilon_o,
        plan_fingerprint=doc.plan_fingerprint,
        quantity=doc.quantity,
    )


def load_estimator(path: Union[str, Path]) -> AffineEstimator:
    return deserialize(Path(path).read_bytes())


def dump_dataset(data: Dataset) -> str:
    doc = DatasetDocument(
        counts=[c.tolist() for c in data.counts],
        plan_fingerprint=data.plan_fingerprint,
    )
    return doc.model_dump_json(indent=2, exclude_none=True)


def load_dataset(path: Union[str, Path]) -> Dataset:
    doc = parse_model(DatasetDocument, read_text(path))
    if doc.version != SCHEMA_VERSION:
        raise ParseError(f"未知のスキーマバージョンです: {doc.version}")
    return Dataset(tuple(np.asarray(c) for c in doc.counts), doc.plan_fingerprint)
