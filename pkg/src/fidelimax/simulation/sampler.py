"""
ボルン確率からの結果サンプリング
"""
import logging
from typing import List, Optional, Sequence

import numpy as np

from ..core.errors import InvalidInputError
from ..core.pauli import PauliString, pauli_matrix
from ..core.quantum import DensityMatrix, MeasurementPlan, born_probs
from ..core.rng import make_rng
from ..minimax.estimator import Dataset

logger = logging.getLogger(__name__)


def outcomes_from_uniforms(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """
    累積分布の逆関数で一様乱数を結果インデックスに変換

    確率 0 の結果は選ばれない（同値は小さいインデックス側に寄せる）。
    """
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, uniforms, side="right")
    return np.clip(idx, 0, len(probs) - 1)


def sample_outcome_indices(
    plan: MeasurementPlan, true_state: DensityMatrix, rng: np.random.Generator
) -> List[np.ndarray]:
    """設定ごとに R_l 個の結果インデックスを引く"""
    if true_state.dim != plan.dim:
        raise InvalidInputError(f"次元が一致しません: 計画 {plan.dim}, 状態 {true_state.dim}")
    outcomes = []
    for setting in plan.settings:
        p = born_probs(setting, true_state, plan.epsilon_o)
        outcomes.append(outcomes_from_uniforms(p, rng.random(setting.repetitions)))
    return outcomes


def sample_outcomes(plan: MeasurementPlan, true_state: DensityMatrix, seed: int) -> Dataset:
    """
    測定計画を真の状態で実行したときのカウントを生成

    Args:
        plan: 測定計画
        true_state: 実際に準備された状態
        seed: 乱数シード

    Returns:
        計画のフィンガープリント付きの Dataset
    """
    rng = make_rng(seed)
    indices = sample_outcome_indices(plan, true_state, rng)
    counts = tuple(
        np.bincount(idx, minlength=s.num_outcomes) for idx, s in zip(indices, plan.settings)
    )
    return Dataset(counts, plan.fingerprint)


def sample_randomized_scheme(
    samples: Sequence[PauliString],
    true_state: DensityMatrix,
    epsilon_o: float,
    seed: int,
    plan_fingerprint: Optional[str] = None,
) -> Dataset:
    """
    サンプルした符号付きパウリ S を 1 回ずつ測り、実効二値 POVM のカウントにまとめる

    S の +1 固有値（W の結果を符号で反転したもの）を Θ（結果 0）に数える。
    """
    if not samples:
        raise InvalidInputError("サンプルが空です")
    rng = make_rng(seed)
    cache = {}
    passes = 0
    for p, u in zip(samples, rng.random(len(samples))):
        key = str(p)
        if key not in cache:
            # tr((I + S)/2 σ) を ε_o で平滑化
            prob = (1.0 + true_state.expectation(pauli_matrix(p))) / 2.0
            cache[key] = (min(max(prob, 0.0), 1.0) + epsilon_o / 2.0) / (1.0 + epsilon_o)
        passes += int(u < cache[key])
    counts = np.array([passes, len(samples) - passes])
    return Dataset((counts,), plan_fingerprint)
