"""
直接忠実度推定（DFE）によるパウリ測定の処方

パウリ W_i（恒等を含む）を Pr(i) = tr(ρW_i)²/d で ℓ 回引き、
引いた W_i ごとに m_i 回測って期待値を推定する。
定数 ℓ = ⌈1/(r²ε)⌉ と m_i = ⌈2 ln(2/ε)/(ℓ·tr(ρW_i)²·r²)⌉ は加法誤差 r を信頼度 1−2ε で保証する標準的な処方。
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..core.errors import IntegrityError, InvalidInputError, ResourceLimitError
from ..core.pauli import PauliString, all_pauli_strings, pauli_matrix, qubit_count
from ..core.quantum import DEFAULT_EPSILON_O, DensityMatrix, MeasurementPlan
from ..core.rng import make_rng
from ..minimax.estimator import Dataset
from ..minimax.risk import MAX_SAMPLES
from .generators import pauli_povm

logger = logging.getLogger(__name__)

# |tr(ρW)| がこれ以下のパウリは Pr(i) ≈ 0 なので引かれない
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class DfeScheme:
    """
    DFE の処方

    plan の l 番目の設定は paulis[l] の測定で、draws[l] 回引かれたものをまとめている。
    """
    plan: MeasurementPlan
    paulis: Tuple[PauliString, ...]
    expectations: Tuple[float, ...]
    draws: Tuple[int, ...]
    identity_draws: int
    num_draws: int

    @property
    def shots_per_draw(self) -> Tuple[int, ...]:
        return tuple(s.repetitions // c for s, c in zip(self.plan.settings, self.draws))


def _bounded_count(bound: float, what: str) -> int:
    if not math.isfinite(bound) or bound > MAX_SAMPLES:
        raise ResourceLimitError(f"{what}が上限 2^62 を超えます: {bound:.3e}")
    return int(math.ceil(bound))


def required_shots(num_draws: int, expectation: float, risk: float, epsilon: float) -> int:
    """m_i = ⌈2 ln(2/ε)/(ℓ·tr(ρW_i)²·r²)⌉"""
    bound = 2.0 * math.log(2.0 / epsilon) / (num_draws * expectation ** 2 * risk ** 2)
    return _bounded_count(bound, "1 回あたりの測定回数 m_i")


def dfe_scheme(
    target: DensityMatrix,
    risk: float,
    epsilon: float,
    seed: int,
    mode: str = "subspace",
    epsilon_o: float = DEFAULT_EPSILON_O,
) -> DfeScheme:
    """
    DFE の測定計画を作る

    Args:
        target: 目標の純粋状態（d = 2^n）
        risk: 目標の加法誤差 r
        epsilon: 信頼パラメータ
        seed: 乱数シード
        mode: パウリ測定の POVM（subspace / eigenbasis）
        epsilon_o: 計画の平滑化パラメータ

    Returns:
        DfeScheme
    """
    if not target.is_pure:
        raise InvalidInputError("target は純粋状態である必要があります")
    if not 0 < risk < 1:
        raise InvalidInputError(f"リスクは (0, 1) の範囲が必要です: {risk}")
    if not 0 < epsilon < 1:
        raise InvalidInputError(f"epsilon は (0, 1) の範囲が必要です: {epsilon}")
    n = qubit_count(target.dim)
    d = target.dim
    paulis = all_pauli_strings(n, include_identity=True)
    expectations = np.array([target.expectation(pauli_matrix(p)) for p in paulis])
    weights = expectations ** 2 / d
    weights[np.abs(expectations) <= WEIGHT_FLOOR] = 0.0
    weights /= weights.sum()

    num_draws = _bounded_count(1.0 / (risk ** 2 * epsilon), "引く回数 ℓ")
    rng = make_rng(seed)
    picks = rng.choice(len(paulis), size=num_draws, p=weights)
    counts = Counter(int(i) for i in picks)

    settings = []
    chosen = []
    values = []
    draws = []
    identity_draws = counts.pop(0, 0)
    for index in sorted(counts):
        e = float(expectations[index])
        shots = required_shots(num_draws, e, risk, epsilon)
        c = counts[index]
        settings.append(pauli_povm(paulis[index], mode, repetitions=c * shots))
        chosen.append(paulis[index])
        values.append(e)
        draws.append(c)

    plan = MeasurementPlan(target=target, epsilon=epsilon, settings=tuple(settings),
                           epsilon_o=epsilon_o)
    logger.info(
        f"DFE: ℓ = {num_draws}（恒等 {identity_draws} 回）, 異なるパウリ {len(settings)} 個, "
        f"総測定回数 {sum(plan.repetitions)}"
    )
    return DfeScheme(plan, tuple(chosen), tuple(values), tuple(draws), identity_draws, num_draws)


def dfe_estimate(scheme: DfeScheme, data: Dataset) -> float:
    """
    Y = (1/ℓ) Σ_draws x̂_i / tr(ρW_i)（恒等の回は 1）

    x̂_i は結果の値（固有値）の標本平均。
    """
    if data.plan_fingerprint is not None and data.plan_fingerprint != scheme.plan.fingerprint:
        raise IntegrityError("データの計画フィンガープリントが DFE 計画と一致しません")
    if len(data.counts) != scheme.plan.num_settings:
        raise InvalidInputError("設定数が DFE 計画と一致しません")
    total = float(scheme.identity_draws)
    for setting, counts, e, c in zip(scheme.plan.settings, data.counts, scheme.expectations,
                                     scheme.draws):
        if len(counts) != setting.num_outcomes or int(counts.sum()) != setting.repetitions:
            raise InvalidInputError(f"設定 '{setting.label}' のカウントが計画と一致しません")
        values = np.asarray(setting.values, dtype=float)
        mean = float(values @ counts) / setting.repetitions
        total += c * mean / e
    return total / scheme.num_draws
