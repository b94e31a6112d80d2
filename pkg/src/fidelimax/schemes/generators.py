"""
測定計画の生成: 目標基底の最適 POVM、スタビライザーサンプリング、パウリ重みサンプリング
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import InvalidInputError
from ..core.pauli import (
    PauliString,
    StabilizerGroup,
    all_pauli_strings,
    enumerate_group,
    pauli_eigenbasis,
    pauli_expectations,
    pauli_matrix,
    qubit_count,
    stabilizer_state,
)
from ..core.quantum import (
    DEFAULT_EPSILON_O,
    DensityMatrix,
    MeasurementPlan,
    PovmSetting,
    setting_violations,
    symmetrize,
)
from ..core.rng import make_rng
from ..minimax.reduced import effective_setting
from ..minimax.risk import pauli_norm_bound, pauli_scheme_omegas, stabilizer_omegas

logger = logging.getLogger(__name__)

MODES = ("subspace", "eigenbasis")


def _require_pure(target: DensityMatrix) -> None:
    if not target.is_pure:
        raise InvalidInputError("target は純粋状態である必要があります")


def optimal_povm(target: DensityMatrix, repetitions: int = 1) -> PovmSetting:
    """目標状態の基底での測定 {ρ, I−ρ}"""
    _require_pure(target)
    rho = target.matrix
    return PovmSetting(
        label="optimal",
        effects=np.stack([rho, np.eye(target.dim) - rho]),
        repetitions=repetitions,
    )


def pauli_povm(
    p: PauliString,
    mode: str = "subspace",
    repetitions: int = 1,
    label: Optional[str] = None,
) -> PovmSetting:
    """
    パウリ演算子の測定設定

    subspace: ±1 固有空間への射影 (I ± W)/2
    eigenbasis: 正準な固有基底の各ベクトルへの射影

    符号 −1 の文字列では射影はそのままで結果の値だけを反転する。
    """
    if p.is_identity:
        raise InvalidInputError("恒等演算子は測定設定にできません")
    if mode not in MODES:
        raise InvalidInputError(f"未知のモードです: {mode}（subspace または eigenbasis）")
    if mode == "subspace":
        w = pauli_matrix(p.unsigned)
        eye = np.eye(w.shape[0])
        effects = np.stack([(eye + w) / 2, (eye - w) / 2])
        values: Tuple[float, ...] = (float(p.sign), float(-p.sign))
    else:
        vectors, signed_values = pauli_eigenbasis(p)
        effects = np.einsum("ik,jk->kij", vectors, vectors.conj())
        values = tuple(float(v) for v in signed_values)
    return PovmSetting(
        label=label or str(p),
        effects=effects,
        repetitions=repetitions,
        values=values,
    )


def pauli_plan(
    target: DensityMatrix,
    paulis: Sequence[PauliString],
    repetitions: int,
    epsilon: float,
    mode: str = "subspace",
    epsilon_o: float = DEFAULT_EPSILON_O,
) -> MeasurementPlan:
    """各パウリを repetitions 回ずつ測る計画"""
    return MeasurementPlan(
        target=target,
        epsilon=epsilon,
        settings=tuple(pauli_povm(p, mode, repetitions) for p in paulis),
        epsilon_o=epsilon_o,
    )


def generator_plan(
    group: StabilizerGroup,
    repetitions: int,
    epsilon: float,
    count: Optional[int] = None,
    mode: str = "subspace",
    epsilon_o: float = DEFAULT_EPSILON_O,
) -> MeasurementPlan:
    """
    スタビライザー生成元の先頭 count 個だけを測る計画

    count < n では状態が一意に定まらず、リスクは 0.5 になる。
    """
    count = group.n_qubits if count is None else count
    if not 1 <= count <= group.n_qubits:
        raise InvalidInputError(f"生成元の数は 1 以上 {group.n_qubits} 以下が必要です: {count}")
    return pauli_plan(
        stabilizer_state(group), group.generators[:count], repetitions, epsilon, mode, epsilon_o
    )


@dataclass(frozen=True, eq=False)
class EffectivePovm:
    """
    ランダム化した測定の統計をまとめた二値 POVM {Θ, Δ_Θ}

    Θ = ω₁ρ + ω₂(I−ρ)、Δ_Θ = I − Θ
    """
    target: DensityMatrix
    omega1: float
    omega2: float

    def __post_init__(self) -> None:
        if not (0 <= self.omega2 < self.omega1 <= 1):
            raise InvalidInputError(
                f"0 ≤ ω₂ < ω₁ ≤ 1 が必要です: ω₁={self.omega1}, ω₂={self.omega2}"
            )
        issues = setting_violations("effective", np.stack([self.theta, self.delta_theta]), 0)
        if issues:
            raise InvalidInputError("; ".join(issues))

    @property
    def theta(self) -> np.ndarray:
        rho = self.target.matrix
        return symmetrize(self.omega1 * rho + self.omega2 * (np.eye(self.target.dim) - rho))

    @property
    def delta_theta(self) -> np.ndarray:
        return symmetrize(np.eye(self.target.dim) - self.theta)

    def as_setting(self, repetitions: int, label: str = "effective") -> PovmSetting:
        return effective_setting(self.target, self.omega1, self.omega2, repetitions, label)

    def plan(
        self, repetitions: int, epsilon: float, epsilon_o: float = DEFAULT_EPSILON_O
    ) -> MeasurementPlan:
        return MeasurementPlan(
            target=self.target,
            epsilon=epsilon,
            settings=(self.as_setting(repetitions),),
            epsilon_o=epsilon_o,
        )


def _merged_plan(
    target: DensityMatrix,
    samples: Sequence[PauliString],
    mode: str,
    epsilon: float,
    epsilon_o: float,
) -> MeasurementPlan:
    """サンプルした符号付きパウリを、重複をまとめて 1 設定ずつの計画にする"""
    counts: Dict[str, int] = Counter(str(p) for p in samples)
    first: Dict[str, PauliString] = {}
    for p in samples:
        first.setdefault(str(p), p)
    settings = [pauli_povm(first[key], mode, counts[key]) for key in first]
    return MeasurementPlan(target=target, epsilon=epsilon, settings=tuple(settings),
                           epsilon_o=epsilon_o)


@dataclass(frozen=True, eq=False)
class StabilizerScheme:
    """スタビライザー群から非恒等元を一様に（復元抽出で）R 個サンプルした測定"""
    group: StabilizerGroup
    target: DensityMatrix
    samples: Tuple[PauliString, ...]
    effective: EffectivePovm

    @property
    def repetitions(self) -> int:
        return len(self.samples)

    def plan(self, epsilon: float, epsilon_o: float = DEFAULT_EPSILON_O) -> MeasurementPlan:
        return self.effective.plan(self.repetitions, epsilon, epsilon_o)

    def sampled_plan(
        self, epsilon: float, mode: str = "subspace", epsilon_o: float = DEFAULT_EPSILON_O
    ) -> MeasurementPlan:
        return _merged_plan(self.target, self.samples, mode, epsilon, epsilon_o)


def stabilizer_scheme(group: StabilizerGroup, repetitions: int, seed: int) -> StabilizerScheme:
    """
    スタビライザー測定のスキーム

    Args:
        group: スタビライザー群
        repetitions: サンプルする元の数 R
        seed: 乱数シード

    Returns:
        StabilizerScheme（実効 POVM は ω₁ = 1, ω₂ = (d/2−1)/(d−1)）
    """
    if repetitions < 1:
        raise InvalidInputError(f"繰り返し回数は 1 以上が必要です: {repetitions}")
    elements = enumerate_group(group)[1:]
    rng = make_rng(seed)
    picks = rng.integers(0, len(elements), size=repetitions)
    target = stabilizer_state(group)
    omega1, omega2 = stabilizer_omegas(group.dim)
    logger.info(f"スタビライザー群（{len(elements)} 個の非恒等元）から {repetitions} 個をサンプル")
    return StabilizerScheme(
        group=group,
        target=target,
        samples=tuple(elements[i] for i in picks),
        effective=EffectivePovm(target, omega1, omega2),
    )


@dataclass(frozen=True, eq=False)
class PauliSchemeSpec:
    """
    非恒等パウリ W_i を確率 p_i = |tr(W_iρ)|/N で選ぶ測定の設計

    N = Σ_i |tr(W_iρ)|、signs は tr(W_iρ) の符号（0 は +1）。
    """
    target: DensityMatrix
    paulis: Tuple[PauliString, ...]
    probabilities: np.ndarray
    norm: float
    signs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.paulis),) or np.any(p < 0) or abs(float(p.sum()) - 1) > 1e-9:
            raise InvalidInputError("確率は長さがパウリ数と一致する確率ベクトルである必要があります")
        if self.norm <= 0:
            raise InvalidInputError("N が 0 です（純粋状態ではあり得ません）")
        if self.norm > pauli_norm_bound(self.target.dim) + 1e-8:
            raise InvalidInputError(f"N = {self.norm} が上界 (d−1)√(d+1) を超えます")

    @classmethod
    def from_target(cls, target: DensityMatrix) -> "PauliSchemeSpec":
        _require_pure(target)
        n = qubit_count(target.dim)
        paulis = tuple(all_pauli_strings(n))
        expectations = pauli_expectations(target, n)
        weights = np.abs(expectations)
        norm = float(weights.sum())
        return cls(
            target=target,
            paulis=paulis,
            probabilities=weights / norm,
            norm=norm,
            signs=np.where(expectations >= 0, 1, -1),
        )

    def signed(self, index: int) -> PauliString:
        p = self.paulis[index]
        return PauliString(p.letters, int(self.signs[index]))

    @property
    def effective(self) -> EffectivePovm:
        omega1, omega2 = pauli_scheme_omegas(self.norm, self.target.dim)
        return EffectivePovm(self.target, omega1, omega2)


@dataclass(frozen=True, eq=False)
class PauliScheme:
    """パウリ重みサンプリングの結果"""
    spec: PauliSchemeSpec
    samples: Tuple[PauliString, ...]
    effective: EffectivePovm

    @property
    def repetitions(self) -> int:
        return len(self.samples)

    def plan(self, epsilon: float, epsilon_o: float = DEFAULT_EPSILON_O) -> MeasurementPlan:
        return self.effective.plan(self.repetitions, epsilon, epsilon_o)

    def sampled_plan(
        self, epsilon: float, mode: str = "subspace", epsilon_o: float = DEFAULT_EPSILON_O
    ) -> MeasurementPlan:
        return _merged_plan(self.spec.target, self.samples, mode, epsilon, epsilon_o)


def sample_pauli_indices(spec: PauliSchemeSpec, count: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    return rng.choice(len(spec.paulis), size=count, p=spec.probabilities)


def pauli_scheme(target: DensityMatrix, repetitions: int, seed: int) -> PauliScheme:
    """
    パウリ重みサンプリングのスキーム

    各回で W_i を p_i で選び、符号 sign(tr(W_iρ)) を付けた S_i を測る（結果の反転）。
    """
    if repetitions < 1:
        raise InvalidInputError(f"繰り返し回数は 1 以上が必要です: {repetitions}")
    spec = PauliSchemeSpec.from_target(target)
    picks = sample_pauli_indices(spec, repetitions, seed)
    samples = tuple(spec.signed(int(i)) for i in picks)
    logger.info(f"パウリ重みサンプリング: N = {spec.norm:.6g}, R = {repetitions}")
    return PauliScheme(spec=spec, samples=samples, effective=spec.effective)
