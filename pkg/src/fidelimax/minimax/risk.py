"""
リスクとサンプル複雑度の閉形式

二値の実効 POVM {Θ, I−Θ}（Θ = ω₁ρ + ω₂(I−ρ)）を R 回測るときのリスクと、
目標リスクを達成するのに十分な繰り返し回数を与える。
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

from ..core.errors import InvalidInputError, ResourceLimitError

logger = logging.getLogger(__name__)

MAX_SAMPLES = 2 ** 62
Interval = Tuple[float, float]


def _check_epsilon(epsilon: float) -> None:
    if not 0 < epsilon < 0.25:
        raise InvalidInputError(f"epsilon は (0, 0.25) の範囲が必要です: {epsilon}")


def _check_risk(risk: float) -> None:
    if not 0 < risk < 0.5:
        raise InvalidInputError(f"リスクは (0, 0.5) の範囲が必要です: {risk}")


def _check_repetitions(repetitions: int) -> None:
    if repetitions < 1:
        raise InvalidInputError(f"繰り返し回数は 1 以上が必要です: {repetitions}")


def gamma(epsilon: float, repetitions: int) -> float:
    """γ = (ε/2)^{2/R}"""
    return (epsilon / 2.0) ** (2.0 / repetitions)


def vartheta(epsilon: float) -> float:
    """ミニマックス保証の係数 ϑ(ε) = 2 + ln 64 / ln(0.25/ε)"""
    _check_epsilon(epsilon)
    return 2.0 + math.log(64.0) / math.log(0.25 / epsilon)


def risk_lower_bound(repetitions: int, epsilon: float) -> float:
    """R 回の測定で達成できるリスクの下界 (1/2)√(1 − (ε/2)^{2/R})"""
    _check_repetitions(repetitions)
    _check_epsilon(epsilon)
    return 0.5 * math.sqrt(1.0 - gamma(epsilon, repetitions))


def _sample_complexity(epsilon: float, shrink: float) -> int:
    """⌈2 ln(2/ε) / |ln(1 − shrink)|⌉"""
    if not 0 < shrink < 1:
        raise InvalidInputError(f"このリスクは達成できません（1 − {shrink:.6g} ≤ 0）")
    bound = 2.0 * math.log(2.0 / epsilon) / abs(math.log1p(-shrink))
    if not math.isfinite(bound) or bound > MAX_SAMPLES:
        raise ResourceLimitError(f"必要な繰り返し回数が上限 2^62 を超えます: {bound:.3e}")
    return int(math.ceil(bound))


def sample_complexity_optimal(risk: float, epsilon: float) -> int:
    """{ρ, I−ρ} を測るときに十分な繰り返し回数"""
    _check_risk(risk)
    _check_epsilon(epsilon)
    return _sample_complexity(epsilon, 4.0 * risk ** 2)


def sample_complexity_stabilizer(risk: float, epsilon: float, dim: int) -> int:
    """スタビライザー群を一様サンプリングするときに十分な繰り返し回数"""
    _check_risk(risk)
    _check_epsilon(epsilon)
    if dim < 2:
        raise InvalidInputError(f"次元は 2 以上が必要です: {dim}")
    return _sample_complexity(epsilon, (dim / (dim - 1)) ** 2 * risk ** 2)


def sample_complexity_pauli(risk: float, epsilon: float, norm: float, dim: int) -> int:
    """
    パウリ重みでサンプリングするときに十分な繰り返し回数

    Args:
        risk: 目標リスク
        epsilon: 信頼パラメータ
        norm: N = Σ_i |tr(ρW_i)|（恒等演算子を除く）
        dim: 次元
    """
    _check_risk(risk)
    _check_epsilon(epsilon)
    if norm <= 0:
        raise InvalidInputError(f"N は正の値が必要です: {norm}")
    if risk * dim / norm >= 1:
        raise InvalidInputError(f"リスク {risk} は N/d = {norm / dim:.6g} 未満である必要があります")
    return _sample_complexity(epsilon, (dim / norm) ** 2 * risk ** 2)


def sample_complexity_two_outcome(risk: float, epsilon: float, omega1: float, omega2: float) -> int:
    """一般の二値実効 POVM で十分な繰り返し回数"""
    _check_risk(risk)
    _check_epsilon(epsilon)
    if omega1 <= omega2:
        raise InvalidInputError(f"ω₁ > ω₂ が必要です: ω₁={omega1}, ω₂={omega2}")
    return _sample_complexity(epsilon, 4.0 * (omega1 - omega2) ** 2 * risk ** 2)


def pauli_norm_bound(dim: int) -> float:
    """純粋状態の N の上界 (d−1)√(d+1)"""
    if dim < 2:
        raise InvalidInputError(f"次元は 2 以上が必要です: {dim}")
    return (dim - 1) * math.sqrt(dim + 1)


def stabilizer_omegas(dim: int) -> Tuple[float, float]:
    """スタビライザー測定の実効 POVM の係数 (1, (d/2−1)/(d−1))"""
    if dim < 2:
        raise InvalidInputError(f"次元は 2 以上が必要です: {dim}")
    return 1.0, (dim / 2.0 - 1.0) / (dim - 1.0)


def pauli_scheme_omegas(norm: float, dim: int) -> Tuple[float, float]:
    """パウリ重みサンプリングの実効 POVM の係数 ((d+N−1)/(2N), (N−1)/(2N))"""
    if dim < 2:
        raise InvalidInputError(f"次元は 2 以上が必要です: {dim}")
    if norm < dim - 1 - 1e-9:
        raise InvalidInputError(f"純粋状態では N ≥ d − 1 です: N={norm}, d={dim}")
    norm = max(norm, dim - 1.0)
    return min((dim + norm - 1.0) / (2.0 * norm), 1.0), (norm - 1.0) / (2.0 * norm)


@dataclass(frozen=True)
class TwoOutcomeModel:
    """二値の実効 POVM を R 回測るモデル"""
    omega1: float
    omega2: float
    repetitions: int
    epsilon: float

    def __post_init__(self) -> None:
        if not (0 <= self.omega2 < self.omega1 <= 1):
            raise InvalidInputError(
                f"0 ≤ ω₂ < ω₁ ≤ 1 が必要です: ω₁={self.omega1}, ω₂={self.omega2}"
            )
        _check_repetitions(self.repetitions)
        _check_epsilon(self.epsilon)

    @classmethod
    def stabilizer(cls, delta: float, repetitions: int, epsilon: float) -> "TwoOutcomeModel":
        if delta < 2:
            raise InvalidInputError(f"δ は 2 以上が必要です: {delta}")
        return cls(1.0, (delta / 2.0 - 1.0) / (delta - 1.0), repetitions, epsilon)

    @property
    def gamma(self) -> float:
        return gamma(self.epsilon, self.repetitions)

    @property
    def threshold(self) -> float:
        """R₀ = ln(2/ε) / |ln(√(ω₁ω₂) + √((1−ω₁)(1−ω₂)))|"""
        overlap = math.sqrt(self.omega1 * self.omega2) + math.sqrt(
            (1 - self.omega1) * (1 - self.omega2)
        )
        if overlap <= 0:
            return 0.0
        if overlap >= 1:
            return math.inf
        return math.log(2.0 / self.epsilon) / abs(math.log(overlap))

    def _roots(self, omega: float) -> Tuple[float, float]:
        g = self.gamma
        spread = math.sqrt(omega * (1 - omega) * (1 - g) / g)
        return omega - spread, omega + spread

    @property
    def a1(self) -> Tuple[float, float]:
        return self._roots(self.omega1)

    @property
    def a2(self) -> Tuple[float, float]:
        return self._roots(self.omega2)

    @property
    def b(self) -> Tuple[float, float]:
        """b± = 2(1 − a^(2)_∓)"""
        lo, hi = self.a2
        return 2.0 * (1.0 - hi), 2.0 * (1.0 - lo)

    def feasible_intervals(self) -> List[Interval]:
        """A_a = [0,1] から開区間 (a^(1)_-, a^(1)_+) と (a^(2)_-, a^(2)_+) を除いたもの"""
        intervals: List[Interval] = [(0.0, 1.0)]
        for lo, hi in (self.a1, self.a2):
            if hi <= lo:
                continue
            kept: List[Interval] = []
            for a, b in intervals:
                if a <= lo:
                    kept.append((a, min(b, lo)))
                if b >= hi:
                    kept.append((max(a, hi), b))
            intervals = kept
        return intervals


def risk_two_outcome(model: TwoOutcomeModel) -> float:
    """
    二値の実効 POVM に対するミニマックス推定量のリスク

    R ≤ R₀ なら 0.5。そうでなければ
    √(1−γ)/(2(ω₁−ω₂)) · max_{a∈A_a} √(1 − (2a−1)²γ)
    で、最大値は A_a 内で 1/2 に最も近い点で取る。
    """
    if model.repetitions <= model.threshold:
        return 0.5
    g = model.gamma
    intervals = model.feasible_intervals()
    if not intervals:
        logger.debug("A_a が空です（数値誤差）。リスク 0.5 を返します")
        return 0.5
    best = min((min(max(0.5, a), b) for a, b in intervals), key=lambda a: abs(a - 0.5))
    value = math.sqrt(1 - g) / (2 * (model.omega1 - model.omega2)) * math.sqrt(
        1 - (2 * best - 1) ** 2 * g
    )
    return min(value, 0.5)


def risk_stabilizer(delta: float, repetitions: int, epsilon: float) -> float:
    """
    Θ = ρ + (δ/2−1)/(δ−1)·(I−ρ) のときの場合分けによるリスク
    """
    model = TwoOutcomeModel.stabilizer(delta, repetitions, epsilon)
    if repetitions <= model.threshold:
        return 0.5
    g = model.gamma
    prefactor = (delta - 1.0) / delta
    spread = math.sqrt((1 - g) / g * (delta - 2.0) / delta)
    b_minus = delta / (delta - 1.0) * (1 - spread)
    b_plus = delta / (delta - 1.0) * (1 + spread)
    if b_minus >= 1:
        value = prefactor * math.sqrt(1 - g)
    else:
        b = b_minus if abs(b_minus - 1) <= abs(b_plus - 1) else b_plus
        value = prefactor * (1 - g) * math.sqrt(1 + b * (2 - b) * g / (1 - g))
    return min(value, 0.5)


def risk_pauli(norm: float, dim: int, repetitions: int, epsilon: float) -> float:
    """パウリ重みサンプリングを R 回行うときのリスク"""
    omega1, omega2 = pauli_scheme_omegas(norm, dim)
    return risk_two_outcome(TwoOutcomeModel(omega1, omega2, repetitions, epsilon))
