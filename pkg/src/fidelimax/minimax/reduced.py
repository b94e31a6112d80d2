"""
二値の実効 POVM {Θ, I−Θ}（Θ = ω₁ρ + ω₂(I−ρ)）に対する次元によらない鞍点計算

χᵢ = aᵢρ + (1−aᵢ)(I−ρ)/(d−1) と置くと内側の最大化は (a₁, a₂) ∈ [0,1]² の 2 変数問題になる。
"""
import logging
from typing import Optional, Tuple

import numpy as np

from ..core.config import SolverConfig
from ..core.errors import InvalidInputError
from ..core.quantum import DEFAULT_EPSILON_O, DensityMatrix, MeasurementPlan, PovmSetting
from .ascent import AscentResult, accelerated_ascent
from .saddle import OuterResult, SaddlePoint, minimize_over_alpha

logger = logging.getLogger(__name__)

SPAN_TOL = 1e-8


def effective_setting(
    target: DensityMatrix,
    omega1: float,
    omega2: float,
    repetitions: int,
    label: str = "effective",
) -> PovmSetting:
    """{Θ, I−Θ} の測定設定（結果 0 が Θ）"""
    _check_omegas(omega1, omega2)
    d = target.dim
    complement = np.eye(d) - target.matrix
    theta = omega1 * target.matrix + omega2 * complement
    return PovmSetting(label=label, effects=np.stack([theta, np.eye(d) - theta]),
                       repetitions=repetitions)


def effective_plan(
    target: DensityMatrix,
    omega1: float,
    omega2: float,
    repetitions: int,
    epsilon: float,
    epsilon_o: float = DEFAULT_EPSILON_O,
) -> MeasurementPlan:
    return MeasurementPlan(
        target=target,
        epsilon=epsilon,
        settings=(effective_setting(target, omega1, omega2, repetitions),),
        epsilon_o=epsilon_o,
    )


def _check_omegas(omega1: float, omega2: float) -> None:
    if not (0 <= omega2 < omega1 <= 1):
        raise InvalidInputError(f"0 ≤ ω₂ < ω₁ ≤ 1 が必要です: ω₁={omega1}, ω₂={omega2}")


def reduce_two_outcome(plan: MeasurementPlan) -> Tuple[float, float]:
    """
    計画が span{ρ, I−ρ} 内の二値 POVM 1 つだけからなるか判定し (ω₁, ω₂) を返す

    効果の順序はどちらでもよい（ω₁ > ω₂ となる方を Θ とみなす）。

    Raises:
        InvalidInputError: 条件を満たさないとき
    """
    if plan.observable is not None:
        raise InvalidInputError("観測量の推定には縮約ソルバーを使えません")
    if plan.num_settings != 1 or plan.settings[0].num_outcomes != 2:
        raise InvalidInputError("縮約ソルバーには二値 POVM の設定が 1 つだけ必要です")
    d = plan.dim
    if d < 2:
        raise InvalidInputError("縮約ソルバーには次元 2 以上が必要です")
    rho = plan.target.matrix
    complement = np.eye(d) - rho
    for effect in plan.settings[0].effects:
        omega1 = float(np.real(np.trace(rho @ effect)))
        omega2 = float(np.real(np.trace(complement @ effect))) / (d - 1)
        residual = np.max(np.abs(effect - omega1 * rho - omega2 * complement))
        if residual > SPAN_TOL:
            raise InvalidInputError(f"効果が span{{ρ, I−ρ}} に入っていません（残差 {residual:.3e}）")
        if omega1 > omega2:
            return omega1, omega2
    raise InvalidInputError("ω₁ > ω₂ となる効果がありません（POVM が状態を区別しません）")


class _ReducedProblem:
    """(a₁, a₂) 上の目的関数と勾配"""

    def __init__(self, omega1: float, omega2: float, repetitions: int, epsilon_o: float):
        self.omega2 = omega2
        self.gap = omega1 - omega2
        self.reps = float(repetitions)
        self.epsilon_o = epsilon_o
        self.scale = 1.0 + epsilon_o

    def probs(self, a: float) -> np.ndarray:
        t = self.omega2 + self.gap * a
        return np.array([t, 1.0 - t]) + self.epsilon_o / 2.0

    def objective(self, x: np.ndarray, alpha: float) -> float:
        s = float(np.sum(np.sqrt(self.probs(x[0]) * self.probs(x[1])))) / self.scale
        return float(x[0] - x[1]) + 2.0 * alpha * self.reps * np.log(s)

    def gradient(self, x: np.ndarray, alpha: float) -> np.ndarray:
        p1 = self.probs(x[0])
        p2 = self.probs(x[1])
        s = float(np.sum(np.sqrt(p1 * p2)))
        # p は (1+ε_o) で割る前の値なので S の比では打ち消し合う
        factor = alpha * self.reps * self.gap / s
        r = np.sqrt(p2 / p1)
        g1 = 1.0 + factor * (r[0] - r[1])
        g2 = -1.0 + factor * (1.0 / r[0] - 1.0 / r[1])
        return np.array([g1, g2])


def _project_box(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def _assemble(target: DensityMatrix, a: float) -> DensityMatrix:
    d = target.dim
    complement = (np.eye(d) - target.matrix) / (d - 1)
    return DensityMatrix(a * target.matrix + (1.0 - a) * complement)


def _solve(
    target: DensityMatrix,
    omega1: float,
    omega2: float,
    repetitions: int,
    epsilon: float,
    epsilon_o: float,
    config: SolverConfig,
) -> OuterResult:
    problem = _ReducedProblem(omega1, omega2, repetitions, epsilon_o)

    def inner(alpha: float, x0: np.ndarray) -> AscentResult:
        return accelerated_ascent(
            lambda x: problem.objective(x, alpha),
            lambda x: problem.gradient(x, alpha),
            _project_box,
            x0,
            config,
            tolerance=config.inner_tolerance,
            max_iters=config.inner_max_iters,
            stall_iterations=config.stall_iterations,
            gradient_tolerance=config.gradient_tolerance,
        )

    return minimize_over_alpha(inner, np.array([1.0, 1.0 / target.dim]), epsilon, config)


def _saddle_point(
    plan: MeasurementPlan, outer: OuterResult, config: SolverConfig
) -> SaddlePoint:
    a1, a2 = (float(v) for v in outer.inner.x)
    if not outer.inner.converged:
        logger.warning("最終的な内側最大化が収束していません")
    return SaddlePoint(
        chi1_star=_assemble(plan.target, a1),
        chi2_star=_assemble(plan.target, a2),
        alpha_star=outer.alpha,
        saddle_value=max(outer.value, 0.0),
        precision=config.reported_precision,
        iterations=outer.iterations,
        converged=outer.inner.converged,
        state_gap=(a1 - a2) / 2.0,
        plan_fingerprint=plan.fingerprint,
        boundary_hit=outer.boundary_hit,
        evaluations=outer.evaluations,
    )


def solve_reduced_two_outcome(
    target: DensityMatrix,
    omega1: float,
    omega2: float,
    repetitions: int,
    epsilon: float,
    config: Optional[SolverConfig] = None,
    epsilon_o: float = DEFAULT_EPSILON_O,
) -> Tuple[SaddlePoint, MeasurementPlan]:
    """
    実効 POVM の鞍点を 2 変数の内側問題で解く

    Returns:
        (SaddlePoint, 対応する実効測定計画)

    Raises:
        InvalidInputError: ω₁ ≤ ω₂ のとき
    """
    _check_omegas(omega1, omega2)
    if target.dim < 2:
        raise InvalidInputError("縮約ソルバーには次元 2 以上が必要です")
    config = config or SolverConfig()
    plan = effective_plan(target, omega1, omega2, repetitions, epsilon, epsilon_o)
    outer = _solve(target, omega1, omega2, repetitions, epsilon, epsilon_o, config)
    sp = _saddle_point(plan, outer, config)
    logger.info(f"縮約鞍点: α* = {sp.alpha_star:.6g}, リスク {sp.risk:.6g}")
    return sp, plan


def solve_reduced_plan(plan: MeasurementPlan, config: Optional[SolverConfig] = None) -> SaddlePoint:
    """既存の計画が実効 POVM 1 つからなるとき縮約ソルバーで解く"""
    omega1, omega2 = reduce_two_outcome(plan)
    config = config or SolverConfig()
    outer = _solve(
        plan.target, omega1, omega2, plan.settings[0].repetitions,
        plan.epsilon, plan.epsilon_o, config,
    )
    return _saddle_point(plan, outer, config)
