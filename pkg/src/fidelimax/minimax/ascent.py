"""
加速射影勾配法（Nesterov の第 2 の方法、Tseng 版）

反復点は常に実行可能領域の凸結合として作られるので、目的関数は領域の外で評価されない。
リプシッツ定数は未知として、二次下界条件によるバックトラッキングで歩幅を決める。
目的値が悪化した反復ではモメンタムを捨て、アルミホ条件付きの射影勾配ステップに戻す。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..core.config import AscentConfig

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]
Projection = Callable[[np.ndarray], np.ndarray]

MIN_STEP = 1e-20


@dataclass
class AscentResult:
    """最大化の結果"""
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    gradient_norm: float


def projected_gradient_norm(x: np.ndarray, gradient: Gradient, project: Projection) -> float:
    """単位歩幅の勾配写像ノルム ‖P(x + ∇f(x)) − x‖"""
    return float(np.linalg.norm(project(x + gradient(x)) - x))


def _armijo_step(
    x: np.ndarray,
    fx: float,
    objective: Objective,
    gradient: Gradient,
    project: Projection,
    step: float,
    config: AscentConfig,
) -> Tuple[np.ndarray, float, float]:
    g = gradient(x)
    while step > MIN_STEP:
        candidate = project(x + step * g)
        value = objective(candidate)
        if value >= fx + config.sufficient_increase * float(g @ (candidate - x)):
            return candidate, value, step
        step *= config.step_shrink
    # 数値的に停留点: 歩幅は初期値に戻す
    return x, fx, config.initial_step


def accelerated_ascent(
    objective: Objective,
    gradient: Gradient,
    project: Projection,
    x0: np.ndarray,
    config: AscentConfig,
    tolerance: float,
    max_iters: int,
    stall_iterations: int = 20,
    gradient_tolerance: Optional[float] = None,
    check_every: int = 10,
) -> AscentResult:
    """
    凹関数を凸集合上で最大化する

    Args:
        objective: 目的関数
        gradient: 目的関数の勾配（同じ座標系）
        project: 実行可能領域への射影
        x0: 初期点（射影してから使う）
        config: バックトラッキング設定
        tolerance: 相対変化の許容値
        max_iters: 最大反復回数
        stall_iterations: 相対変化が tolerance 未満の反復がこの回数続いたら収束とみなす
        gradient_tolerance: 勾配写像ノルムがこれ以下なら収束（None なら判定しない）
        check_every: 勾配写像ノルムを評価する間隔

    Returns:
        AscentResult
    """
    x = project(np.asarray(x0, dtype=float))
    fx = objective(x)
    z = x.copy()
    theta = 1.0
    step = config.initial_step
    stall = 0
    grad_norm = float("inf")

    for iteration in range(1, max_iters + 1):
        y = (1.0 - theta) * x + theta * z
        fy = objective(y)
        gy = gradient(y)
        step = min(step / config.step_shrink, config.initial_step)
        while True:
            z_new = project(z + (step / theta) * gy)
            x_new = (1.0 - theta) * x + theta * z_new
            f_new = objective(x_new)
            d = x_new - y
            model = fy + float(gy @ d) - float(d @ d) / (2.0 * step)
            if f_new >= model - 1e-12 * max(1.0, abs(fy)) or step <= MIN_STEP:
                break
            step *= config.step_shrink

        if f_new < fx:
            # 非単調: モメンタムを捨てて射影勾配ステップ
            x_new, f_new, step = _armijo_step(x, fx, objective, gradient, project, step, config)
            z = x_new.copy()
            theta = 1.0
        else:
            z = z_new
            theta = (np.sqrt(theta ** 4 + 4.0 * theta ** 2) - theta ** 2) / 2.0

        change = abs(f_new - fx) / max(1.0, abs(fx))
        x, fx = x_new, f_new
        stall = stall + 1 if change < tolerance else 0

        if gradient_tolerance is not None and (iteration % check_every == 0 or stall > 0):
            grad_norm = projected_gradient_norm(x, gradient, project)
            if grad_norm <= gradient_tolerance:
                logger.debug(f"勾配写像ノルム {grad_norm:.3e} で収束（反復 {iteration}）")
                return AscentResult(x, fx, iteration, True, grad_norm)
        if stall >= stall_iterations:
            logger.debug(f"相対変化が {stall_iterations} 回連続で許容値未満（反復 {iteration}）")
            return AscentResult(x, fx, iteration, True, grad_norm)
        if iteration % 100 == 0:
            logger.debug(f"反復 {iteration}: 目的値 {fx:.10g}, 歩幅 {step:.3e}")

    logger.debug(f"{max_iters} 回の反復で収束しませんでした（目的値 {fx:.10g}）")
    return AscentResult(x, fx, max_iters, False, grad_norm)
