"""
鞍点の計算とミニマックス推定量の抽出

2R̂* = inf_{α>0} { 2α ln(2/ε) + max_{χ₁,χ₂} [ tr(gχ₁) − tr(gχ₂) + 2α ln AffH(A(χ₁), A(χ₂)) ] }

外側は log₁₀ α 上の有界スカラー最小化、内側は密度行列の対に対する加速射影勾配法で解く。
g は目標状態 ρ（忠実度）または観測量 O。
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from ..core.config import SolverConfig
from ..core.errors import IntegrityError, InvalidInputError, SingularityError
from ..core.quantum import (
    DensityMatrix,
    HermitianEmbedding,
    MeasurementPlan,
    born_probs,
    project_density_array,
    symmetrize,
)
from .ascent import AscentResult, accelerated_ascent
from .estimator import AffineEstimator

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-3

StateLike = Union[DensityMatrix, np.ndarray]


@dataclass(frozen=True, eq=False)
class SaddlePoint:
    """
    鞍点の近似解

    saddle_value は精度 δ を足す前の 2R̂*。
    state_gap = (tr(gχ₁*) − tr(gχ₂*))/2 は親和度制約が効いている厳密解では saddle_value/2 に一致する。
    """
    chi1_star: DensityMatrix
    chi2_star: DensityMatrix
    alpha_star: float
    saddle_value: float
    precision: float
    iterations: int
    converged: bool
    state_gap: float
    plan_fingerprint: str
    boundary_hit: bool = False
    evaluations: int = 0

    @property
    def risk(self) -> float:
        return self.saddle_value / 2.0 + self.precision


@dataclass(frozen=True)
class OuterResult:
    """log₁₀ α 上の最小化の結果（内側の解は埋め込み座標のまま）"""
    alpha: float
    value: float
    inner: AscentResult
    evaluations: int
    iterations: int
    boundary_hit: bool


def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """tr(AB)（エルミート行列どうし）"""
    return float(np.real(np.sum(a * b.T)))


def _matrix(state: StateLike) -> np.ndarray:
    return state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, dtype=np.complex128)


class _PlanArrays:
    """計画の効果を連結した前計算（R_l = 0 の設定は目的関数に寄与しないので除く）"""

    def __init__(self, plan: MeasurementPlan):
        d = plan.dim
        self.dim = d
        self.g = np.asarray(plan.objective_operator)
        self.epsilon_o = plan.epsilon_o
        active = [s for s in plan.settings if s.repetitions > 0]
        self.reps = np.array([s.repetitions for s in active], dtype=float)
        sizes = [s.num_outcomes for s in active]
        self.offsets = np.cumsum([0] + sizes[:-1]).astype(int) if sizes else np.zeros(0, int)
        if active:
            self.effects = np.concatenate([s.effects for s in active])
        else:
            self.effects = np.zeros((0, d, d), dtype=np.complex128)
        # p_k = Σ_ij (E_k)_ji χ_ij
        self.flat = self.effects.transpose(0, 2, 1).reshape(-1, d * d)
        self.shift = np.repeat([plan.epsilon_o / n for n in sizes], sizes) if sizes else np.zeros(0)
        self.scale = 1.0 + plan.epsilon_o
        self.setting_of = np.repeat(np.arange(len(sizes)), sizes) if sizes else np.zeros(0, int)

    @property
    def empty(self) -> bool:
        return self.reps.size == 0

    def probs(self, chi: np.ndarray) -> np.ndarray:
        raw = (self.flat @ chi.reshape(-1)).real
        return (np.clip(raw, 0.0, None) + self.shift) / self.scale

    def overlaps(self, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
        """設定ごとの S_l = Σ_k √(p1_k p2_k)"""
        return np.add.reduceat(np.sqrt(p1 * p2), self.offsets)

    def objective(self, chi1: np.ndarray, chi2: np.ndarray, alpha: float) -> float:
        value = _trace_product(self.g, chi1) - _trace_product(self.g, chi2)
        if self.empty:
            return value
        s = self.overlaps(self.probs(chi1), self.probs(chi2))
        with np.errstate(divide="ignore"):
            return value + 2.0 * alpha * float(self.reps @ np.log(s))

    def gradient(
        self, chi1: np.ndarray, chi2: np.ndarray, alpha: float
    ) -> Tuple[np.ndarray, np.ndarray]:
        if self.empty:
            return self.g.copy(), -self.g.copy()
        p1 = self.probs(chi1)
        p2 = self.probs(chi2)
        if np.any(p1 <= 0) or np.any(p2 <= 0):
            raise SingularityError("確率 0 の結果があり勾配が定義できません（ε_o > 0 を使ってください）")
        s = self.overlaps(p1, p2)
        common = alpha * self.reps[self.setting_of] / (s[self.setting_of] * self.scale)
        w1 = common * np.sqrt(p2 / p1)
        w2 = common * np.sqrt(p1 / p2)
        g1 = self.g + np.tensordot(w1, self.effects, axes=1)
        g2 = -self.g + np.tensordot(w2, self.effects, axes=1)
        return symmetrize(g1), symmetrize(g2)


class _PairSpace:
    """(χ₁, χ₂) を長さ 2d² の実ベクトルとして扱う"""

    def __init__(self, dim: int):
        self.emb = HermitianEmbedding(dim)
        self.size = self.emb.size

    def pack(self, chi1: np.ndarray, chi2: np.ndarray) -> np.ndarray:
        return np.concatenate([self.emb.to_real(chi1), self.emb.to_real(chi2)])

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self.emb.from_real(x[: self.size]), self.emb.from_real(x[self.size:])

    def project(self, x: np.ndarray) -> np.ndarray:
        chi1, chi2 = self.unpack(x)
        return self.pack(project_density_array(chi1), project_density_array(chi2))


def inner_objective(
    plan: MeasurementPlan, alpha: float, chi1: StateLike, chi2: StateLike
) -> float:
    """f(χ₁, χ₂) = tr(gχ₁) − tr(gχ₂) + 2α ln AffH(A(χ₁), A(χ₂))"""
    if alpha <= 0:
        raise InvalidInputError(f"alpha は正の値が必要です: {alpha}")
    return _PlanArrays(plan).objective(_matrix(chi1), _matrix(chi2), alpha)


def inner_gradient(
    plan: MeasurementPlan, alpha: float, chi1: StateLike, chi2: StateLike
) -> Tuple[np.ndarray, np.ndarray]:
    """
    f の (χ₁, χ₂) に関する勾配（エルミート行列）

    ∂f/∂χ₁ = g + α Σ_l R_l Σ_k √(p₂_k/p₁_k) E_k / ((1+ε_o) S_l)、χ₂ は −g と p₁/p₂ で対称。

    Raises:
        SingularityError: ε_o = 0 で確率 0 の結果があるとき
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha は正の値が必要です: {alpha}")
    return _PlanArrays(plan).gradient(_matrix(chi1), _matrix(chi2), alpha)


def projected_gradient_norm(
    plan: MeasurementPlan, alpha: float, chi1: StateLike, chi2: StateLike
) -> float:
    """両ブロックをまとめた勾配写像ノルム ‖P(χ + ∇f) − χ‖_F"""
    m1, m2 = _matrix(chi1), _matrix(chi2)
    g1, g2 = inner_gradient(plan, alpha, m1, m2)
    d1 = project_density_array(m1 + g1) - m1
    d2 = project_density_array(m2 + g2) - m2
    return float(np.sqrt(np.sum(np.abs(d1) ** 2) + np.sum(np.abs(d2) ** 2)))


def _cold_start(plan: MeasurementPlan) -> Tuple[np.ndarray, np.ndarray]:
    d = plan.dim
    return plan.target.matrix.copy(), np.eye(d, dtype=np.complex128) / d


def _run_inner(
    arrays: _PlanArrays,
    space: _PairSpace,
    alpha: float,
    x0: np.ndarray,
    config: SolverConfig,
) -> AscentResult:
    def objective(x: np.ndarray) -> float:
        return arrays.objective(*space.unpack(x), alpha)

    def gradient(x: np.ndarray) -> np.ndarray:
        g1, g2 = arrays.gradient(*space.unpack(x), alpha)
        return space.pack(g1, g2)

    return accelerated_ascent(
        objective,
        gradient,
        space.project,
        x0,
        config,
        tolerance=config.inner_tolerance,
        max_iters=config.inner_max_iters,
        stall_iterations=config.stall_iterations,
        gradient_tolerance=config.gradient_tolerance,
    )


@dataclass(frozen=True)
class InnerSolution:
    chi1: DensityMatrix
    chi2: DensityMatrix
    value: float
    iterations: int
    converged: bool
    gradient_norm: float


def inner_maximize(
    plan: MeasurementPlan,
    alpha: float,
    config: Optional[SolverConfig] = None,
    start: Optional[Tuple[StateLike, StateLike]] = None,
) -> InnerSolution:
    """
    固定した α で内側の凹最大化を解く

    Args:
        plan: 測定計画
        alpha: 正の α
        config: ソルバー設定
        start: 初期点 (χ₁, χ₂)。省略時は (ρ, I/d)

    Returns:
        InnerSolution（収束しなければ converged=False で最終反復点を返す）
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha は正の値が必要です: {alpha}")
    config = config or SolverConfig()
    arrays = _PlanArrays(plan)
    space = _PairSpace(plan.dim)
    chi1, chi2 = (_matrix(start[0]), _matrix(start[1])) if start else _cold_start(plan)
    result = _run_inner(arrays, space, alpha, space.pack(chi1, chi2), config)
    if not result.converged:
        logger.warning(f"α = {alpha:.4g} の内側最大化が {result.iterations} 回で収束しませんでした")
    m1, m2 = space.unpack(result.x)
    return InnerSolution(
        DensityMatrix(m1), DensityMatrix(m2), result.value,
        result.iterations, result.converged, result.gradient_norm,
    )


def minimize_over_alpha(
    inner: Callable[[float, np.ndarray], AscentResult],
    x0: np.ndarray,
    epsilon: float,
    config: SolverConfig,
) -> OuterResult:
    """
    2α ln(2/ε) + max f を log₁₀ α について最小化する

    内側の解は直前の評価点からウォームスタートする。評価した中で最良の α を採用する。
    """
    budget = 2.0 * np.log(2.0 / epsilon)
    lo, hi = np.log10(config.alpha_lo), np.log10(config.alpha_hi)
    cache: Dict[float, Tuple[float, AscentResult]] = {}
    current = {"x": x0}

    def objective(log_alpha: float) -> float:
        log_alpha = float(log_alpha)
        if log_alpha in cache:
            return cache[log_alpha][0]
        alpha = 10.0 ** log_alpha
        result = inner(alpha, current["x"])
        current["x"] = result.x
        value = alpha * budget + result.value
        cache[log_alpha] = (value, result)
        logger.debug(
            f"α = {alpha:.6g}: 目的値 {value:.10g}（内側 {result.iterations} 反復, "
            f"収束 {result.converged}）"
        )
        return value

    minimize_scalar(
        objective, bounds=(lo, hi), method="bounded",
        options={"xatol": config.outer_tolerance},
    )
    best = min(cache, key=lambda k: cache[k][0])
    value, result = cache[best]
    boundary = abs(best - lo) < BOUNDARY_TOL or abs(best - hi) < BOUNDARY_TOL
    if boundary:
        logger.warning(f"最適な α = {10.0 ** best:.4g} が探索区間の端にあります")
    iterations = sum(r.iterations for _, r in cache.values())
    return OuterResult(10.0 ** best, value, result, len(cache), iterations, boundary)


def outer_minimize(plan: MeasurementPlan, config: Optional[SolverConfig] = None) -> SaddlePoint:
    """
    測定計画の鞍点を計算

    Args:
        plan: 測定計画
        config: ソルバー設定

    Returns:
        SaddlePoint
    """
    config = config or SolverConfig()
    arrays = _PlanArrays(plan)
    space = _PairSpace(plan.dim)
    outer = minimize_over_alpha(
        lambda alpha, x: _run_inner(arrays, space, alpha, x, config),
        space.pack(*_cold_start(plan)),
        plan.epsilon,
        config,
    )
    m1, m2 = space.unpack(outer.inner.x)
    sp = _make_saddle_point(plan, m1, m2, outer, config)
    logger.info(
        f"鞍点: α* = {sp.alpha_star:.6g}, 値 {sp.saddle_value:.8g}, "
        f"評価 {sp.evaluations} 回, 内側反復 {sp.iterations} 回"
    )
    return sp


def _make_saddle_point(
    plan: MeasurementPlan,
    m1: np.ndarray,
    m2: np.ndarray,
    outer: OuterResult,
    config: SolverConfig,
) -> SaddlePoint:
    chi1, chi2 = DensityMatrix(m1), DensityMatrix(m2)
    g = np.asarray(plan.objective_operator)
    gap = (_trace_product(g, chi1.matrix) - _trace_product(g, chi2.matrix)) / 2.0
    if not outer.inner.converged:
        logger.warning("最終的な内側最大化が収束していません")
    return SaddlePoint(
        chi1_star=chi1,
        chi2_star=chi2,
        alpha_star=outer.alpha,
        saddle_value=max(outer.value, 0.0),
        precision=config.reported_precision,
        iterations=outer.iterations,
        converged=outer.inner.converged,
        state_gap=gap,
        plan_fingerprint=plan.fingerprint,
        boundary_hit=outer.boundary_hit,
        evaluations=outer.evaluations,
    )


def eval_phi(
    plan: MeasurementPlan,
    chi1: StateLike,
    chi2: StateLike,
    phi: Sequence[Sequence[float]],
    alpha: float,
) -> float:
    """
    鞍点関数 Φ(χ₁, χ₂; φ, α) を ε_o 平滑化込みで評価
    """
    if alpha <= 0:
        raise InvalidInputError(f"alpha は正の値が必要です: {alpha}")
    if len(phi) != plan.num_settings:
        raise InvalidInputError(f"φ の設定数が一致しません: {len(phi)} != {plan.num_settings}")
    s1 = DensityMatrix(_matrix(chi1))
    s2 = DensityMatrix(_matrix(chi2))
    g = np.asarray(plan.objective_operator)
    value = (
        _trace_product(g, s1.matrix) - _trace_product(g, s2.matrix)
        + 2.0 * alpha * np.log(2.0 / plan.epsilon)
    )
    for index, (setting, coeffs) in enumerate(zip(plan.settings, phi)):
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (setting.num_outcomes,):
            raise InvalidInputError(f"設定 {index}: φ の長さが結果数と一致しません")
        if setting.repetitions == 0:
            continue
        p1 = born_probs(setting, s1, plan.epsilon_o)
        p2 = born_probs(setting, s2, plan.epsilon_o)
        value += alpha * setting.repetitions * (
            logsumexp(-c / alpha, b=p1) + logsumexp(c / alpha, b=p2)
        )
    return float(value)


def optimal_phi(
    plan: MeasurementPlan, chi1: DensityMatrix, chi2: DensityMatrix, alpha: float
) -> Tuple[np.ndarray, ...]:
    """φ^(l) = (α/2) ln(p₁^(l)/p₂^(l))"""
    phi = []
    for setting in plan.settings:
        p1 = born_probs(setting, chi1, plan.epsilon_o)
        p2 = born_probs(setting, chi2, plan.epsilon_o)
        if np.any(p1 <= 0) or np.any(p2 <= 0):
            raise SingularityError(
                f"設定 '{setting.label}' に確率 0 の結果があり係数を計算できません"
            )
        phi.append(alpha / 2.0 * np.log(p1 / p2))
    return tuple(phi)


def extract_estimator(sp: SaddlePoint, plan: MeasurementPlan) -> AffineEstimator:
    """
    鞍点からアフィン推定量を作る

    a^(l)_k = (α*/2) ln(p₁^(l)_k / p₂^(l)_k)、c = (tr(gχ₁*) + tr(gχ₂*))/2、risk = saddle/2 + δ
    """
    if sp.plan_fingerprint != plan.fingerprint:
        raise IntegrityError("鞍点と測定計画のフィンガープリントが一致しません")
    if not sp.converged:
        logger.warning("収束していない鞍点から推定量を作ります")
    g = np.asarray(plan.objective_operator)
    constant = (
        _trace_product(g, sp.chi1_star.matrix) + _trace_product(g, sp.chi2_star.matrix)
    ) / 2.0
    return AffineEstimator(
        coefficients=optimal_phi(plan, sp.chi1_star, sp.chi2_star, sp.alpha_star),
        repetitions=plan.repetitions,
        constant=constant,
        risk=sp.risk,
        epsilon=plan.epsilon,
        epsilon_o=plan.epsilon_o,
        plan_fingerprint=plan.fingerprint,
        quantity=plan.quantity,
    )


def build_estimator(
    plan: MeasurementPlan, config: Optional[SolverConfig] = None
) -> Tuple[AffineEstimator, SaddlePoint]:
    """outer_minimize と extract_estimator をまとめて実行"""
    sp = outer_minimize(plan, config)
    return extract_estimator(sp, plan), sp
