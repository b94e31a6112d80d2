"""
繰り返し試行による実験: 被覆率、摂動に対する頑健性、リスク曲線
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..core.codec import SCHEMA_VERSION
from ..core.config import SolverConfig
from ..core.errors import IntegrityError, InvalidInputError, PerturbationError, retry
from ..core.pauli import PauliString, all_pauli_strings, qubit_count
from ..core.quantum import (
    DensityMatrix,
    MeasurementPlan,
    entrywise_norm1,
    entrywise_norm_inf,
    fidelity_pure,
    inverse_sqrt_psd,
    project_density_array,
    symmetrize,
)
from ..core.rng import make_rng, stream_seed
from ..minimax.estimator import (
    AffineEstimator,
    Dataset,
    RobustnessInput,
    estimate,
    robustness_bound,
)
from ..minimax.saddle import outer_minimize
from ..schemes.generators import pauli_plan
from .sampler import outcomes_from_uniforms, sample_outcomes

logger = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")

PERTURBATION_ATTEMPTS = 50


def parallel_map(func: Callable[[T], U], items: Sequence[T], threads: int = 1) -> List[U]:
    """順序を保ったまま items に func を適用（threads > 1 ならスレッドプール）"""
    if threads < 1:
        raise InvalidInputError(f"スレッド数は 1 以上が必要です: {threads}")
    if threads == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def true_value(plan: MeasurementPlan, state: DensityMatrix) -> float:
    """推定対象の真値（忠実度または観測量の期待値）"""
    if plan.observable is None:
        return fidelity_pure(plan.target, state)
    return state.expectation(plan.observable)


@dataclass(frozen=True)
class TrialReport:
    """被覆率実験の集計"""
    trials: int
    estimates: Tuple[float, ...]
    coverage_count: int
    true_fidelity: float
    risk: float

    @property
    def empirical_coverage(self) -> float:
        return self.coverage_count / self.trials

    @property
    def mean_estimate(self) -> float:
        return float(np.mean(self.estimates))

    @property
    def mean_abs_error(self) -> float:
        return float(np.mean(np.abs(np.asarray(self.estimates) - self.true_fidelity)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": SCHEMA_VERSION,
            "trials": self.trials,
            "estimates": list(self.estimates),
            "coverage_count": self.coverage_count,
            "empirical_coverage": self.empirical_coverage,
            "mean_estimate": self.mean_estimate,
            "mean_abs_error": self.mean_abs_error,
            "true_fidelity": self.true_fidelity,
            "risk": self.risk,
        }


def run_coverage(
    plan: MeasurementPlan,
    estimator: AffineEstimator,
    true_state: DensityMatrix,
    trials: int,
    seed: int,
    threads: int = 1,
) -> TrialReport:
    """
    真の状態からデータを繰り返し生成し、推定区間が真値を含む割合を数える

    試行 t のシードは stream_seed(seed, t) なので、結果はスレッド数によらない。
    """
    if trials < 1:
        raise InvalidInputError(f"試行回数は 1 以上が必要です: {trials}")
    if estimator.plan_fingerprint != plan.fingerprint:
        raise IntegrityError("推定量のフィンガープリントが測定計画と一致しません")
    truth = true_value(plan, true_state)

    def one_trial(t: int) -> float:
        return estimate(estimator, sample_outcomes(plan, true_state, stream_seed(seed, t)))

    estimates = parallel_map(one_trial, list(range(trials)), threads)
    covered = sum(1 for v in estimates if abs(v - truth) <= estimator.risk)
    report = TrialReport(trials, tuple(estimates), covered, truth, estimator.risk)
    logger.info(
        f"被覆率 {report.empirical_coverage:.3f}（{covered}/{trials}）, "
        f"平均推定値 {report.mean_estimate:.5f}, 真値 {truth:.5f}"
    )
    return report


def _random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """成分の 1-ノルムが 1 のトレースレスなランダムエルミート行列"""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = symmetrize(g)
    h -= np.trace(h).real / dim * np.eye(dim)
    return h / entrywise_norm1(h)


def _shrink(base: np.ndarray, moved: np.ndarray, delta: float) -> np.ndarray:
    """凸結合で base に引き戻し、ずれの成分 1-ノルムを delta 以下にする"""
    diff = moved - base
    size = max(entrywise_norm1(d) for d in diff) if diff.ndim == 3 else entrywise_norm1(diff)
    if not np.isfinite(size):
        raise PerturbationError("摂動が有限ではありません")
    scale = 1.0 if size <= delta else delta / size
    return base + scale * diff


@retry(max_attempts=PERTURBATION_ATTEMPTS, exceptions=(PerturbationError,))
def perturb_state(state: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """σ + σ'（‖σ'‖₁ ≤ δ、結果は密度行列）"""
    radius = rng.uniform(0.0, delta)
    moved = project_density_array(state + radius * _random_direction(state.shape[0], rng))
    return _shrink(state, moved, delta)


@retry(max_attempts=PERTURBATION_ATTEMPTS, exceptions=(PerturbationError,))
def perturb_effects(effects: np.ndarray, delta: float, rng: np.random.Generator) -> np.ndarray:
    """
    各効果に ‖E'_k‖₁ ≤ δ の摂動を加えた POVM

    半正定値部分を取り、M = Σ_k Ẽ_k で M^{-1/2} Ẽ_k M^{-1/2} と正規化する。
    """
    d = effects.shape[1]
    moved = []
    for e in effects:
        w, v = np.linalg.eigh(symmetrize(e + rng.uniform(0.0, delta) * _random_direction(d, rng)))
        moved.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
    try:
        m_inv_sqrt = inverse_sqrt_psd(np.sum(moved, axis=0))
    except InvalidInputError as e:
        raise PerturbationError(f"摂動後の POVM を正規化できません: {e}") from e
    normalized = np.stack([symmetrize(m_inv_sqrt @ a @ m_inv_sqrt) for a in moved])
    return _shrink(effects, normalized, delta)


def _smoothed(raw: np.ndarray, epsilon_o: float) -> np.ndarray:
    return (np.clip(raw, 0.0, None) + epsilon_o / raw.size) / (1.0 + epsilon_o)


@dataclass(frozen=True)
class RobustnessReport:
    """摂動ありとなしの推定値の差と、その上界"""
    noiseless_estimate: float
    perturbed_estimate: float
    difference: float
    bound: float
    delta_s: float
    delta_m: float
    hist_err: float
    hist_err_tilde: float

    @property
    def within_bound(self) -> bool:
        return self.difference <= self.bound + 1e-12

    def to_dict(self) -> Dict[str, Any]:
        return {"version": SCHEMA_VERSION, **asdict(self), "within_bound": self.within_bound}


def perturb_and_estimate(
    plan: MeasurementPlan,
    estimator: AffineEstimator,
    true_state: DensityMatrix,
    delta_s: float,
    delta_m: float,
    seed: int,
) -> RobustnessReport:
    """
    1 回ごとに状態と POVM が摂動される実験を、摂動なしの実験と同じ一様乱数で行う

    ヒストグラム誤差は平滑化したボルン確率（摂動ありでは各回の平均）との差の最大値。
    """
    if delta_s < 0 or delta_m < 0:
        raise InvalidInputError(f"摂動の大きさは 0 以上が必要です: δ_S={delta_s}, δ_M={delta_m}")
    if estimator.plan_fingerprint != plan.fingerprint:
        raise IntegrityError("推定量のフィンガープリントが測定計画と一致しません")
    rng = make_rng(seed)
    sigma = true_state.matrix
    clean_counts, noisy_counts = [], []
    hist_err = hist_err_tilde = 0.0
    for setting in plan.settings:
        n, reps = setting.num_outcomes, setting.repetitions
        p = _smoothed(np.einsum("kij,ji->k", setting.effects, sigma).real, plan.epsilon_o)
        clean = np.zeros(n, dtype=np.int64)
        noisy = np.zeros(n, dtype=np.int64)
        q_sum = np.zeros(n)
        for _ in range(reps):
            u = rng.random(1)
            state = sigma if delta_s == 0 else perturb_state(sigma, delta_s, rng)
            effects = setting.effects
            if delta_m > 0:
                effects = perturb_effects(effects, delta_m, rng)
            q = _smoothed(np.einsum("kij,ji->k", effects, state).real, plan.epsilon_o)
            q_sum += q
            clean[outcomes_from_uniforms(p, u)[0]] += 1
            noisy[outcomes_from_uniforms(q, u)[0]] += 1
        clean_counts.append(clean)
        noisy_counts.append(noisy)
        if reps > 0:
            hist_err = max(hist_err, float(np.max(np.abs(clean / reps - p))))
            hist_err_tilde = max(hist_err_tilde, float(np.max(np.abs(noisy / reps - q_sum / reps))))

    fingerprint = plan.fingerprint
    noiseless = estimate(estimator, Dataset(tuple(clean_counts), fingerprint))
    perturbed = estimate(estimator, Dataset(tuple(noisy_counts), fingerprint))
    rin = RobustnessInput(
        delta_s=delta_s,
        delta_m=delta_m,
        hist_err=hist_err,
        hist_err_tilde=hist_err_tilde,
        max_effect_infnorm=max(
            (entrywise_norm_inf(e) for s in plan.settings for e in s.effects), default=0.0
        ),
        state_infnorm=entrywise_norm_inf(sigma),
    )
    report = RobustnessReport(
        noiseless_estimate=noiseless,
        perturbed_estimate=perturbed,
        difference=abs(perturbed - noiseless),
        bound=robustness_bound(estimator, rin),
        delta_s=delta_s,
        delta_m=delta_m,
        hist_err=hist_err,
        hist_err_tilde=hist_err_tilde,
    )
    if not report.within_bound:
        logger.warning(f"推定値の差 {report.difference:.3e} が上界 {report.bound:.3e} を超えました")
    return report


@dataclass(frozen=True)
class RiskCurveRow:
    settings: int
    repetitions: int
    risk: float


def risk_curve(
    target: DensityMatrix,
    settings_counts: Sequence[int],
    repetitions: Sequence[int],
    epsilon: float,
    mode: str = "subspace",
    seed: int = 0,
    pool: Optional[Sequence[PauliString]] = None,
    config: Optional[SolverConfig] = None,
    threads: int = 1,
) -> List[RiskCurveRow]:
    """
    L 個のパウリ測定を各 R 回行う計画のリスク表

    パウリは pool を 1 回だけ並べ替えた先頭 L 個を使うので、L を増やすと設定が追加される。
    """
    if not settings_counts or not repetitions:
        raise InvalidInputError("L と R の格子が空です")
    if pool is None:
        pool = all_pauli_strings(qubit_count(target.dim))
    if max(settings_counts) > len(pool) or min(settings_counts) < 0:
        raise InvalidInputError(f"L は 0 以上 {len(pool)} 以下が必要です")
    if min(repetitions) < 1:
        raise InvalidInputError("R は 1 以上が必要です")
    order = make_rng(seed).permutation(len(pool))
    ordered = [pool[i] for i in order]
    cells = [(l, r) for l in settings_counts for r in repetitions]

    def solve(cell: Tuple[int, int]) -> RiskCurveRow:
        l, r = cell
        plan = pauli_plan(target, ordered[:l], r, epsilon, mode)
        sp = outer_minimize(plan, config)
        logger.info(f"L = {l}, R = {r}: リスク {sp.risk:.5f}")
        return RiskCurveRow(l, r, sp.risk)

    return parallel_map(solve, cells, threads)
