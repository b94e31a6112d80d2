"""
最尤推定（MLE）による状態再構成とモンテカルロ・ブートストラップ区間

比較用のベースライン。区間は保証付きではなく、不完全な測定では過信になる。
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.codec import SCHEMA_VERSION, encode_matrix
from ..core.config import MleConfig
from ..core.errors import InvalidInputError
from ..core.quantum import (
    DensityMatrix,
    HermitianEmbedding,
    MeasurementPlan,
    fidelity_pure,
    project_density_array,
    symmetrize,
)
from ..core.rng import stream_seed
from ..minimax.ascent import accelerated_ascent
from ..minimax.estimator import Dataset
from ..simulation.experiments import parallel_map
from ..simulation.sampler import sample_outcomes

logger = logging.getLogger(__name__)

MIN_BOOTSTRAP = 100


class _Likelihood:
    """全設定の効果を連結した負の対数尤度"""

    def __init__(self, plan: MeasurementPlan, freqs: Sequence[np.ndarray]):
        if plan.num_settings == 0:
            raise InvalidInputError("設定のない計画では再構成できません")
        if len(freqs) != plan.num_settings:
            raise InvalidInputError("頻度の設定数が計画と一致しません")
        for setting, f in zip(plan.settings, freqs):
            if np.asarray(f).shape != (setting.num_outcomes,):
                raise InvalidInputError(f"設定 '{setting.label}': 頻度の長さが結果数と一致しません")
        d = plan.dim
        self.effects = np.concatenate([s.effects for s in plan.settings])
        self.flat = self.effects.transpose(0, 2, 1).reshape(-1, d * d)
        self.shift = np.concatenate(
            [np.full(s.num_outcomes, plan.epsilon_o / s.num_outcomes) for s in plan.settings]
        )
        self.scale = 1.0 + plan.epsilon_o
        self.freqs = np.concatenate([np.asarray(f, dtype=float) for f in freqs])
        self.observed = self.freqs > 0

    def probs(self, chi: np.ndarray) -> np.ndarray:
        raw = (self.flat @ chi.reshape(-1)).real
        return (np.clip(raw, 0.0, None) + self.shift) / self.scale

    def value(self, chi: np.ndarray) -> float:
        p = self.probs(chi)[self.observed]
        with np.errstate(divide="ignore"):
            return float(-(self.freqs[self.observed] @ np.log(p)))

    def gradient(self, chi: np.ndarray) -> np.ndarray:
        p = self.probs(chi)
        weights = np.zeros_like(p)
        weights[self.observed] = self.freqs[self.observed] / p[self.observed]
        return symmetrize(-np.tensordot(weights, self.effects, axes=1) / self.scale)


def nll(plan: MeasurementPlan, freqs: Sequence[Sequence[float]], chi: DensityMatrix) -> float:
    """
    ℓ(χ) = −Σ_l Σ_k f_k ln p_k（p は ε_o で平滑化したボルン確率）
    """
    return _Likelihood(plan, [np.asarray(f, dtype=float) for f in freqs]).value(chi.matrix)


def nll_gradient(
    plan: MeasurementPlan, freqs: Sequence[Sequence[float]], chi: DensityMatrix
) -> np.ndarray:
    """∂ℓ/∂χ = −Σ_k (f_k/p_k) E_k / (1+ε_o)"""
    return _Likelihood(plan, [np.asarray(f, dtype=float) for f in freqs]).gradient(chi.matrix)


@dataclass(frozen=True)
class BootstrapInterval:
    lo: float
    median: float
    hi: float

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class MleResult:
    """MLE の結果"""
    state: DensityMatrix
    nll: float
    fidelity: float
    iterations: int
    converged: bool

    def to_dict(self, interval: Optional[BootstrapInterval] = None) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "version": SCHEMA_VERSION,
            "state": encode_matrix(self.state.matrix),
            "nll": self.nll,
            "fidelity": self.fidelity,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if interval is not None:
            doc["interval"] = {"lo": interval.lo, "median": interval.median, "hi": interval.hi}
        return doc


def _check_data(plan: MeasurementPlan, data: Dataset) -> None:
    if len(data.counts) != plan.num_settings:
        raise InvalidInputError(
            f"設定数が一致しません: 計画 {plan.num_settings}, データ {len(data.counts)}"
        )


def mle_reconstruct(
    plan: MeasurementPlan, data: Dataset, config: Optional[MleConfig] = None
) -> MleResult:
    """
    射影勾配法で負の対数尤度を密度行列上で最小化

    初期点は I/d。
    """
    config = config or MleConfig()
    _check_data(plan, data)
    likelihood = _Likelihood(plan, list(data.frequencies))
    emb = HermitianEmbedding(plan.dim)

    def objective(x: np.ndarray) -> float:
        return -likelihood.value(emb.from_real(x))

    def gradient(x: np.ndarray) -> np.ndarray:
        return -emb.to_real(likelihood.gradient(emb.from_real(x)))

    def project(x: np.ndarray) -> np.ndarray:
        return emb.to_real(project_density_array(emb.from_real(x)))

    start = emb.to_real(np.eye(plan.dim, dtype=np.complex128) / plan.dim)
    result = accelerated_ascent(
        objective, gradient, project, start, config,
        tolerance=config.tolerance, max_iters=config.max_iters,
    )
    state = DensityMatrix(emb.from_real(result.x))
    if not result.converged:
        logger.warning(f"MLE が {result.iterations} 回の反復で収束しませんでした")
    fit = MleResult(
        state=state,
        nll=-result.value,
        fidelity=fidelity_pure(plan.target, state),
        iterations=result.iterations,
        converged=result.converged,
    )
    logger.debug(f"MLE: 忠実度 {fit.fidelity:.6f}, 負の対数尤度 {fit.nll:.6g}")
    return fit


def bootstrap_interval(
    plan: MeasurementPlan,
    data: Dataset,
    replicates: int,
    epsilon: float,
    seed: int,
    config: Optional[MleConfig] = None,
    fit: Optional[MleResult] = None,
    threads: int = 1,
) -> BootstrapInterval:
    """
    パラメトリック・ブートストラップによる忠実度の区間

    MLE 状態からデータを replicates 回生成して再構成し、
    忠実度の ε/2, 1/2, 1−ε/2 分位点を返す。
    """
    if replicates < MIN_BOOTSTRAP:
        raise InvalidInputError(f"ブートストラップ回数は {MIN_BOOTSTRAP} 以上が必要です: {replicates}")
    if not 0 < epsilon < 1:
        raise InvalidInputError(f"epsilon は (0, 1) の範囲が必要です: {epsilon}")
    _check_data(plan, data)
    if data.repetitions != plan.repetitions:
        raise InvalidInputError("データの繰り返し回数が計画と一致しません")
    fit = fit or mle_reconstruct(plan, data, config)

    def replicate(b: int) -> float:
        resampled = sample_outcomes(plan, fit.state, stream_seed(seed, b))
        return mle_reconstruct(plan, resampled, config).fidelity

    fidelities = np.array(parallel_map(replicate, list(range(replicates)), threads))
    lo, median, hi = np.quantile(fidelities, [epsilon / 2, 0.5, 1 - epsilon / 2])
    return BootstrapInterval(float(lo), float(median), float(hi))


@dataclass(frozen=True)
class MleTrialReport:
    """MLE とブートストラップ区間の被覆率実験"""
    trials: int
    fidelities: Tuple[float, ...]
    coverage_count: int
    true_fidelity: float

    @property
    def mean_fidelity(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def empirical_coverage(self) -> float:
        return self.coverage_count / self.trials


def run_mle_coverage(
    plan: MeasurementPlan,
    true_state: DensityMatrix,
    trials: int,
    replicates: int,
    seed: int,
    config: Optional[MleConfig] = None,
    threads: int = 1,
) -> MleTrialReport:
    """
    真の状態からデータを生成して MLE とブートストラップ区間を作り、区間が真値を含む割合を数える
    """
    if trials < 1:
        raise InvalidInputError(f"試行回数は 1 以上が必要です: {trials}")
    truth = fidelity_pure(plan.target, true_state)

    def one_trial(t: int) -> Tuple[float, bool]:
        trial_seed = stream_seed(seed, t)
        data = sample_outcomes(plan, true_state, trial_seed)
        fit = mle_reconstruct(plan, data, config)
        interval = bootstrap_interval(
            plan, data, replicates, plan.epsilon, stream_seed(trial_seed, 1), config, fit
        )
        return fit.fidelity, interval.contains(truth)

    results = parallel_map(one_trial, list(range(trials)), threads)
    report = MleTrialReport(
        trials=trials,
        fidelities=tuple(f for f, _ in results),
        coverage_count=sum(1 for _, c in results if c),
        true_fidelity=truth,
    )
    logger.info(
        f"MLE 平均忠実度 {report.mean_fidelity:.4f}（真値 {truth:.4f}）, "
        f"ブートストラップ被覆率 {report.empirical_coverage:.3f}"
    )
    return report
