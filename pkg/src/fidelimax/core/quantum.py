"""
量子状態・POVM・測定計画の基本演算

行列はすべて密な complex128 の numpy 配列で保持する。
エルミート性は演算後に (H + H†)/2 で対称化して保つ。
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from .errors import InvalidInputError
from .rng import make_rng

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
PURITY_TOL = 1e-8
DEFAULT_EPSILON_O = 1e-5

# エルミート演算子は numpy 配列そのもので表す
HermitianOperator = np.ndarray


def symmetrize(a: np.ndarray) -> np.ndarray:
    """(A + A†)/2"""
    return (a + a.conj().T) / 2


def hermitian_violation(a: np.ndarray) -> Optional[str]:
    """エルミート行列でなければ理由を返す"""
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        return f"正方行列ではありません: shape={a.shape}"
    if not np.all(np.isfinite(a)):
        return "有限でない成分を含みます"
    deviation = float(np.max(np.abs(a - a.conj().T)))
    if deviation > HERMITIAN_TOL:
        return f"エルミートではありません（最大偏差 {deviation:.3e}）"
    return None


def as_hermitian(a: np.ndarray, name: str = "operator") -> np.ndarray:
    """
    入力を検証して対称化済みのエルミート行列を返す

    Args:
        a: 正方行列
        name: エラーメッセージ用の名前

    Returns:
        complex128 の対称化済み行列
    """
    arr = np.asarray(a, dtype=np.complex128)
    problem = hermitian_violation(arr)
    if problem:
        raise InvalidInputError(f"{name}: {problem}")
    return symmetrize(arr)


def state_violations(matrix: np.ndarray, name: str = "state") -> List[str]:
    """密度行列の不変条件に違反していれば理由の一覧を返す"""
    arr = np.asarray(matrix, dtype=np.complex128)
    problem = hermitian_violation(arr)
    if problem:
        return [f"{name}: {problem}"]
    h = symmetrize(arr)
    issues = []
    min_eig = float(np.linalg.eigvalsh(h).min())
    if min_eig < -PSD_TOL:
        issues.append(f"{name}: 半正定値ではありません（最小固有値 {min_eig:.3e}）")
    trace = float(np.trace(h).real)
    if abs(trace - 1.0) > TRACE_TOL:
        issues.append(f"{name}: トレースが 1 ではありません（{trace:.12g}）")
    return issues


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """密度行列（エルミート、半正定値、トレース 1）"""
    matrix: np.ndarray

    def __post_init__(self) -> None:
        issues = state_violations(self.matrix, "密度行列")
        if issues:
            raise InvalidInputError("; ".join(issues))
        m = symmetrize(np.asarray(self.matrix, dtype=np.complex128))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @cached_property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    @property
    def is_pure(self) -> bool:
        return abs(self.purity - 1.0) <= PURITY_TOL

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        if dim < 1:
            raise InvalidInputError(f"次元は正の整数が必要です: {dim}")
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "DensityMatrix":
        """状態ベクトルから純粋状態 |ψ⟩⟨ψ| を作成（正規化する）"""
        v = np.asarray(psi, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidInputError("零ベクトルから状態は作れません")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    def expectation(self, op: np.ndarray) -> float:
        """tr(op · state) の実部"""
        return float(np.real(np.sum(np.asarray(op).T * self.matrix)))


def setting_violations(
    label: str,
    effects: np.ndarray,
    repetitions: int,
    dim: Optional[int] = None,
) -> List[str]:
    """POVM 設定の不変条件違反を列挙"""
    issues: List[str] = []
    arr = np.asarray(effects, dtype=np.complex128)
    if arr.ndim != 3 or arr.shape[0] == 0 or arr.shape[1] != arr.shape[2]:
        return [f"設定 '{label}': 効果の配列形状が不正です: {arr.shape}"]
    if dim is not None and arr.shape[1] != dim:
        issues.append(f"設定 '{label}': 次元 {arr.shape[1]} が計画の次元 {dim} と一致しません")
    if repetitions < 0:
        issues.append(f"設定 '{label}': 繰り返し回数が負です: {repetitions}")
    for k, effect in enumerate(arr):
        problem = hermitian_violation(effect)
        if problem:
            issues.append(f"設定 '{label}' の効果 {k}: {problem}")
            continue
        min_eig = float(np.linalg.eigvalsh(symmetrize(effect)).min())
        if min_eig < -PSD_TOL:
            issues.append(f"設定 '{label}' の効果 {k}: 半正定値ではありません（{min_eig:.3e}）")
    total = arr.sum(axis=0)
    deviation = float(np.max(np.abs(total - np.eye(arr.shape[1]))))
    if deviation > PSD_TOL:
        issues.append(f"設定 '{label}': 効果の和が単位行列になりません（最大偏差 {deviation:.3e}）")
    return issues


@dataclass(frozen=True, eq=False)
class PovmSetting:
    """
    1 つの測定設定: POVM の効果 {E_k} と繰り返し回数 R

    values はパウリ測定などで各結果に割り当てる実数値（固有値）。
    """
    label: str
    effects: np.ndarray
    repetitions: int
    values: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        effects = np.asarray(self.effects, dtype=np.complex128)
        issues = setting_violations(self.label, effects, int(self.repetitions))
        if self.values is not None and len(self.values) != effects.shape[0]:
            issues.append(f"設定 '{self.label}': values の長さが結果数と一致しません")
        if issues:
            raise InvalidInputError("; ".join(issues))
        sym = np.stack([symmetrize(e) for e in effects])
        sym.setflags(write=False)
        object.__setattr__(self, "effects", sym)
        object.__setattr__(self, "repetitions", int(self.repetitions))
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def num_outcomes(self) -> int:
        return int(self.effects.shape[0])

    @property
    def dim(self) -> int:
        return int(self.effects.shape[1])

    def with_repetitions(self, repetitions: int) -> "PovmSetting":
        return replace(self, repetitions=repetitions)


def plan_violations(
    target: np.ndarray,
    epsilon: float,
    epsilon_o: float,
    setting_dims: Sequence[int],
    observable: Optional[np.ndarray] = None,
) -> List[str]:
    """測定計画レベルの不変条件違反を列挙（各設定の検証は setting_violations）"""
    issues = state_violations(target, "target")
    if not issues:
        purity = float(np.real(np.vdot(target, target)))
        if abs(purity - 1.0) > PURITY_TOL:
            issues.append(f"target: 純粋状態ではありません（tr(ρ²) = {purity:.10g}）")
    if not 0 < epsilon < 0.25:
        issues.append(f"epsilon は (0, 0.25) の範囲が必要です: {epsilon}")
    if not 0 <= epsilon_o < 1:
        issues.append(f"epsilon_o は [0, 1) の範囲が必要です: {epsilon_o}")
    dim = np.asarray(target).shape[0] if np.asarray(target).ndim == 2 else -1
    for index, d in enumerate(setting_dims):
        if d != dim:
            issues.append(f"設定 {index}: 次元 {d} が target の次元 {dim} と一致しません")
    if observable is not None:
        problem = hermitian_violation(np.asarray(observable, dtype=np.complex128))
        if problem:
            issues.append(f"observable: {problem}")
        elif np.asarray(observable).shape[0] != dim:
            issues.append("observable: 次元が target と一致しません")
    return issues


@dataclass(frozen=True, eq=False)
class MeasurementPlan:
    """
    測定計画: 目標の純粋状態 ρ、信頼パラメータ ε、平滑化 ε_o、測定設定の列

    observable を与えると ρ の代わりにその期待値を推定対象とする。
    """
    target: DensityMatrix
    epsilon: float
    settings: Tuple[PovmSetting, ...] = ()
    epsilon_o: float = DEFAULT_EPSILON_O
    observable: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        settings = tuple(self.settings)
        object.__setattr__(self, "settings", settings)
        issues = plan_violations(
            self.target.matrix,
            float(self.epsilon),
            float(self.epsilon_o),
            [s.dim for s in settings],
            self.observable,
        )
        if issues:
            raise InvalidInputError("; ".join(issues))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "epsilon_o", float(self.epsilon_o))
        if self.observable is not None:
            obs = symmetrize(np.asarray(self.observable, dtype=np.complex128))
            obs.setflags(write=False)
            object.__setattr__(self, "observable", obs)

    @property
    def dim(self) -> int:
        return self.target.dim

    @property
    def num_settings(self) -> int:
        return len(self.settings)

    @property
    def quantity(self) -> str:
        return "fidelity" if self.observable is None else "observable"

    @property
    def objective_operator(self) -> np.ndarray:
        """推定対象の演算子（忠実度なら ρ、そうでなければ O）"""
        return self.target.matrix if self.observable is None else self.observable

    @property
    def repetitions(self) -> Tuple[int, ...]:
        return tuple(s.repetitions for s in self.settings)

    @cached_property
    def fingerprint(self) -> str:
        """正準 JSON 表現の SHA-256"""
        from .codec import plan_fingerprint
        return plan_fingerprint(self)

    def with_settings(self, settings: Sequence[PovmSetting]) -> "MeasurementPlan":
        return MeasurementPlan(
            target=self.target,
            epsilon=self.epsilon,
            settings=tuple(settings),
            epsilon_o=self.epsilon_o,
            observable=self.observable,
        )

    def append(self, setting: PovmSetting) -> "MeasurementPlan":
        return self.with_settings(self.settings + (setting,))


def born_probs(setting: PovmSetting, state: DensityMatrix, epsilon_o: float) -> np.ndarray:
    """
    平滑化したボルンの規則による結果確率

    p_k = (tr(E_k σ) + ε_o/N) / (1 + ε_o)

    Args:
        setting: 測定設定
        state: 状態
        epsilon_o: 平滑化パラメータ（0 以上）

    Returns:
        長さ N の確率ベクトル
    """
    if setting.dim != state.dim:
        raise InvalidInputError(f"次元が一致しません: 設定 {setting.dim}, 状態 {state.dim}")
    if epsilon_o < 0:
        raise InvalidInputError(f"epsilon_o は 0 以上が必要です: {epsilon_o}")
    raw = born_raw(setting.effects, state.matrix)
    n = setting.num_outcomes
    return (np.clip(raw, 0.0, None) + epsilon_o / n) / (1.0 + epsilon_o)


def born_raw(effects: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """tr(E_k ρ) のベクトル（平滑化なし）"""
    return np.einsum("kij,ji->k", effects, matrix).real


def fidelity_pure(target: DensityMatrix, state: DensityMatrix) -> float:
    """純粋状態 ρ に対する忠実度 F = tr(ρσ)"""
    if not target.is_pure:
        raise InvalidInputError("target は純粋状態である必要があります")
    if target.dim != state.dim:
        raise InvalidInputError(f"次元が一致しません: {target.dim} != {state.dim}")
    return float(np.real(np.sum(target.matrix.T * state.matrix)))


def uhlmann_fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """一般の状態間の忠実度 (tr √(√a b √a))²"""
    root = sla.sqrtm(a.matrix)
    inner = sla.sqrtm(root @ b.matrix @ root)
    return float(np.real(np.trace(inner)) ** 2)


def _as_prob_vector(p: Sequence[float], name: str) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(-1)
    if v.size == 0 or np.any(v < 0) or abs(float(v.sum()) - 1.0) > 1e-9:
        raise InvalidInputError(f"{name} は確率ベクトルである必要があります")
    return v


def bhattacharyya(p: np.ndarray, q: np.ndarray) -> float:
    """Σ_k √(p_k q_k)"""
    return float(np.sum(np.sqrt(np.asarray(p) * np.asarray(q))))


def classical_fidelity(p: Sequence[float], q: Sequence[float]) -> float:
    """古典忠実度 (Σ_k √(p_k q_k))²"""
    pv = _as_prob_vector(p, "p")
    qv = _as_prob_vector(q, "q")
    if pv.shape != qv.shape:
        raise InvalidInputError(f"長さが一致しません: {pv.size} != {qv.size}")
    return min(1.0, bhattacharyya(pv, qv) ** 2)


def hellinger_affinity(plan: MeasurementPlan, chi1: DensityMatrix, chi2: DensityMatrix) -> float:
    """
    測定計画全体のヘリンジャー親和度 Π_l (Σ_k √(p1_k p2_k))^{R_l}

    確率は計画の ε_o で平滑化したものを使う。
    """
    if chi1.dim != plan.dim or chi2.dim != plan.dim:
        raise InvalidInputError("状態の次元が計画と一致しません")
    log_total = 0.0
    for setting in plan.settings:
        if setting.repetitions == 0:
            continue
        s = bhattacharyya(
            born_probs(setting, chi1, plan.epsilon_o),
            born_probs(setting, chi2, plan.epsilon_o),
        )
        if s <= 0:
            return 0.0
        log_total += setting.repetitions * np.log(min(s, 1.0))
    return float(np.exp(log_total))


def project_simplex(v: Sequence[float]) -> np.ndarray:
    """
    確率単体 {x ≥ 0, Σx = 1} へのユークリッド射影（ソートしきい値法）
    """
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError("空のベクトルは射影できません")
    u = np.sort(arr)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, arr.size + 1)
    rho = int(np.nonzero(u - css / idx > 0)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(arr - theta, 0.0)


def project_density_array(h: np.ndarray) -> np.ndarray:
    """エルミート行列をフロベニウスノルムで最も近い密度行列に射影（配列版）"""
    w, v = np.linalg.eigh(symmetrize(h))
    lam = project_simplex(w)
    return symmetrize((v * lam) @ v.conj().T)


def project_density(h: HermitianOperator) -> DensityMatrix:
    """固有値分解 → 固有値の単体射影 → 再構成"""
    return DensityMatrix(project_density_array(as_hermitian(h, "h")))


def depolarize(state: DensityMatrix, p: float) -> DensityMatrix:
    """脱分極ノイズ (1−p)σ + p·I/d"""
    if not 0 <= p <= 1:
        raise InvalidInputError(f"脱分極率は [0, 1] の範囲が必要です: {p}")
    d = state.dim
    return DensityMatrix((1 - p) * state.matrix + p * np.eye(d) / d)


class HermitianEmbedding:
    """
    d×d エルミート行列と長さ d² の実ベクトルの等長同型

    対角成分と、上三角の実部・虚部を √2 倍したものを並べる。
    ⟨A, B⟩_F = tr(AB) がベクトルの内積と一致する。
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.size = dim * dim
        self._upper = np.triu_indices(dim, k=1)
        self._lower = (self._upper[1], self._upper[0])
        self._off = len(self._upper[0])

    def to_real(self, h: np.ndarray) -> np.ndarray:
        off = h[self._upper]
        return np.concatenate([h.diagonal().real, np.sqrt(2) * off.real, np.sqrt(2) * off.imag])

    def from_real(self, x: np.ndarray) -> np.ndarray:
        d, m = self.dim, self._off
        h = np.zeros((d, d), dtype=np.complex128)
        h[np.diag_indices(d)] = x[:d]
        upper = (x[d:d + m] + 1j * x[d + m:d + 2 * m]) / np.sqrt(2)
        h[self._upper] = upper
        h[self._lower] = upper.conj()
        return h


def entrywise_norm1(m: np.ndarray) -> float:
    """ベクトル化した行列の 1-ノルム Σ|m_ij|"""
    return float(np.sum(np.abs(m)))


def entrywise_norm_inf(m: np.ndarray) -> float:
    """ベクトル化した行列の ∞-ノルム max|m_ij|"""
    return float(np.max(np.abs(m)))


def inverse_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """正定値行列の逆平方根 M^{-1/2}"""
    w, v = np.linalg.eigh(symmetrize(m))
    if w.min() <= 0:
        raise InvalidInputError("正定値でない行列の逆平方根は計算できません")
    return symmetrize((v / np.sqrt(w)) @ v.conj().T)


def random_pure_state(n: int, seed: int) -> DensityMatrix:
    """
    n 量子ビットのハール一様な純粋状態

    独立な複素標準正規ベクトルを正規化する。
    """
    if n < 1:
        raise InvalidInputError(f"量子ビット数は 1 以上が必要です: {n}")
    rng = make_rng(seed)
    d = 2 ** n
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return DensityMatrix.from_vector(psi)


def random_povm(
    d: int,
    outcomes: int,
    seed: int,
    repetitions: int = 1,
    label: str = "random",
) -> PovmSetting:
    """
    ウィシャート型のランダム POVM

    G_k G_k† を引き、M = Σ G_k G_k† として E_k = M^{-1/2} G_k G_k† M^{-1/2}。
    """
    if d < 1 or outcomes < 1:
        raise InvalidInputError(f"次元と結果数は正の整数が必要です: d={d}, outcomes={outcomes}")
    rng = make_rng(seed)
    gram = []
    for _ in range(outcomes):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        gram.append(g @ g.conj().T)
    m_inv_sqrt = inverse_sqrt_psd(np.sum(gram, axis=0))
    effects = np.stack([symmetrize(m_inv_sqrt @ a @ m_inv_sqrt) for a in gram])
    # 和が数値誤差の範囲で単位行列からずれる分を最後の効果で吸収する
    effects[-1] = symmetrize(np.eye(d) - effects[:-1].sum(axis=0))
    return PovmSetting(label=label, effects=effects, repetitions=repetitions)
