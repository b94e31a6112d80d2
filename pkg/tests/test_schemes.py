"""
測定スキーム（最適 POVM、スタビライザー、パウリ重み、DFE）のテスト
"""
import math
from collections import Counter

import numpy as np
import pytest

from fidelimax.core.errors import IntegrityError, InvalidInputError, ResourceLimitError
from fidelimax.core.pauli import PauliString, StabilizerGroup, pauli_matrix
from fidelimax.core.quantum import DensityMatrix, depolarize, random_pure_state
from fidelimax.minimax.estimator import Dataset
from fidelimax.minimax.saddle import outer_minimize
from fidelimax.schemes.dfe import dfe_estimate, dfe_scheme, required_shots
from fidelimax.schemes.generators import (
    PauliSchemeSpec,
    generator_plan,
    optimal_povm,
    pauli_povm,
    pauli_scheme,
    stabilizer_scheme,
)
from fidelimax.simulation.sampler import sample_outcomes


def test_optimal_povm():
    """|0⟩⟨0| の最適 POVM"""
    ket0 = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    setting = optimal_povm(ket0, 5)
    assert np.allclose(setting.effects[0], np.diag([1, 0]))
    assert np.allclose(setting.effects[1], np.diag([0, 1]))
    assert np.allclose(setting.effects.sum(axis=0), np.eye(2))
    with pytest.raises(InvalidInputError):
        optimal_povm(DensityMatrix.maximally_mixed(2))


def test_pauli_povm_subspace():
    """subspace モードは ±1 固有空間への射影"""
    z = pauli_povm(PauliString("Z"))
    assert np.allclose(z.effects[0], np.diag([1, 0]))
    assert np.allclose(z.effects[1], np.diag([0, 1]))
    xx = pauli_povm(PauliString("XX"))
    assert [np.linalg.matrix_rank(e) for e in xx.effects] == [2, 2]
    w = pauli_matrix(PauliString("XX"))
    assert np.allclose(xx.effects[0], (np.eye(4) + w) / 2)
    assert xx.values == (1.0, -1.0)


def test_pauli_povm_negative_sign_flips_values():
    """符号 −1 は射影を変えず値を反転"""
    plus = pauli_povm(PauliString("YY"))
    minus = pauli_povm(PauliString.parse("-YY"))
    assert np.allclose(plus.effects, minus.effects)
    assert minus.values == (-1.0, 1.0)


def test_pauli_povm_eigenbasis():
    """XX の固有基底は |±⟩⊗|±⟩ への 4 つの射影"""
    setting = pauli_povm(PauliString("XX"), mode="eigenbasis")
    assert setting.num_outcomes == 4
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    expected = [np.kron(a, b) for a in (plus, minus) for b in (plus, minus)]
    for effect, vec, value in zip(setting.effects, expected, setting.values):
        assert np.allclose(effect, np.outer(vec, vec.conj()))
        w = pauli_matrix(PauliString("XX"))
        assert np.allclose(w @ vec, value * vec)


def test_identity_cannot_be_measured():
    """恒等演算子は設定にできない"""
    with pytest.raises(InvalidInputError):
        pauli_povm(PauliString("II"))


def test_generator_plan_single_generator_risk():
    """ベル状態の生成元を 1 つだけ測るとリスク 0.5"""
    group = StabilizerGroup.from_strings(["XX", "ZZ"])
    for repetitions in (100, 1000):
        plan = generator_plan(group, repetitions, 0.05, count=1)
        sp = outer_minimize(plan)
        assert sp.saddle_value / 2 == pytest.approx(0.5, abs=1e-3)


def test_stabilizer_scheme_single_qubit():
    """n = 1 では Z だけがサンプルされ Θ = ρ"""
    scheme = stabilizer_scheme(StabilizerGroup.from_strings(["Z"]), 20, seed=1)
    assert {str(p) for p in scheme.samples} == {"Z"}
    assert np.allclose(scheme.effective.theta, scheme.target.matrix)


def test_stabilizer_scheme_bell(bell):
    """ベル状態の群では Θ = ρ + (1/3)(I − ρ)"""
    scheme = stabilizer_scheme(StabilizerGroup.from_strings(["XX", "ZZ"]), 10, seed=2)
    expected = bell.matrix + (np.eye(4) - bell.matrix) / 3
    assert np.allclose(scheme.effective.theta, expected)
    plan = scheme.plan(0.05)
    assert plan.repetitions == (10,)


def test_stabilizer_sampling_is_uniform():
    """10⁴ 回のサンプルは 5σ 以内で一様"""
    draws = 10_000
    scheme = stabilizer_scheme(StabilizerGroup.from_strings(["XX", "ZZ"]), draws, seed=3)
    counts = Counter(str(p) for p in scheme.samples)
    assert set(counts) == {"XX", "ZZ", "-YY"}
    sigma = math.sqrt(draws * (1 / 3) * (2 / 3))
    for c in counts.values():
        assert abs(c - draws / 3) < 5 * sigma


def test_stabilizer_sampled_plan_merges_duplicates():
    """サンプルした計画は重複をまとめ、繰り返し回数の合計が R"""
    scheme = stabilizer_scheme(StabilizerGroup.from_strings(["XX", "ZZ"]), 50, seed=4)
    plan = scheme.sampled_plan(0.05)
    assert plan.num_settings <= 3
    assert sum(plan.repetitions) == 50


def test_pauli_scheme_spec_single_qubit():
    """|0⟩⟨0| では Z だけが重みを持ち N = 1、Θ = ρ"""
    ket0 = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    spec = PauliSchemeSpec.from_target(ket0)
    labels = [str(p) for p in spec.paulis]
    assert spec.probabilities[labels.index("Z")] == pytest.approx(1.0)
    assert spec.norm == pytest.approx(1.0)
    assert np.allclose(spec.effective.theta, ket0.matrix)


def test_pauli_scheme_spec_bell(bell):
    """ベル状態では XX, YY, ZZ が等確率で YY の符号は −1"""
    spec = PauliSchemeSpec.from_target(bell)
    labels = [str(p) for p in spec.paulis]
    for name in ("XX", "YY", "ZZ"):
        assert spec.probabilities[labels.index(name)] == pytest.approx(1 / 3)
    assert str(spec.signed(labels.index("YY"))) == "-YY"
    assert spec.norm == pytest.approx(3.0)
    stab = stabilizer_scheme(StabilizerGroup.from_strings(["XX", "ZZ"]), 1, seed=0)
    assert np.allclose(spec.effective.theta, stab.effective.theta)


def test_pauli_scheme_random_target():
    """ランダムな純粋状態でも N は上界以下で、実効 POVM は有効"""
    target = random_pure_state(2, seed=8)
    scheme = pauli_scheme(target, 30, seed=9)
    assert scheme.repetitions == 30
    assert 3.0 - 1e-9 <= scheme.spec.norm <= 3 * math.sqrt(5) + 1e-9
    theta = scheme.effective.theta
    assert np.linalg.eigvalsh(theta).min() >= -1e-10
    assert np.linalg.eigvalsh(np.eye(4) - theta).min() >= -1e-10


def test_dfe_noiseless_stabilizer_estimate(bell):
    """雑音のないデータでは DFE 推定値は 1"""
    scheme = dfe_scheme(bell, 0.1, 0.05, seed=5, epsilon_o=0.0)
    assert scheme.num_draws == math.ceil(1 / (0.1 ** 2 * 0.05))
    assert sum(scheme.draws) + scheme.identity_draws == scheme.num_draws
    assert {p.letters for p in scheme.paulis} <= {"XX", "YY", "ZZ"}
    data = sample_outcomes(scheme.plan, bell, seed=6)
    assert dfe_estimate(scheme, data) == pytest.approx(1.0, abs=1e-9)


def test_dfe_depolarized_estimate(bell):
    """脱分極した状態では推定値が真の忠実度の近く"""
    scheme = dfe_scheme(bell, 0.05, 0.05, seed=7, epsilon_o=0.0)
    sigma = depolarize(bell, 0.2)
    data = sample_outcomes(scheme.plan, sigma, seed=8)
    assert dfe_estimate(scheme, data) == pytest.approx(0.85, abs=0.05)


def test_dfe_rejects_foreign_data(bell):
    """フィンガープリントが違うデータは拒否"""
    scheme = dfe_scheme(bell, 0.1, 0.05, seed=5)
    counts = tuple(np.array([s.repetitions, 0]) for s in scheme.plan.settings)
    with pytest.raises(IntegrityError):
        dfe_estimate(scheme, Dataset(counts, "0" * 64))


def test_dfe_required_shots():
    """m_i の処方と、期待値が下限すれすれのときの上限超過"""
    expected = math.ceil(2 * math.log(2 / 0.05) / (2000 * 0.1 ** 2))
    assert required_shots(2000, 1.0, 0.1, 0.05) == expected
    assert required_shots(2000, -1.0, 0.1, 0.05) == expected
    with pytest.raises(ResourceLimitError):
        required_shots(2000, 2e-12, 0.1, 0.05)


def test_dfe_too_many_draws(bell):
    """ℓ が上限を超えるリスクは ResourceLimitError"""
    with pytest.raises(ResourceLimitError):
        dfe_scheme(bell, 1e-10, 0.05, seed=1)


@pytest.mark.extended
def test_dfe_subspace_plan_risk_four_qubits():
    """4 量子ビット GHZ の DFE 計画: 最小化リスクは 0.05 未満で、固有基底の方が小さい"""
    from fidelimax.core.pauli import stabilizer_state

    target = stabilizer_state(StabilizerGroup.ghz(4))
    subspace = dfe_scheme(target, 0.05, 0.05, seed=1, mode="subspace")
    eigen = dfe_scheme(target, 0.05, 0.05, seed=1, mode="eigenbasis")
    risk_subspace = outer_minimize(subspace.plan).saddle_value / 2
    risk_eigen = outer_minimize(eigen.plan).saddle_value / 2
    assert risk_subspace < 0.05
    assert risk_eigen < risk_subspace
