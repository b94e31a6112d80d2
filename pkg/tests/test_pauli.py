"""
パウリ文字列とスタビライザー群のテスト
"""
import numpy as np
import pytest

from fidelimax.core.errors import InvalidInputError, ResourceLimitError
from fidelimax.core.pauli import (
    PauliString,
    StabilizerGroup,
    all_pauli_strings,
    enumerate_group,
    pauli_expectations,
    pauli_matrix,
    qubit_count,
    stabilizer_state,
)
from fidelimax.core.quantum import DensityMatrix, random_pure_state


def test_pauli_matrix_examples():
    """Z と −XX の行列"""
    assert np.allclose(pauli_matrix(PauliString("Z")), np.diag([1, -1]))
    x = np.array([[0, 1], [1, 0]])
    assert np.allclose(pauli_matrix(PauliString.parse("-XX")), -np.kron(x, x))


def test_pauli_matrices_are_traceless():
    """恒等以外のパウリはトレース 0"""
    for p in all_pauli_strings(2, include_identity=True):
        trace = np.trace(pauli_matrix(p))
        assert trace == pytest.approx(4.0 if p.is_identity else 0.0)


def test_parse_and_str():
    """符号付き文字列の解析と表示"""
    p = PauliString.parse("-yy")
    assert p.letters == "YY"
    assert p.sign == -1
    assert str(p) == "-YY"
    assert str(PauliString.parse("+ZZ")) == "ZZ"
    with pytest.raises(InvalidInputError):
        PauliString.parse("XQ")


def test_expectations_single_qubit():
    """|0⟩⟨0| は Z の期待値 1、X と Y は 0"""
    ket0 = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    assert pauli_expectations(ket0, 1) == pytest.approx([0.0, 0.0, 1.0])
    assert pauli_expectations(DensityMatrix.maximally_mixed(2), 1) == pytest.approx([0, 0, 0])


def test_expectations_bell(bell):
    """ベル状態は XX, −YY, ZZ の 3 つだけが ±1"""
    values = pauli_expectations(bell, 2)
    labels = [str(p) for p in all_pauli_strings(2)]
    nonzero = {labels[i]: v for i, v in enumerate(values) if abs(v) > 1e-12}
    assert nonzero == pytest.approx({"XX": 1.0, "YY": -1.0, "ZZ": 1.0})


def test_sum_of_squared_expectations():
    """純粋状態では Σ tr(W_iρ)² = d − 1"""
    for seed in range(3):
        rho = random_pure_state(3, seed=seed)
        assert float(np.sum(pauli_expectations(rho, 3) ** 2)) == pytest.approx(7.0)


def test_stabilizer_states():
    """生成元 Z は |0⟩⟨0|、{XX, ZZ} はベル状態"""
    ket0 = stabilizer_state(StabilizerGroup.from_strings(["Z"]))
    assert np.allclose(ket0.matrix, np.diag([1, 0]))
    bell = stabilizer_state(StabilizerGroup.from_strings(["XX", "ZZ"]))
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(bell.matrix, np.outer(phi, phi))
    assert bell.is_pure


def test_enumerate_group():
    """群の元の列挙"""
    assert [str(p) for p in enumerate_group(StabilizerGroup.from_strings(["Z"]))] == ["I", "Z"]
    elements = enumerate_group(StabilizerGroup.from_strings(["XX", "ZZ"]))
    assert {str(p) for p in elements} == {"II", "XX", "ZZ", "-YY"}
    assert elements[0].is_identity
    assert len(enumerate_group(StabilizerGroup.ghz(4))) == 16


def test_ghz_state_is_stabilized():
    """GHZ 生成元で作った状態は各元の +1 固有状態"""
    group = StabilizerGroup.ghz(3)
    rho = stabilizer_state(group)
    for element in enumerate_group(group):
        assert rho.expectation(pauli_matrix(element)) == pytest.approx(1.0)


def test_invalid_groups_rejected():
    """反可換・従属な生成元は拒否"""
    with pytest.raises(InvalidInputError):
        StabilizerGroup.from_strings(["XI", "ZI"])
    with pytest.raises(InvalidInputError):
        StabilizerGroup.from_strings(["XX", "XX"])
    with pytest.raises(InvalidInputError):
        StabilizerGroup.from_strings(["XX"])


def test_enumeration_limit():
    """13 量子ビット以上の群は列挙しない"""
    with pytest.raises(ResourceLimitError):
        enumerate_group(StabilizerGroup.ghz(13))


def test_qubit_count():
    """次元は 2 のべき"""
    assert qubit_count(8) == 3
    with pytest.raises(InvalidInputError):
        qubit_count(6)
