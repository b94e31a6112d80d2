"""
閉形式のリスクと必要な繰り返し回数のテスト
"""
import math

import numpy as np
import pytest

from fidelimax.core.errors import InvalidInputError, ResourceLimitError
from fidelimax.core.pauli import pauli_expectations
from fidelimax.core.quantum import random_pure_state
from fidelimax.minimax.risk import (
    TwoOutcomeModel,
    pauli_norm_bound,
    pauli_scheme_omegas,
    risk_lower_bound,
    risk_pauli,
    risk_stabilizer,
    risk_two_outcome,
    sample_complexity_optimal,
    sample_complexity_pauli,
    sample_complexity_stabilizer,
    sample_complexity_two_outcome,
    stabilizer_omegas,
    vartheta,
)


def test_vartheta():
    """ϑ(0.1) = 6.539 < 6.54、ϑ(0.25/64) = 3"""
    assert vartheta(0.1) == pytest.approx(6.539, abs=1e-3)
    assert vartheta(0.1) < 6.54
    assert vartheta(0.25 / 64) == pytest.approx(3.0)
    assert 2 < vartheta(0.01) < vartheta(0.1)


def test_risk_lower_bound():
    """下界の例と単調性"""
    assert risk_lower_bound(734, 0.05) == pytest.approx(0.05, abs=1e-4)
    assert risk_lower_bound(1, 0.05) == pytest.approx(0.5 * math.sqrt(1 - 0.025 ** 2))
    values = [risk_lower_bound(r, 0.05) for r in (10, 100, 1000, 10000)]
    assert values == sorted(values, reverse=True)


def test_sample_complexity_optimal():
    """リスク 0.05、ε = 0.05 は 735 回"""
    assert sample_complexity_optimal(0.05, 0.05) == 735
    for r in (0.01, 0.05, 0.1):
        assert risk_lower_bound(sample_complexity_optimal(r, 0.05), 0.05) <= r


def test_sample_complexity_limits():
    """範囲外のリスクと上限超え"""
    with pytest.raises(InvalidInputError):
        sample_complexity_optimal(0.5, 0.05)
    with pytest.raises(ResourceLimitError):
        sample_complexity_optimal(1e-12, 0.05)


@pytest.mark.parametrize("dim,expected", [(4, 1657), (8, 2256), (16, 2591)])
def test_sample_complexity_stabilizer(dim, expected):
    """スタビライザー測定の必要回数"""
    assert sample_complexity_stabilizer(0.05, 0.05, dim) == expected


def test_sample_complexity_pauli():
    """N = d−1 ではスタビライザーと一致、N が上界のとき閉形式どおり"""
    assert sample_complexity_pauli(0.05, 0.05, 3.0, 4) == 1657
    expected = math.ceil(2 * math.log(40) / abs(math.log(1 - 16 / 45 * 0.0025)))
    assert sample_complexity_pauli(0.05, 0.05, 3 * math.sqrt(5), 4) == expected
    with pytest.raises(InvalidInputError):
        sample_complexity_pauli(0.3, 0.05, 1.0, 4)


def test_pauli_norm_bound():
    """(d−1)√(d+1)"""
    assert pauli_norm_bound(2) == pytest.approx(math.sqrt(3))
    assert pauli_norm_bound(4) == pytest.approx(3 * math.sqrt(5))
    for seed in range(5):
        n = 1 + seed % 3
        norm = float(np.abs(pauli_expectations(random_pure_state(n, seed), n)).sum())
        assert norm <= pauli_norm_bound(2 ** n) + 1e-9


def test_omegas():
    """実効 POVM の係数"""
    assert stabilizer_omegas(4) == pytest.approx((1.0, 1 / 3))
    assert stabilizer_omegas(2) == pytest.approx((1.0, 0.0))
    assert pauli_scheme_omegas(3.0, 4) == pytest.approx(stabilizer_omegas(4))
    with pytest.raises(InvalidInputError):
        pauli_scheme_omegas(2.0, 4)


def test_risk_two_outcome_examples():
    """閉形式リスクの例"""
    assert risk_two_outcome(TwoOutcomeModel(1.0, 0.0, 100, 0.05)) == pytest.approx(0.13334, abs=1e-4)
    stab = risk_two_outcome(TwoOutcomeModel(1.0, 1 / 3, 1657, 0.05))
    assert 0.045 < stab <= 0.05


def test_threshold_gives_half():
    """R ≤ R₀ ではリスク 0.5"""
    model = TwoOutcomeModel(1.0, 1 / 3, 1, 0.05)
    below = TwoOutcomeModel(1.0, 1 / 3, math.floor(model.threshold), 0.05)
    assert risk_two_outcome(below) == 0.5
    above = TwoOutcomeModel(1.0, 1 / 3, math.floor(model.threshold) + 1, 0.05)
    assert risk_two_outcome(above) <= 0.5


def test_feasible_intervals_exclude_roots():
    """A_a は根の周りの開区間を除く"""
    model = TwoOutcomeModel(0.8, 0.3, 50, 0.05)
    for lo, hi in model.feasible_intervals():
        for a in (lo, hi):
            for r_lo, r_hi in (model.a1, model.a2):
                assert not (r_lo < a < r_hi)


def test_risk_stabilizer():
    """δ = 2 は ω₂ = 0、δ = 4 は二値モデルと一致"""
    gamma = 0.025 ** (2 / 100)
    assert risk_stabilizer(2, 100, 0.05) == pytest.approx(0.5 * math.sqrt(1 - gamma))
    assert risk_stabilizer(4, 1657, 0.05) == pytest.approx(
        risk_two_outcome(TwoOutcomeModel.stabilizer(4, 1657, 0.05)), abs=1e-9
    )
    for delta in (16, 256, 4096):
        assert risk_stabilizer(delta, 1000, 0.05) <= 0.5


def test_sample_complexity_two_outcome_is_sufficient():
    """求めた回数でのリスクは目標以下"""
    for omega2 in (0.0, 1 / 3, 0.45):
        r = sample_complexity_two_outcome(0.05, 0.05, 1.0, omega2)
        assert risk_two_outcome(TwoOutcomeModel(1.0, omega2, r, 0.05)) <= 0.05 + 1e-9


def test_risk_pauli_stabilizer_target():
    """N = d−1 のパウリ重みサンプリングはスタビライザー測定と同じリスク"""
    assert risk_pauli(3.0, 4, 1657, 0.05) == pytest.approx(risk_stabilizer(4, 1657, 0.05))


@pytest.mark.parametrize("delta", [2, 4, 8, 16])
@pytest.mark.parametrize("reps", [100, 1657, 5000])
@pytest.mark.parametrize("epsilon", [0.01, 0.05])
def test_risk_stabilizer_matches_two_outcome(delta, reps, epsilon):
    """場合分けの式は ω₁ = 1, ω₂ = (δ/2−1)/(δ−1) の二値リスクと一致"""
    model = TwoOutcomeModel.stabilizer(delta, reps, epsilon)
    assert risk_stabilizer(delta, reps, epsilon) == pytest.approx(
        risk_two_outcome(model), abs=1e-10
    )


TWO_OUTCOME_GRID = [(1.0, 0.2), (0.9, 0.1), (0.7, 0.4), (0.6, 0.5), (1.0, 0.0)]


@pytest.mark.parametrize("omega1,omega2", TWO_OUTCOME_GRID)
@pytest.mark.parametrize("epsilon", [0.01, 0.05])
def test_risk_two_outcome_does_not_increase_with_reps(omega1, omega2, epsilon):
    """R を増やしても二値リスクは増えない"""
    risks = [
        risk_two_outcome(TwoOutcomeModel(omega1, omega2, r, epsilon))
        for r in (1, 10, 50, 100, 500, 1000, 5000, 20000)
    ]
    for before, after in zip(risks, risks[1:]):
        assert after <= before + 1e-12


@pytest.mark.parametrize("omega1,omega2", TWO_OUTCOME_GRID)
@pytest.mark.parametrize("reps", [1, 10, 100, 1000, 10000])
@pytest.mark.parametrize("epsilon", [0.01, 0.05])
def test_risk_lower_bound_below_two_outcome(omega1, omega2, reps, epsilon):
    """どの二値 POVM のリスクも下界以上"""
    model = TwoOutcomeModel(omega1, omega2, reps, epsilon)
    assert risk_lower_bound(reps, epsilon) <= risk_two_outcome(model) + 1e-12
