"""
テスト共通のフィクスチャ
"""
import numpy as np
import pytest

from fidelimax.core.pauli import PauliString, StabilizerGroup, stabilizer_state
from fidelimax.core.quantum import DensityMatrix, MeasurementPlan
from fidelimax.minimax.saddle import build_estimator
from fidelimax.schemes.generators import optimal_povm, pauli_plan


def make_ket1() -> DensityMatrix:
    return DensityMatrix(np.diag([0.0, 1.0]).astype(complex))


def make_toy_plan() -> MeasurementPlan:
    """|1⟩⟨1| を Z の固有基底で 100 回測る 1 量子ビットの計画"""
    return pauli_plan(make_ket1(), [PauliString("Z")], 100, 0.05, mode="eigenbasis")


@pytest.fixture
def ket1() -> DensityMatrix:
    return make_ket1()


@pytest.fixture
def toy_plan() -> MeasurementPlan:
    return make_toy_plan()


@pytest.fixture
def bell() -> DensityMatrix:
    return stabilizer_state(StabilizerGroup.from_strings(["XX", "ZZ"]))


@pytest.fixture
def optimal_plan(ket1):
    """{ρ, I−ρ} を 100 回測る計画"""
    return MeasurementPlan(ket1, 0.05, (optimal_povm(ket1, 100),))


@pytest.fixture(scope="session")
def toy_solution():
    """トイ計画の推定量と鞍点（ソルバーは 1 回だけ実行）"""
    plan = make_toy_plan()
    estimator, sp = build_estimator(plan)
    return plan, estimator, sp
