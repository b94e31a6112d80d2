"""
コマンドラインのテスト（CliRunner）
"""
import json
import re

import numpy as np
import pytest
from click.testing import CliRunner

from fidelimax.cli import main
from fidelimax.core.codec import dump_plan, dump_state
from fidelimax.core.pauli import PauliString
from fidelimax.minimax.estimator import Dataset, dump_dataset
from fidelimax.schemes.generators import pauli_plan


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def plan_file(tmp_path, toy_plan):
    path = tmp_path / "plan.json"
    path.write_text(dump_plan(toy_plan), encoding="utf-8")
    return path


def test_version(runner):
    """--version"""
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "fidelimax" in result.output


def test_plan_validate_ok(runner, plan_file, toy_plan):
    """正しい計画は終了コード 0 でフィンガープリントを表示"""
    result = runner.invoke(main, ["plan", "validate", str(plan_file)])
    assert result.exit_code == 0
    assert toy_plan.fingerprint in result.output


def test_plan_validate_lists_violations(runner, tmp_path, toy_plan):
    """不変条件違反はすべて列挙して終了コード 1"""
    doc = json.loads(dump_plan(toy_plan))
    doc["epsilon"] = 0.3
    doc["settings"][0]["repetitions"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    result = runner.invoke(main, ["plan", "validate", str(path)])
    assert result.exit_code == 1
    assert result.output.count("✗") >= 2


def test_plan_validate_parse_error(runner, tmp_path):
    """JSON として読めなければ終了コード 2"""
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    result = runner.invoke(main, ["plan", "validate", str(path)])
    assert result.exit_code == 2


def test_build_and_estimate(runner, plan_file, tmp_path, toy_plan):
    """推定量を作ってデータに適用"""
    est_path = tmp_path / "est.json"
    result = runner.invoke(main, ["build", "--plan", str(plan_file), "--out", str(est_path)])
    assert result.exit_code == 0, result.output
    assert "risk = " in result.output
    assert json.loads(est_path.read_text())["plan_fingerprint"] == toy_plan.fingerprint

    data_path = tmp_path / "data.json"
    data = Dataset((np.array([0, 100]),), toy_plan.fingerprint)
    data_path.write_text(dump_dataset(data), encoding="utf-8")
    result = runner.invoke(
        main, ["estimate", "--estimator", str(est_path), "--data", str(data_path)]
    )
    assert result.exit_code == 0, result.output
    assert re.search(r"F = \S+ ± \S+ \(confidence 0\.95\)", result.output)


def test_reduced_flag_rejects_general_plan(runner, tmp_path, ket1):
    """二値の実効 POVM でない計画に縮約ソルバーを使うと終了コード 1"""
    path = tmp_path / "x.json"
    path.write_text(dump_plan(pauli_plan(ket1, [PauliString("X")], 10, 0.05)), encoding="utf-8")
    result = runner.invoke(
        main,
        ["build", "--plan", str(path), "--out", str(tmp_path / "est.json"), "--reduced-two-outcome"],
    )
    assert result.exit_code == 1
    assert not (tmp_path / "est.json").exists()


def test_risk_commands(runner):
    """閉形式リスクのサブコマンド"""
    result = runner.invoke(
        main, ["risk", "stabilizer", "--invert", "--risk", "0.05", "--epsilon", "0.05", "--dim", "4"]
    )
    assert result.exit_code == 0
    assert result.output.strip() == "1657"

    result = runner.invoke(main, ["risk", "vartheta", "0.1"])
    assert result.exit_code == 0
    assert result.output.strip().startswith("6.539")

    result = runner.invoke(
        main, ["risk", "lower-bound", "--invert", "--risk", "0.05", "--epsilon", "0.05"]
    )
    assert result.output.strip() == "735"


def test_risk_out_of_range_is_an_error(runner):
    """範囲外の ε は終了コード 1"""
    result = runner.invoke(main, ["risk", "vartheta", "0.3"])
    assert result.exit_code == 1


def test_curve_csv(runner, tmp_path, ket1):
    """リスク曲線の CSV ヘッダーと行数"""
    target = tmp_path / "target.json"
    target.write_text(dump_state(ket1), encoding="utf-8")
    out = tmp_path / "curve.csv"
    result = runner.invoke(
        main, ["curve", "--target", str(target), "--L", "0,1", "--R", "20", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == "L,R,risk"
    assert len(lines) == 3
    assert lines[1].startswith("0,20,")


def test_scheme_stabilizer_and_simulate(runner, tmp_path):
    """スタビライザー計画を作ってカウントを生成"""
    plan_path = tmp_path / "stab.json"
    result = runner.invoke(
        main,
        ["scheme", "stabilizer", "--generators", "XX,ZZ", "--reps", "50",
         "--epsilon", "0.05", "--out", str(plan_path)],
    )
    assert result.exit_code == 0, result.output
    data_path = tmp_path / "counts.json"
    result = runner.invoke(
        main, ["simulate", "--plan", str(plan_path), "--seed", "1", "--out", str(data_path)]
    )
    assert result.exit_code == 0, result.output
    assert sum(json.loads(data_path.read_text())["counts"][0]) == 50


def test_robustness_and_mle(runner, plan_file, tmp_path, toy_plan):
    """摂動なしの頑健性レポートと MLE の JSON 出力"""
    est_path = tmp_path / "est.json"
    assert runner.invoke(main, ["build", "--plan", str(plan_file), "--out", str(est_path)]).exit_code == 0

    report_path = tmp_path / "robust.json"
    result = runner.invoke(
        main,
        ["robustness", "--plan", str(plan_file), "--estimator", str(est_path),
         "--depolarize", "0.1", "--seed", "3", "--out", str(report_path)],
    )
    assert result.exit_code == 0, result.output
    assert json.loads(report_path.read_text())["within_bound"] is True

    data_path = tmp_path / "data.json"
    data_path.write_text(
        dump_dataset(Dataset((np.array([10, 90]),), toy_plan.fingerprint)), encoding="utf-8"
    )
    mle_path = tmp_path / "mle.json"
    result = runner.invoke(
        main, ["mle", "--plan", str(plan_file), "--data", str(data_path), "--out", str(mle_path)]
    )
    assert result.exit_code == 0, result.output
    doc = json.loads(mle_path.read_text())
    assert 0.0 <= doc["fidelity"] <= 1.0 + 1e-9
    assert "interval" not in doc or doc["interval"] is None


def test_risk_stabilizer_help_describes_delta(runner):
    """--delta の説明は Θ のパラメータ δ"""
    result = runner.invoke(main, ["risk", "stabilizer", "--help"])
    assert result.exit_code == 0
    assert "Θ のパラメータ δ" in result.output
    assert "ω₁ − ω₂" not in result.output
