"""
JSON 形式とフィンガープリントのテスト
"""
import json

import numpy as np
import pytest

from fidelimax.core.codec import (
    dump_plan,
    dump_state,
    is_fingerprint,
    load_plan,
    load_state,
)
from fidelimax.core.errors import InvalidInputError, ParseError
from fidelimax.core.pauli import PauliString
from fidelimax.core.quantum import MeasurementPlan
from fidelimax.schemes.generators import pauli_plan


def test_plan_file_roundtrip(tmp_path, toy_plan):
    """計画を書き出して読み戻すとフィンガープリントが一致"""
    path = tmp_path / "plan.json"
    path.write_text(dump_plan(toy_plan), encoding="utf-8")
    loaded = load_plan(path)
    assert loaded.fingerprint == toy_plan.fingerprint
    assert loaded.settings[0].values == toy_plan.settings[0].values
    assert is_fingerprint(loaded.fingerprint)


def test_fingerprint_changes_with_repetitions(toy_plan):
    """繰り返し回数が変わればフィンガープリントも変わる"""
    changed = toy_plan.with_settings([toy_plan.settings[0].with_repetitions(101)])
    assert changed.fingerprint != toy_plan.fingerprint


def test_observable_in_fingerprint(ket1):
    """観測量は計画ファイルとフィンガープリントに含まれる"""
    plain = pauli_plan(ket1, [PauliString("Z")], 10, 0.05)
    with_obs = MeasurementPlan(ket1, 0.05, plain.settings, observable=np.diag([1.0, -1.0]))
    assert with_obs.fingerprint != plain.fingerprint
    assert "observable" in json.loads(dump_plan(with_obs))
    assert "observable" not in json.loads(dump_plan(plain))


def test_state_roundtrip(tmp_path, bell):
    """状態の行列 JSON"""
    path = tmp_path / "state.json"
    path.write_text(dump_state(bell), encoding="utf-8")
    assert np.allclose(load_state(path).matrix, bell.matrix)


def test_malformed_json_is_parse_error(tmp_path):
    """壊れた JSON は ParseError"""
    path = tmp_path / "plan.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_plan(path)


def test_unknown_field_is_parse_error(tmp_path, toy_plan):
    """未知のキーは ParseError"""
    doc = json.loads(dump_plan(toy_plan))
    doc["extra"] = 1
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(ParseError):
        load_plan(path)


def test_invalid_plan_lists_all_violations(tmp_path, toy_plan):
    """不変条件の違反はまとめて報告"""
    doc = json.loads(dump_plan(toy_plan))
    doc["epsilon"] = 0.3
    doc["settings"][0]["effects"][1] = [[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(InvalidInputError) as info:
        load_plan(path)
    message = str(info.value)
    assert "epsilon" in message
    assert "Z" in message


def test_zero_repetitions_rejected_in_files(tmp_path, toy_plan):
    """ファイル上の設定は R ≥ 1"""
    doc = json.loads(dump_plan(toy_plan))
    doc["settings"][0]["repetitions"] = 0
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    with pytest.raises(InvalidInputError):
        load_plan(path)
