"""
加速射影勾配法のテスト
"""
import numpy as np
import pytest

from fidelimax.core.config import SolverConfig
from fidelimax.core.quantum import project_simplex
from fidelimax.minimax.ascent import accelerated_ascent, projected_gradient_norm


def _box(x):
    return np.clip(x, 0.0, 1.0)


def test_quadratic_on_box():
    """箱の外にある中心は箱への射影が最大点"""
    center = np.array([1.7, 0.3, -0.4])

    result = accelerated_ascent(
        lambda x: -float(np.sum((x - center) ** 2)),
        lambda x: -2.0 * (x - center),
        _box,
        np.full(3, 0.5),
        SolverConfig(),
        tolerance=1e-12,
        max_iters=2000,
        gradient_tolerance=1e-9,
    )
    assert result.converged
    assert result.x == pytest.approx([1.0, 0.3, 0.0], abs=1e-6)
    assert projected_gradient_norm(result.x, lambda x: -2.0 * (x - center), _box) < 1e-6


def test_entropy_on_simplex():
    """単体上のエントロピー最大化は一様分布"""
    def entropy(x):
        p = np.clip(x, 1e-300, None)
        return -float(np.sum(p * np.log(p)))

    def gradient(x):
        return -(np.log(np.clip(x, 1e-300, None)) + 1.0)

    result = accelerated_ascent(
        entropy, gradient, project_simplex, np.array([0.7, 0.2, 0.1]), SolverConfig(),
        tolerance=1e-12, max_iters=5000, gradient_tolerance=1e-8,
    )
    assert result.x == pytest.approx(np.full(3, 1 / 3), abs=1e-5)


def test_iteration_limit_reports_not_converged():
    """反復上限に達したら converged=False"""
    center = np.array([5.0, -5.0])
    result = accelerated_ascent(
        lambda x: -float(np.sum((x - center) ** 2)),
        lambda x: -2.0 * (x - center),
        lambda x: x,
        np.zeros(2),
        SolverConfig(initial_step=1e-6),
        tolerance=0.0,
        max_iters=3,
    )
    assert not result.converged
    assert result.iterations == 3
