"""
fidelimax コマンドラインインターフェース
"""
import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, List, Optional, TypeVar

import click
from dotenv import load_dotenv
from rich.console import Console

from . import __version__
from .baseline.mle import bootstrap_interval, mle_reconstruct, run_mle_coverage
from .core.codec import PlanDocument, dump_plan, dump_state, load_plan, load_state, parse_model, read_text
from .core.config import MleConfig, RuntimeSettings, SolverConfig
from .core.errors import ConvergenceError, ErrorHandler, FidelimaxError
from .core.pauli import StabilizerGroup
from .core.quantum import DensityMatrix, MeasurementPlan, depolarize, random_pure_state
from .minimax.estimator import dump_dataset, evaluate, load_dataset, load_estimator, serialize
from .minimax.risk import (
    TwoOutcomeModel,
    pauli_norm_bound,
    risk_lower_bound,
    risk_pauli,
    risk_stabilizer,
    risk_two_outcome,
    sample_complexity_optimal,
    sample_complexity_pauli,
    sample_complexity_stabilizer,
    sample_complexity_two_outcome,
    vartheta,
)
from .minimax.saddle import build_estimator, extract_estimator
from .minimax.reduced import solve_reduced_plan
from .schemes.dfe import dfe_estimate, dfe_scheme
from .schemes.generators import MODES, optimal_povm, pauli_scheme, stabilizer_scheme
from .simulation.experiments import perturb_and_estimate, risk_curve, run_coverage
from .simulation.sampler import sample_outcomes
from .ui.report import (
    curve_csv,
    fmt,
    render_curve,
    render_estimate,
    render_mle,
    render_mle_trials,
    render_robustness,
    render_saddle,
    render_trials,
    setup_logging,
)

# .envファイルを読み込み
load_dotenv()

F = TypeVar("F", bound=Callable[..., Any])

PLAN_PATH = click.Path(exists=True, dir_okay=False)


def handle_errors(func: F) -> F:
    """ドメインエラーをメッセージと終了コード（解析 2、その他 1）に変換"""

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (FidelimaxError, OSError) as e:
            click.echo(ErrorHandler.describe(e), err=True)
            sys.exit(ErrorHandler.exit_code(e))

    return wrapper  # type: ignore[return-value]


def _console() -> Console:
    return Console(highlight=False)


def _threads(ctx: click.Context, threads: Optional[int]) -> int:
    if threads is not None:
        if threads < 1:
            raise click.BadParameter("1 以上が必要です", param_hint="--threads")
        return threads
    return ctx.obj.threads if ctx.obj is not None else 1


def _int_list(text: str, name: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"カンマ区切りの整数が必要です: {text}", param_hint=name)


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _true_state(plan: MeasurementPlan, state: Optional[str], noise: Optional[float]) -> DensityMatrix:
    """--state（省略時は目標状態）に --depolarize を掛けた真の状態"""
    sigma = load_state(state) if state else plan.target
    if noise is not None:
        sigma = depolarize(sigma, noise)
    return sigma


def _scheme_target(target: Optional[str], state_seed: Optional[int], n: Optional[int]) -> DensityMatrix:
    if target:
        return load_state(target)
    if state_seed is None or n is None:
        raise click.UsageError("--target か、--state-seed と --n の組が必要です")
    return random_pure_state(n, state_seed)


def _required(value: Any, name: str) -> Any:
    if value is None:
        raise click.UsageError(f"{name} が必要です")
    return value


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='デバッグログを表示')
@click.version_option(__version__, prog_name='fidelimax')
@click.pass_context
def main(ctx: click.Context, verbose: bool) -> None:
    """fidelimax - ミニマックス最適なフィデリティ推定と信頼区間"""
    try:
        settings = RuntimeSettings.from_env()
    except FidelimaxError as e:
        click.echo(ErrorHandler.describe(e), err=True)
        sys.exit(ErrorHandler.exit_code(e))
    setup_logging("DEBUG" if verbose else settings.log_level)
    ctx.obj = settings


# ---------------------------------------------------------------- plan


@main.group()
def plan() -> None:
    """測定計画ファイルの操作"""


@plan.command('validate')
@click.argument('plan_path', type=PLAN_PATH)
@handle_errors
def plan_validate(plan_path: str) -> None:
    """計画ファイルのすべての不変条件を検査"""
    doc = parse_model(PlanDocument, read_text(plan_path))
    issues = doc.violations()
    if issues:
        for issue in issues:
            click.echo(f"✗ {issue}", err=True)
        sys.exit(1)
    checked = doc.to_plan()
    click.echo(
        f"✓ d = {checked.dim}, 設定 {checked.num_settings} 個, "
        f"総測定回数 {sum(checked.repetitions)}, fingerprint {checked.fingerprint}"
    )


# ---------------------------------------------------------------- build / estimate


@main.command()
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True, help='測定計画 JSON')
@click.option('--out', required=True, type=click.Path(dir_okay=False), help='推定量 JSON の出力先')
@click.option('--reduced-two-outcome', is_flag=True, help='実効二値 POVM 用の縮約ソルバーを使う')
@click.option('--delta', type=float, help='報告する精度 δ')
@click.option('--config', 'config_path', type=PLAN_PATH, help='ソルバー設定 YAML')
@click.option('--max-iters', type=int, help='内側最大化の反復上限')
@handle_errors
def build(
    plan_path: str,
    out: str,
    reduced_two_outcome: bool,
    delta: Optional[float],
    config_path: Optional[str],
    max_iters: Optional[int],
) -> None:
    """鞍点を解いてアフィン推定量を作る"""
    measurement = load_plan(plan_path)
    config = SolverConfig.from_yaml(config_path) if config_path else SolverConfig()
    config = config.with_overrides(reported_precision=delta, inner_max_iters=max_iters)
    if reduced_two_outcome:
        sp = solve_reduced_plan(measurement, config)
        estimator = extract_estimator(sp, measurement)
    else:
        estimator, sp = build_estimator(measurement, config)
    render_saddle(_console(), sp, estimator)
    if not sp.converged:
        raise ConvergenceError(
            f"{sp.iterations} 回の反復で収束しませんでした（α* = {fmt(sp.alpha_star)}, "
            f"saddle = {fmt(sp.saddle_value)}）"
        )
    Path(out).write_bytes(serialize(estimator))
    click.echo(f"risk = {fmt(estimator.risk)}")


@main.command()
@click.option('--estimator', 'estimator_path', type=PLAN_PATH, required=True, help='推定量 JSON')
@click.option('--data', 'data_path', type=PLAN_PATH, required=True, help='カウント JSON')
@handle_errors
def estimate(estimator_path: str, data_path: str) -> None:
    """データから推定値と信頼区間を出す"""
    report = evaluate(load_estimator(estimator_path), load_dataset(data_path))
    render_estimate(_console(), report)


# ---------------------------------------------------------------- risk


@main.group()
def risk() -> None:
    """リスクと必要な繰り返し回数の閉形式"""


@risk.command('vartheta')
@click.argument('epsilon', type=float)
@handle_errors
def risk_vartheta(epsilon: float) -> None:
    """保証係数 ϑ(ε)"""
    click.echo(fmt(vartheta(epsilon)))


@risk.command('lower-bound')
@click.option('--reps', type=int, help='繰り返し回数 R')
@click.option('--epsilon', type=float, required=True)
@click.option('--invert', is_flag=True, help='リスクから必要な R を求める')
@click.option('--risk', 'target_risk', type=float, help='目標リスク（--invert と併用）')
@handle_errors
def risk_lower(reps: Optional[int], epsilon: float, invert: bool, target_risk: Optional[float]) -> None:
    """R 回の測定で到達できるリスクの下界"""
    if invert:
        click.echo(str(sample_complexity_optimal(_required(target_risk, '--risk'), epsilon)))
    else:
        click.echo(fmt(risk_lower_bound(_required(reps, '--reps'), epsilon)))


@risk.command('two-outcome')
@click.option('--omega1', type=float, required=True)
@click.option('--omega2', type=float, required=True)
@click.option('--reps', type=int)
@click.option('--epsilon', type=float, required=True)
@click.option('--invert', is_flag=True)
@click.option('--risk', 'target_risk', type=float)
@handle_errors
def risk_two(
    omega1: float,
    omega2: float,
    reps: Optional[int],
    epsilon: float,
    invert: bool,
    target_risk: Optional[float],
) -> None:
    """実効二値 POVM の閉形式リスク"""
    if invert:
        count = sample_complexity_two_outcome(_required(target_risk, '--risk'), epsilon, omega1, omega2)
        click.echo(str(count))
    else:
        model = TwoOutcomeModel(omega1, omega2, _required(reps, '--reps'), epsilon)
        click.echo(fmt(risk_two_outcome(model)))


@risk.command('stabilizer')
@click.option('--delta', type=float, help='Θ のパラメータ δ（2 以上、通常は次元 d）')
@click.option('--reps', type=int)
@click.option('--epsilon', type=float, required=True)
@click.option('--invert', is_flag=True)
@click.option('--risk', 'target_risk', type=float)
@click.option('--dim', type=int, help='次元 d（--invert と併用）')
@handle_errors
def risk_stab(
    delta: Optional[float],
    reps: Optional[int],
    epsilon: float,
    invert: bool,
    target_risk: Optional[float],
    dim: Optional[int],
) -> None:
    """スタビライザー測定のリスク"""
    if invert:
        count = sample_complexity_stabilizer(
            _required(target_risk, '--risk'), epsilon, _required(dim, '--dim')
        )
        click.echo(str(count))
    else:
        click.echo(fmt(risk_stabilizer(_required(delta, '--delta'), _required(reps, '--reps'), epsilon)))


@risk.command('pauli')
@click.option('--norm', type=float, help='N = Σ_i |tr(W_iρ)|')
@click.option('--dim', type=int, required=True)
@click.option('--reps', type=int)
@click.option('--epsilon', type=float)
@click.option('--risk', 'target_risk', type=float, help='目標リスク（必要な R を出力）')
@click.option('--norm-bound', is_flag=True, help='N の上界 (d−1)√(d+1) を出力')
@handle_errors
def risk_pauli_cmd(
    norm: Optional[float],
    dim: int,
    reps: Optional[int],
    epsilon: Optional[float],
    target_risk: Optional[float],
    norm_bound: bool,
) -> None:
    """パウリ重みサンプリングのリスクと必要な繰り返し回数"""
    if norm_bound:
        click.echo(fmt(pauli_norm_bound(dim)))
        return
    norm = _required(norm, '--norm')
    epsilon = _required(epsilon, '--epsilon')
    if target_risk is not None:
        click.echo(str(sample_complexity_pauli(target_risk, epsilon, norm, dim)))
    else:
        click.echo(fmt(risk_pauli(norm, dim, _required(reps, '--reps'), epsilon)))


# ---------------------------------------------------------------- scheme


@main.group()
def scheme() -> None:
    """測定スキームから計画ファイルを作る"""


def _target_options(func: F) -> F:
    func = click.option('--n', type=int, help='ランダム目標の量子ビット数')(func)
    func = click.option('--state-seed', type=int, help='ランダムな純粋目標状態のシード')(func)
    func = click.option('--target', type=PLAN_PATH, help='目標状態の行列 JSON')(func)
    return func


@scheme.command('optimal')
@click.option('--target', type=PLAN_PATH, required=True, help='目標状態の行列 JSON')
@click.option('--reps', type=int, required=True)
@click.option('--epsilon', type=float, required=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@handle_errors
def scheme_optimal(target: str, reps: int, epsilon: float, out: str) -> None:
    """{ρ, I−ρ} を R 回測る計画"""
    rho = load_state(target)
    measurement = MeasurementPlan(rho, epsilon, (optimal_povm(rho, reps),))
    _write(out, dump_plan(measurement))
    click.echo(f"計画を書き出しました: {out}")


@scheme.command('stabilizer')
@click.option('--generators', help='カンマ区切りの生成元（例: XX,ZZ）')
@click.option('--n', type=int, help='GHZ の生成元（X⊗n と Z_iZ_{i+1}）の量子ビット数')
@click.option('--reps', type=int, required=True)
@click.option('--epsilon', type=float, required=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--sampled', is_flag=True, help='実効 POVM ではなくサンプルしたパウリの計画を出力')
@click.option('--mode', type=click.Choice(MODES), default='subspace', show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.option('--target-out', type=click.Path(dir_okay=False), help='スタビライザー状態の出力先')
@handle_errors
def scheme_stabilizer(
    generators: Optional[str],
    n: Optional[int],
    reps: int,
    epsilon: float,
    seed: int,
    sampled: bool,
    mode: str,
    out: str,
    target_out: Optional[str],
) -> None:
    """スタビライザー群の元を一様にサンプルする測定"""
    if generators:
        group = StabilizerGroup.from_strings(g.strip() for g in generators.split(","))
    elif n is not None:
        group = StabilizerGroup.ghz(n)
    else:
        raise click.UsageError("--generators か --n が必要です")
    result = stabilizer_scheme(group, reps, seed)
    measurement = result.sampled_plan(epsilon, mode) if sampled else result.plan(epsilon)
    _write(out, dump_plan(measurement))
    if target_out:
        _write(target_out, dump_state(result.target))
    click.echo(
        f"ω₁ = {fmt(result.effective.omega1)}, ω₂ = {fmt(result.effective.omega2)}, "
        f"計画を書き出しました: {out}"
    )


@scheme.command('pauli')
@_target_options
@click.option('--reps', type=int, required=True)
@click.option('--epsilon', type=float, required=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--sampled', is_flag=True, help='実効 POVM ではなくサンプルしたパウリの計画を出力')
@click.option('--mode', type=click.Choice(MODES), default='subspace', show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@handle_errors
def scheme_pauli(
    target: Optional[str],
    state_seed: Optional[int],
    n: Optional[int],
    reps: int,
    epsilon: float,
    seed: int,
    sampled: bool,
    mode: str,
    out: str,
) -> None:
    """|tr(W_iρ)| に比例してパウリを選ぶ測定"""
    result = pauli_scheme(_scheme_target(target, state_seed, n), reps, seed)
    measurement = result.sampled_plan(epsilon, mode) if sampled else result.plan(epsilon)
    _write(out, dump_plan(measurement))
    click.echo(f"N = {fmt(result.spec.norm)}, 計画を書き出しました: {out}")


@scheme.command('dfe')
@_target_options
@click.option('--risk', 'target_risk', type=float, required=True, help='目標の加法誤差')
@click.option('--epsilon', type=float, required=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--mode', type=click.Choice(MODES), default='subspace', show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.option('--data', 'data_path', type=PLAN_PATH, help='このスキームのカウント JSON（推定値を出力）')
@handle_errors
def scheme_dfe(
    target: Optional[str],
    state_seed: Optional[int],
    n: Optional[int],
    target_risk: float,
    epsilon: float,
    seed: int,
    mode: str,
    out: str,
    data_path: Optional[str],
) -> None:
    """直接フィデリティ推定（DFE）の計画"""
    result = dfe_scheme(_scheme_target(target, state_seed, n), target_risk, epsilon, seed, mode)
    _write(out, dump_plan(result.plan))
    click.echo(f"ℓ = {result.num_draws}, 総測定回数 {sum(result.plan.repetitions)}")
    if data_path:
        click.echo(f"F = {fmt(dfe_estimate(result, load_dataset(data_path)))}")


# ---------------------------------------------------------------- simulation


@main.command()
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True)
@click.option('--state', type=PLAN_PATH, help='真の状態（省略時は目標状態）')
@click.option('--depolarize', 'noise', type=float, help='脱分極ノイズの強さ p')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@handle_errors
def simulate(
    plan_path: str, state: Optional[str], noise: Optional[float], seed: int, out: str
) -> None:
    """計画を真の状態で実行したカウントを生成"""
    measurement = load_plan(plan_path)
    data = sample_outcomes(measurement, _true_state(measurement, state, noise), seed)
    _write(out, dump_dataset(data))
    click.echo(f"カウントを書き出しました: {out}")


@main.command()
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True)
@click.option('--estimator', 'estimator_path', type=PLAN_PATH, required=True)
@click.option('--state', type=PLAN_PATH)
@click.option('--depolarize', 'noise', type=float)
@click.option('--trials', type=int, default=200, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--threads', type=int, help='並列スレッド数（既定は FIDELIMAX_THREADS）')
@click.option('--out', type=click.Path(dir_okay=False), help='レポート JSON の出力先')
@click.pass_context
@handle_errors
def trials(
    ctx: click.Context,
    plan_path: str,
    estimator_path: str,
    state: Optional[str],
    noise: Optional[float],
    trials: int,
    seed: int,
    threads: Optional[int],
    out: Optional[str],
) -> None:
    """推定区間の被覆率を繰り返し試行で測る"""
    measurement = load_plan(plan_path)
    report = run_coverage(
        measurement,
        load_estimator(estimator_path),
        _true_state(measurement, state, noise),
        trials,
        seed,
        _threads(ctx, threads),
    )
    render_trials(_console(), report)
    if out:
        _write(out, json.dumps(report.to_dict(), indent=2))


@main.command()
@click.option('--target', type=PLAN_PATH, required=True)
@click.option('--L', 'settings_text', required=True, help='設定数 L の格子（例: 1,2,3）')
@click.option('--R', 'reps_text', required=True, help='繰り返し回数 R の格子（例: 10,100）')
@click.option('--epsilon', type=float, default=0.05, show_default=True)
@click.option('--mode', type=click.Choice(MODES), default='subspace', show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--config', 'config_path', type=PLAN_PATH)
@click.option('--threads', type=int)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def curve(
    ctx: click.Context,
    target: str,
    settings_text: str,
    reps_text: str,
    epsilon: float,
    mode: str,
    seed: int,
    config_path: Optional[str],
    threads: Optional[int],
    out: str,
) -> None:
    """L 個のパウリ測定を R 回ずつ行う計画のリスク表（CSV）"""
    config = SolverConfig.from_yaml(config_path) if config_path else None
    rows = risk_curve(
        load_state(target),
        _int_list(settings_text, '--L'),
        _int_list(reps_text, '--R'),
        epsilon,
        mode=mode,
        seed=seed,
        config=config,
        threads=_threads(ctx, threads),
    )
    _write(out, curve_csv(rows))
    render_curve(_console(), rows)


@main.command()
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True)
@click.option('--data', 'data_path', type=PLAN_PATH, required=True)
@click.option('--bootstrap', type=int, help='ブートストラップ回数 B（100 以上）')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--threads', type=int)
@click.option('--out', type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def mle(
    ctx: click.Context,
    plan_path: str,
    data_path: str,
    bootstrap: Optional[int],
    seed: int,
    threads: Optional[int],
    out: Optional[str],
) -> None:
    """最尤推定とブートストラップ区間（比較用）"""
    measurement = load_plan(plan_path)
    data = load_dataset(data_path)
    config = MleConfig()
    fit = mle_reconstruct(measurement, data, config)
    interval = None
    if bootstrap is not None:
        interval = bootstrap_interval(
            measurement, data, bootstrap, measurement.epsilon, seed, config, fit,
            _threads(ctx, threads),
        )
    render_mle(_console(), fit, interval)
    if out:
        _write(out, json.dumps(fit.to_dict(interval), indent=2))


@main.command('mle-trials')
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True)
@click.option('--state', type=PLAN_PATH)
@click.option('--depolarize', 'noise', type=float)
@click.option('--trials', type=int, default=100, show_default=True)
@click.option('--bootstrap', type=int, default=100, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--threads', type=int)
@click.pass_context
@handle_errors
def mle_trials(
    ctx: click.Context,
    plan_path: str,
    state: Optional[str],
    noise: Optional[float],
    trials: int,
    bootstrap: int,
    seed: int,
    threads: Optional[int],
) -> None:
    """MLE のブートストラップ区間の被覆率"""
    measurement = load_plan(plan_path)
    report = run_mle_coverage(
        measurement,
        _true_state(measurement, state, noise),
        trials,
        bootstrap,
        seed,
        threads=_threads(ctx, threads),
    )
    render_mle_trials(_console(), report)


@main.command()
@click.option('--plan', 'plan_path', type=PLAN_PATH, required=True)
@click.option('--estimator', 'estimator_path', type=PLAN_PATH, required=True)
@click.option('--state', type=PLAN_PATH)
@click.option('--depolarize', 'noise', type=float)
@click.option('--delta-s', type=float, default=0.0, show_default=True)
@click.option('--delta-m', type=float, default=0.0, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False))
@handle_errors
def robustness(
    plan_path: str,
    estimator_path: str,
    state: Optional[str],
    noise: Optional[float],
    delta_s: float,
    delta_m: float,
    seed: int,
    out: Optional[str],
) -> None:
    """状態と POVM の摂動に対する推定値のずれを上界と比べる"""
    measurement = load_plan(plan_path)
    report = perturb_and_estimate(
        measurement,
        load_estimator(estimator_path),
        _true_state(measurement, state, noise),
        delta_s,
        delta_m,
        seed,
    )
    render_robustness(_console(), report)
    if out:
        _write(out, json.dumps(report.to_dict(), indent=2))


if __name__ == '__main__':
    main()
