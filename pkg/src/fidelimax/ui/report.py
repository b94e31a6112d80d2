"""
rich によるレポート表示とログ設定
"""
import logging
from typing import Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from ..baseline.mle import BootstrapInterval, MleResult, MleTrialReport
from ..minimax.estimator import AffineEstimator, EstimateReport
from ..minimax.saddle import SaddlePoint
from ..simulation.experiments import RiskCurveRow, RobustnessReport, TrialReport

LOG_FORMAT = "%(message)s"


def setup_logging(level: str = "WARNING", console: Optional[Console] = None) -> None:
    """fidelimax のロガーに RichHandler（標準エラー出力）を付ける"""
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        rich_tracebacks=False,
    )
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("fidelimax")
    root.handlers = [handler]
    root.setLevel(level.upper())


def fmt(value: float) -> str:
    """有効数字 6 桁の指数表記"""
    return f"{value:.5e}"


def estimate_line(report: EstimateReport) -> str:
    """`F = <v> ± <r> (confidence <1−ε>)`"""
    name = "F" if report.quantity == "fidelity" else "O"
    return f"{name} = {fmt(report.value)} ± {fmt(report.risk)} (confidence {report.confidence:g})"


def render_estimate(console: Console, report: EstimateReport) -> None:
    console.print(estimate_line(report), highlight=False)
    if not report.physical:
        console.print(
            Text(f"推定値が [0, 1] の外にあります（区間 [{fmt(report.lower)}, {fmt(report.upper)}]）",
                 style="yellow")
        )


def render_saddle(console: Console, sp: SaddlePoint, estimator: AffineEstimator) -> None:
    """鞍点の診断と推定量の要約"""
    table = Table(title="鞍点", show_header=False, box=None)
    table.add_column("項目", style="cyan")
    table.add_column("値", justify="right")
    table.add_row("risk", fmt(sp.risk))
    table.add_row("saddle_value", fmt(sp.saddle_value))
    table.add_row("alpha*", fmt(sp.alpha_star))
    table.add_row("state_gap", fmt(sp.state_gap))
    table.add_row("constant c", fmt(estimator.constant))
    table.add_row("iterations", str(sp.iterations))
    table.add_row("evaluations", str(sp.evaluations))
    table.add_row("converged", "yes" if sp.converged else "no")
    console.print(table)
    if sp.boundary_hit:
        console.print(Text("α* が探索区間の端にあります", style="yellow"))

    coeffs = Table(title="係数 a^(l)_k")
    coeffs.add_column("setting", justify="right")
    coeffs.add_column("R", justify="right")
    coeffs.add_column("a", justify="left")
    for l, (a, r) in enumerate(zip(estimator.coefficients, estimator.repetitions)):
        coeffs.add_row(str(l), str(r), ", ".join(fmt(x) for x in a))
    console.print(coeffs)


def render_trials(console: Console, report: TrialReport) -> None:
    table = Table(title="被覆率実験")
    table.add_column("trials", justify="right")
    table.add_column("coverage", justify="right")
    table.add_column("mean estimate", justify="right")
    table.add_column("mean |error|", justify="right")
    table.add_column("true F", justify="right")
    table.add_column("risk", justify="right")
    table.add_row(
        str(report.trials),
        fmt(report.empirical_coverage),
        fmt(report.mean_estimate),
        fmt(report.mean_abs_error),
        fmt(report.true_fidelity),
        fmt(report.risk),
    )
    console.print(table)


def curve_csv(rows: Sequence[RiskCurveRow]) -> str:
    lines = ["L,R,risk"]
    lines.extend(f"{row.settings},{row.repetitions},{fmt(row.risk)}" for row in rows)
    return "\n".join(lines) + "\n"


def render_curve(console: Console, rows: Sequence[RiskCurveRow]) -> None:
    table = Table(title="リスク曲線")
    table.add_column("L", justify="right")
    table.add_column("R", justify="right")
    table.add_column("risk", justify="right")
    for row in rows:
        table.add_row(str(row.settings), str(row.repetitions), fmt(row.risk))
    console.print(table)


def render_robustness(console: Console, report: RobustnessReport) -> None:
    style = "green" if report.within_bound else "red"
    body = "\n".join([
        f"摂動なし  {fmt(report.noiseless_estimate)}",
        f"摂動あり  {fmt(report.perturbed_estimate)}",
        f"差        {fmt(report.difference)}",
        f"上界      {fmt(report.bound)}",
        f"δ, δ̃      {fmt(report.hist_err)}, {fmt(report.hist_err_tilde)}",
    ])
    console.print(Panel(body, title="頑健性", border_style=style))


def render_mle(
    console: Console, fit: MleResult, interval: Optional[BootstrapInterval] = None
) -> None:
    table = Table(title="最尤推定", show_header=False, box=None)
    table.add_column("項目", style="cyan")
    table.add_column("値", justify="right")
    table.add_row("fidelity", fmt(fit.fidelity))
    table.add_row("nll", fmt(fit.nll))
    table.add_row("iterations", str(fit.iterations))
    table.add_row("converged", "yes" if fit.converged else "no")
    if interval is not None:
        table.add_row("interval", f"[{fmt(interval.lo)}, {fmt(interval.hi)}]")
        table.add_row("median", fmt(interval.median))
    console.print(table)


def render_mle_trials(console: Console, report: MleTrialReport) -> None:
    console.print(
        f"MLE 平均忠実度 {fmt(report.mean_fidelity)}（真値 {fmt(report.true_fidelity)}）, "
        f"ブートストラップ被覆率 {fmt(report.empirical_coverage)}",
        highlight=False,
    )
