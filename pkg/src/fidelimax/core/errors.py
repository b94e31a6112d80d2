"""
エラー階層とリトライ機構
"""
import logging
from functools import wraps
from typing import Any, Callable, Tuple, Type, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')


class FidelimaxError(Exception):
    """fidelimax の基本エラー"""
    pass


class InvalidInputError(FidelimaxError, ValueError):
    """前提条件を満たさない入力（次元不一致、範囲外の値など）"""
    pass


class SingularityError(FidelimaxError, ArithmeticError):
    """平滑化なしで確率 0 の対数や比を取ろうとした場合のエラー"""
    pass


class ResourceLimitError(FidelimaxError):
    """列挙サイズや必要ショット数が上限を超えた場合のエラー"""
    pass


class IntegrityError(FidelimaxError):
    """測定計画のフィンガープリントが一致しない、または壊れている"""
    pass


class ParseError(FidelimaxError):
    """JSON/YAML の構文エラー、未知のスキーマバージョン"""
    pass


class ConvergenceError(FidelimaxError):
    """収束した鞍点が必要な場面で、ソルバーが収束しなかった"""
    pass


class PerturbationError(FidelimaxError):
    """摂動後の状態・POVM を有効な範囲に保てなかった"""
    pass


def retry(
    max_attempts: int = 3,
    exceptions: Tuple[Type[BaseException], ...] = (Exception,),
) -> Callable[[Callable[..., T]], Callable[..., T]]:
    """
    リトライデコレータ

    対象の関数は共有の乱数生成器を消費するため、再試行のたびに新しい乱数が引かれる。

    Args:
        max_attempts: 最大試行回数
        exceptions: リトライ対象の例外タプル
    """
    if max_attempts < 1:
        raise InvalidInputError(f"max_attempts は 1 以上が必要です: {max_attempts}")

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            for attempt in range(1, max_attempts + 1):
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    if attempt == max_attempts:
                        logger.error(f"{func.__name__}が{max_attempts}回失敗しました: {e}")
                        raise
                    logger.warning(
                        f"{func.__name__}が失敗しました（試行{attempt}/{max_attempts}）: {e}"
                    )
            # ここには到達しないはず
            raise RuntimeError("予期しないエラー: リトライループを抜けました")

        return wrapper
    return decorator


class ErrorHandler:
    """エラーをユーザー向けメッセージと終了コードに変換するユーティリティ"""

    @staticmethod
    def describe(error: BaseException, fallback_message: str = "") -> str:
        """
        エラーをユーザーフレンドリーなメッセージに変換

        Args:
            error: 発生したエラー
            fallback_message: デフォルトメッセージ

        Returns:
            ユーザー向けエラーメッセージ
        """
        if isinstance(error, ParseError):
            return f"入力ファイルを解析できません: {error}"
        elif isinstance(error, IntegrityError):
            return f"推定量と測定計画（またはデータ）が対応していません: {error}"
        elif isinstance(error, ConvergenceError):
            return f"ソルバーが収束しませんでした: {error}"
        elif isinstance(error, ResourceLimitError):
            return f"計算資源の上限を超えました: {error}"
        elif isinstance(error, PerturbationError):
            return f"摂動を有効な範囲に保てませんでした: {error}"
        elif isinstance(error, InvalidInputError):
            return f"入力が不正です: {error}"
        elif isinstance(error, OSError):
            return f"システムエラーが発生しました: {error}"
        else:
            return fallback_message or f"エラーが発生しました: {error}"

    @staticmethod
    def exit_code(error: BaseException) -> int:
        """解析エラーは 2、その他のドメインエラーは 1"""
        if isinstance(error, ParseError):
            return 2
        return 1
