"""
乱数生成器

すべての乱数は Philox（64 ビットのカウンタベース生成器）から明示的なシードで生成する。
試行 t のストリームは SeedSequence(master, spawn_key=(t,)) から導出するので、
実行順序やスレッド数に依存しない。
"""
import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """シードから Philox ベースの Generator を作成"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def stream_seed(master: int, index: int) -> int:
    """マスターシードとストリーム番号から 64 ビットの子シードを導出"""
    seq = np.random.SeedSequence(int(master), spawn_key=(int(index),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def stream_rng(master: int, index: int) -> np.random.Generator:
    return make_rng(stream_seed(master, index))
