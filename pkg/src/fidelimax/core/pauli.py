"""
パウリ文字列とスタビライザー群
"""
import itertools
import logging
from dataclasses import dataclass
from functools import reduce
from typing import Dict, Iterable, List, Tuple

import numpy as np

from .errors import InvalidInputError, ResourceLimitError
from .quantum import DensityMatrix, symmetrize

logger = logging.getLogger(__name__)

MAX_ENUMERATION_QUBITS = 12

_SINGLE: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

# 1 量子ビットの積 a·b = i^phase · c
_PRODUCT: Dict[Tuple[str, str], Tuple[int, str]] = {
    ("X", "Y"): (1, "Z"), ("Y", "X"): (3, "Z"),
    ("Y", "Z"): (1, "X"), ("Z", "Y"): (3, "X"),
    ("Z", "X"): (1, "Y"), ("X", "Z"): (3, "Y"),
}

# 各文字の固有ベクトル（+1 固有値が先）
_EIGENVECTORS: Dict[str, Tuple[np.ndarray, Tuple[float, float]]] = {
    "I": (np.eye(2, dtype=np.complex128), (1.0, 1.0)),
    "Z": (np.eye(2, dtype=np.complex128), (1.0, -1.0)),
    "X": (np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2), (1.0, -1.0)),
    "Y": (np.array([[1, 1], [1j, -1j]], dtype=np.complex128) / np.sqrt(2), (1.0, -1.0)),
}


@dataclass(frozen=True)
class PauliString:
    """符号付きパウリ文字列（例: "-YY"）"""
    letters: str
    sign: int = 1

    def __post_init__(self) -> None:
        letters = self.letters.upper()
        if not letters or any(ch not in "IXYZ" for ch in letters):
            raise InvalidInputError(f"不正なパウリ文字列です: '{self.letters}'")
        if self.sign not in (1, -1):
            raise InvalidInputError(f"符号は ±1 である必要があります: {self.sign}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """"XX", "+ZZ", "-YY" 形式を解析"""
        s = text.strip()
        sign = 1
        if s[:1] in "+-" and s:
            sign = -1 if s[0] == "-" else 1
            s = s[1:]
        return cls(s, sign)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    @property
    def unsigned(self) -> "PauliString":
        return PauliString(self.letters)

    def commutes_with(self, other: "PauliString") -> bool:
        if other.n_qubits != self.n_qubits:
            raise InvalidInputError("量子ビット数が一致しません")
        clashes = sum(
            1 for a, b in zip(self.letters, other.letters) if a != "I" and b != "I" and a != b
        )
        return clashes % 2 == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        """可換なパウリ文字列同士の積（反可換だと結果がエルミートでないためエラー）"""
        if not self.commutes_with(other):
            raise InvalidInputError(f"{self} と {other} は反可換です")
        phase = 0
        letters = []
        for a, b in zip(self.letters, other.letters):
            if a == "I":
                letters.append(b)
            elif b == "I":
                letters.append(a)
            elif a == b:
                letters.append("I")
            else:
                p, c = _PRODUCT[(a, b)]
                phase += p
                letters.append(c)
        # 可換なので phase は偶数（i^2 = -1）
        sign = self.sign * other.sign * (-1 if phase % 4 == 2 else 1)
        return PauliString("".join(letters), sign)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + self.letters


def pauli_matrix(p: PauliString) -> np.ndarray:
    """単一量子ビットのパウリ行列のテンソル積に符号を掛けたもの"""
    m = reduce(np.kron, (_SINGLE[ch] for ch in p.letters))
    return p.sign * m


def pauli_eigenbasis(p: PauliString) -> Tuple[np.ndarray, np.ndarray]:
    """
    正準な固有基底（各文字の固有ベクトルのテンソル積）

    Returns:
        (列が固有ベクトルの d×d 行列, 符号込みの固有値ベクトル)
    """
    vectors = reduce(np.kron, (_EIGENVECTORS[ch][0] for ch in p.letters))
    values = reduce(np.kron, (np.array(_EIGENVECTORS[ch][1]) for ch in p.letters))
    return vectors, p.sign * values


def all_pauli_strings(n: int, include_identity: bool = False) -> List[PauliString]:
    """辞書順（I < X < Y < Z）の全パウリ文字列"""
    if n < 1:
        raise InvalidInputError(f"量子ビット数は 1 以上が必要です: {n}")
    strings = [PauliString("".join(t)) for t in itertools.product("IXYZ", repeat=n)]
    return strings if include_identity else strings[1:]


def qubit_count(dim: int) -> int:
    """次元が 2 のべきならその指数を返す"""
    n = int(dim).bit_length() - 1
    if dim < 2 or 2 ** n != dim:
        raise InvalidInputError(f"次元が 2 のべきではありません: {dim}")
    return n


def pauli_expectations(state: DensityMatrix, n: int) -> np.ndarray:
    """
    非恒等パウリ文字列すべてに対する tr(W_i σ)

    Args:
        state: 状態
        n: 量子ビット数（dim = 2^n）

    Returns:
        all_pauli_strings(n) の順に並んだ長さ 4^n − 1 のベクトル
    """
    if 2 ** n != state.dim:
        qubit_count(state.dim)
        raise InvalidInputError(f"次元 {state.dim} は {n} 量子ビットと一致しません")
    return np.array([state.expectation(pauli_matrix(w)) for w in all_pauli_strings(n)])


def _symplectic(p: PauliString) -> np.ndarray:
    x = [ch in "XY" for ch in p.letters]
    z = [ch in "ZY" for ch in p.letters]
    return np.array(x + z, dtype=np.uint8)


def _gf2_rank(rows: np.ndarray) -> int:
    m = rows.copy() % 2
    rank = 0
    for col in range(m.shape[1]):
        pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(m.shape[0]):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


@dataclass(frozen=True)
class StabilizerGroup:
    """n 個の独立で互いに可換な生成元で定まるスタビライザー群"""
    generators: Tuple[PauliString, ...]

    def __post_init__(self) -> None:
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        if not gens:
            raise InvalidInputError("生成元が空です")
        n = gens[0].n_qubits
        if any(g.n_qubits != n for g in gens):
            raise InvalidInputError("生成元の量子ビット数が揃っていません")
        if len(gens) != n:
            raise InvalidInputError(f"{n} 量子ビットには {n} 個の生成元が必要です（{len(gens)} 個）")
        for a, b in itertools.combinations(gens, 2):
            if not a.commutes_with(b):
                raise InvalidInputError(f"生成元 {a} と {b} が可換ではありません")
        if _gf2_rank(np.stack([_symplectic(g) for g in gens])) != n:
            raise InvalidInputError("生成元が独立ではありません")

    @classmethod
    def from_strings(cls, strings: Iterable[str]) -> "StabilizerGroup":
        return cls(tuple(PauliString.parse(s) for s in strings))

    @classmethod
    def ghz(cls, n: int) -> "StabilizerGroup":
        """GHZ 状態の生成元 X⊗n と Z_i Z_{i+1}（n=2 ならベル状態）"""
        if n < 1:
            raise InvalidInputError(f"量子ビット数は 1 以上が必要です: {n}")
        if n == 1:
            return cls((PauliString("Z"),))
        gens = [PauliString("X" * n)]
        for i in range(n - 1):
            gens.append(PauliString("I" * i + "ZZ" + "I" * (n - i - 2)))
        return cls(tuple(gens))

    @property
    def n_qubits(self) -> int:
        return self.generators[0].n_qubits

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits


def enumerate_group(group: StabilizerGroup) -> List[PauliString]:
    """
    群の 2^n 個の元を列挙（恒等元が先頭）

    生成元の部分集合の積をビット順に並べる。
    """
    n = group.n_qubits
    if n > MAX_ENUMERATION_QUBITS:
        raise ResourceLimitError(f"{n} 量子ビットの群は列挙できません（上限 {MAX_ENUMERATION_QUBITS}）")
    elements = [PauliString("I" * n)]
    for g in group.generators:
        elements = elements + [e * g for e in elements]
    return elements


def stabilizer_state(group: StabilizerGroup) -> DensityMatrix:
    """
    スタビライザー状態 ρ = (1/d) Σ_{S∈群} S

    生成元の射影 (I + g)/2 の積として計算する（群平均と一致）。
    """
    d = group.dim
    rho = np.eye(d, dtype=np.complex128)
    for g in group.generators:
        rho = rho @ (np.eye(d) + pauli_matrix(g)) / 2
    return DensityMatrix(symmetrize(rho))
