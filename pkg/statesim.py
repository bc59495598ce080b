"""
QNN Bench - 量子态模拟模块
================================
最小 n 比特稠密模拟器：纯态向量演化、密度矩阵演化、
门集 {Rx, Ry, CNOT, Z}、退相位信道、Born 规则概率

约定:
- Rx(θ) = [[cos θ/2, -i sin θ/2], [-i sin θ/2, cos θ/2]]
- Ry(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]
- 量子比特 0 是基矢下标的最高位（|10⟩ 的下标为 2）

Author: QNN Bench Team
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Union

import numpy as np

from config import get_config
from utils import ConfigError, UsageError


class GateKind(str, Enum):
    """门类型"""
    RX = "Rx"
    RY = "Ry"
    CNOT = "CNOT"
    Z = "Z"


_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_IDENTITY_2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class Gate:
    """
    量子门

    Rx/Ry 使用 angle（弧度），CNOT 使用 control，Z 无参数
    """
    kind: GateKind
    target: int
    control: Optional[int] = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind == GateKind.CNOT:
            if self.control is None:
                raise UsageError("CNOT 需要控制比特")
            if self.control == self.target:
                raise UsageError(f"控制比特与目标比特相同: {self.target}")
        elif self.control is not None:
            raise UsageError(f"{self.kind.value} 门不接受控制比特")

    @property
    def qubits(self) -> tuple:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    def __repr__(self):
        if self.kind == GateKind.CNOT:
            return f"CNOT({self.control}->{self.target})"
        if self.kind == GateKind.Z:
            return f"Z({self.target})"
        return f"{self.kind.value}({self.angle:.4f} on q{self.target})"


def rx(angle: float, target: int) -> Gate:
    return Gate(GateKind.RX, target, angle=float(angle))


def ry(angle: float, target: int) -> Gate:
    return Gate(GateKind.RY, target, angle=float(angle))


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, target, control=control)


def pauli_z(target: int) -> Gate:
    return Gate(GateKind.Z, target)


# ============================================================
# 量子态类型
# ============================================================

@dataclass
class StateVector:
    """纯态：长度 2^n 的复振幅数组"""
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise UsageError(
                f"振幅长度 {self.amplitudes.shape} 与 2^{self.n_qubits} 不符"
            )

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        """全部基矢的 Born 概率"""
        return np.abs(self.amplitudes) ** 2

    def to_density_matrix(self) -> 'DensityMatrix':
        """|ψ⟩⟨ψ|"""
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass
class DensityMatrix:
    """混态：2^n × 2^n 厄米、迹为 1 的复矩阵"""
    n_qubits: int
    elements: np.ndarray

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=complex)
        dim = 2 ** self.n_qubits
        if self.elements.shape != (dim, dim):
            raise UsageError(
                f"密度矩阵形状 {self.elements.shape} 与 2^{self.n_qubits} 不符"
            )

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def is_hermitian(self, atol: Optional[float] = None) -> bool:
        if atol is None:
            atol = get_config().simulation.atol
        return bool(np.allclose(self.elements, self.elements.conj().T, rtol=0.0, atol=atol))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def probabilities(self) -> np.ndarray:
        """对角元即各基矢的 Born 概率"""
        return np.real(np.diag(self.elements)).copy()


QuantumState = Union[StateVector, DensityMatrix]


# ============================================================
# 门矩阵
# ============================================================

def _check_n_qubits(n_qubits: int):
    limit = get_config().simulation.max_qubits
    if not isinstance(n_qubits, (int, np.integer)) or n_qubits < 1:
        raise ConfigError(f"量子比特数必须为正整数: {n_qubits}", key="n_qubits")
    if n_qubits > limit:
        raise ConfigError(f"量子比特数 {n_qubits} 超过稠密模拟上限 {limit}", key="n_qubits")


def _check_indices(gate: Gate, n_qubits: int):
    for q in gate.qubits:
        if not 0 <= q < n_qubits:
            raise UsageError(f"{gate!r} 的比特下标 {q} 超出范围 [0, {n_qubits})")


def single_qubit_matrix(gate: Gate) -> np.ndarray:
    """单比特门的 2×2 矩阵（半角约定）"""
    c, s = np.cos(gate.angle / 2), np.sin(gate.angle / 2)
    if gate.kind == GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if gate.kind == GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.kind == GateKind.Z:
        return _PAULI_Z
    raise UsageError(f"{gate.kind.value} 不是单比特门")


def _embed(matrix: np.ndarray, target: int, n_qubits: int) -> np.ndarray:
    """把单比特矩阵嵌入 n 比特空间（比特 0 为最高位）"""
    full = np.ones((1, 1), dtype=complex)
    for q in range(n_qubits):
        full = np.kron(full, matrix if q == target else _IDENTITY_2)
    return full


@lru_cache(maxsize=64)
def _cnot_matrix(control: int, target: int, n_qubits: int) -> np.ndarray:
    """CNOT 置换矩阵"""
    dim = 2 ** n_qubits
    c_bit = 1 << (n_qubits - 1 - control)
    t_bit = 1 << (n_qubits - 1 - target)
    perm = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        out = b ^ t_bit if b & c_bit else b
        perm[out, b] = 1.0
    perm.setflags(write=False)
    return perm


@lru_cache(maxsize=64)
def _z_matrix(target: int, n_qubits: int) -> np.ndarray:
    full = _embed(_PAULI_Z, target, n_qubits)
    full.setflags(write=False)
    return full


def gate_operator(gate: Gate, n_qubits: int) -> np.ndarray:
    """
    门在 n 比特空间中的完整酉矩阵

    Parameters:
    -----------
    gate : Gate
        量子门
    n_qubits : int
        系统比特数

    Returns:
    --------
    np.ndarray
        2^n × 2^n 酉矩阵
    """
    _check_indices(gate, n_qubits)
    if gate.kind == GateKind.CNOT:
        return _cnot_matrix(gate.control, gate.target, n_qubits)
    if gate.kind == GateKind.Z:
        return _z_matrix(gate.target, n_qubits)
    return _embed(single_qubit_matrix(gate), gate.target, n_qubits)


# ============================================================
# 操作
# ============================================================

def zero_state(n_qubits: int) -> StateVector:
    """|0…0⟩"""
    _check_n_qubits(n_qubits)
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def zero_density_matrix(n_qubits: int) -> DensityMatrix:
    """|0…0⟩⟨0…0|"""
    return zero_state(n_qubits).to_density_matrix()


def _apply_to_axis(tensor: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    """2×2 矩阵作用在张量的某一个比特轴上"""
    out = np.tensordot(matrix, tensor, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=64)
def _cnot_permutation(control: int, target: int, n_qubits: int) -> np.ndarray:
    """CNOT 作为基矢下标置换（自逆）"""
    index = np.arange(2 ** n_qubits)
    c_bit = 1 << (n_qubits - 1 - control)
    t_bit = 1 << (n_qubits - 1 - target)
    perm = np.where(index & c_bit, index ^ t_bit, index)
    perm.setflags(write=False)
    return perm


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """U|ψ⟩"""
    n = state.n_qubits
    _check_indices(gate, n)
    if gate.kind == GateKind.CNOT:
        perm = _cnot_permutation(gate.control, gate.target, n)
        return StateVector(n, state.amplitudes[perm])
    psi = state.amplitudes.reshape((2,) * n)
    psi = _apply_to_axis(psi, single_qubit_matrix(gate), gate.target)
    return StateVector(n, psi.reshape(-1))


def apply_gate_dm(rho: DensityMatrix, gate: Gate) -> DensityMatrix:
    """UρU†"""
    n = rho.n_qubits
    _check_indices(gate, n)
    if gate.kind == GateKind.CNOT:
        perm = _cnot_permutation(gate.control, gate.target, n)
        return DensityMatrix(n, rho.elements[np.ix_(perm, perm)])
    matrix = single_qubit_matrix(gate)
    tensor = rho.elements.reshape((2,) * (2 * n))
    tensor = _apply_to_axis(tensor, matrix, gate.target)
    tensor = _apply_to_axis(tensor, matrix.conj(), n + gate.target)
    return DensityMatrix(n, tensor.reshape(2 ** n, 2 ** n))


def apply_circuit(state: QuantumState, gates: Iterable[Gate]) -> QuantumState:
    """依次作用一串门，自动选择纯态/密度矩阵路径"""
    step = apply_gate_dm if isinstance(state, DensityMatrix) else apply_gate
    for gate in gates:
        state = step(state, gate)
    return state


def circuit_unitary(gates: Iterable[Gate], n_qubits: int) -> np.ndarray:
    """一串门的整体酉矩阵（后作用的门在左）"""
    unitary = np.eye(2 ** n_qubits, dtype=complex)
    for gate in gates:
        unitary = gate_operator(gate, n_qubits) @ unitary
    return unitary


def _check_p_deph(p_deph: float):
    if not 0.0 <= p_deph <= 1.0:
        raise ConfigError(f"退相位概率必须在 [0, 1] 内: {p_deph}", key="p_deph")


@lru_cache(maxsize=64)
def _coherence_flags(qubit: int, n_qubits: int) -> np.ndarray:
    """矩阵元 (i, j) 在该比特上取值不同则为 True"""
    bits = (np.arange(2 ** n_qubits) >> (n_qubits - 1 - qubit)) & 1
    flags = bits[:, None] != bits[None, :]
    flags.setflags(write=False)
    return flags


def dephasing_mask(n_qubits: int, p_deph: float) -> np.ndarray:
    """
    逐比特退相位合成后的逐元素缩放因子

    每个比特的信道只把该比特取值不同的矩阵元乘以 (1 - 2p)，
    各比特的信道互相对易，合成结果与作用顺序无关
    """
    _check_p_deph(p_deph)
    mask = np.ones((2 ** n_qubits, 2 ** n_qubits), dtype=float)
    for q in range(n_qubits):
        mask = np.where(_coherence_flags(q, n_qubits), mask * (1.0 - 2.0 * p_deph), mask)
    return mask


def dephase(rho: DensityMatrix, qubit: int, p_deph: float) -> DensityMatrix:
    """
    单比特退相位信道 ρ ← (1 - p)ρ + p ZρZ†

    Parameters:
    -----------
    rho : DensityMatrix
        输入密度矩阵
    qubit : int
        作用比特
    p_deph : float
        退相位概率，须在 [0, 1] 内

    Returns:
    --------
    DensityMatrix
        该比特相干块的非对角元乘以 (1 - 2p)，对角元不变；
        p = 1/2 时相干块完全消失，p = 1 时等价于 Z 共轭
    """
    _check_p_deph(p_deph)
    _check_indices(pauli_z(qubit), rho.n_qubits)
    if p_deph == 0.0:
        return DensityMatrix(rho.n_qubits, rho.elements.copy())
    factor = np.where(_coherence_flags(qubit, rho.n_qubits), 1.0 - 2.0 * p_deph, 1.0)
    return DensityMatrix(rho.n_qubits, rho.elements * factor)


def dephase_all(rho: DensityMatrix, p_deph: float) -> DensityMatrix:
    """对每个比特依次施加退相位"""
    for q in range(rho.n_qubits):
        rho = dephase(rho, q, p_deph)
    return rho


def born_probability(state: QuantumState, basis_index: int) -> float:
    """
    基矢 |b⟩ 的 Born 概率：|⟨b|ψ⟩|² 或 ⟨b|ρ|b⟩

    数值误差导致的微小越界被截断到 [0, 1]
    """
    if not 0 <= basis_index < state.dim:
        raise UsageError(f"基矢下标 {basis_index} 超出范围 [0, {state.dim})")
    if isinstance(state, DensityMatrix):
        p = float(np.real(state.elements[basis_index, basis_index]))
    else:
        p = float(np.abs(state.amplitudes[basis_index]) ** 2)
    return min(max(p, 0.0), 1.0)


def all_ones_index(n_qubits: int) -> int:
    """|1…1⟩ 的基矢下标"""
    return 2 ** n_qubits - 1
