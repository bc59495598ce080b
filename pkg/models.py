"""
QNN Bench - 量子神经网络模型模块
================================
数据编码线路 + L 层变分 ansatz（P = 4L 个参数），
精确/含噪前向计算与有限次测量采样

输出为 |1…1⟩ 投影测量的 Born 概率

Author: QNN Bench Team
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from config import EXACT, get_config
from statesim import (
    Gate,
    rx, ry, cnot,
    zero_state, zero_density_matrix,
    apply_circuit, circuit_unitary, dephase_all, dephasing_mask, all_ones_index,
)
from utils import ConfigError, UsageError

PARAMS_PER_LAYER = 4


@dataclass
class InputPoint:
    """经典输入 x，每个比特一个特征（弧度）"""
    features: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float).reshape(-1)

    def __len__(self):
        return len(self.features)


@dataclass
class CircuitModel:
    """
    量子线路模型

    Parameters:
    -----------
    n_qubits : int
        比特数（基准测试中固定为 2）
    depth : int
        变分层数 L
    theta : np.ndarray
        参数向量，长度 P = 4L
    p_deph : float
        每层退相位概率，0 表示无噪声
    """
    n_qubits: int
    depth: int
    theta: np.ndarray
    p_deph: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.depth < 0:
            raise UsageError(f"层数必须 >= 0: {self.depth}")
        if len(self.theta) != PARAMS_PER_LAYER * self.depth:
            raise UsageError(
                f"参数个数 {len(self.theta)} 与 4L = {PARAMS_PER_LAYER * self.depth} 不符"
            )
        if not 0.0 <= self.p_deph <= 1.0:
            raise ConfigError(f"退相位概率必须在 [0, 1] 内: {self.p_deph}", key="p_deph")

    @property
    def n_params(self) -> int:
        return len(self.theta)

    def with_theta(self, theta: np.ndarray) -> 'CircuitModel':
        """替换参数，其余结构不变"""
        return CircuitModel(self.n_qubits, self.depth, theta, self.p_deph)

    def layer_params(self, layer: int) -> np.ndarray:
        return self.theta[PARAMS_PER_LAYER * layer: PARAMS_PER_LAYER * (layer + 1)]


def random_model(
    n_qubits: int,
    depth: int,
    sigma: float,
    rng: np.random.Generator,
    p_deph: float = 0.0,
) -> CircuitModel:
    """θ ~ N(0, σ²) 随机初始化"""
    theta = rng.normal(0.0, sigma, size=PARAMS_PER_LAYER * depth)
    return CircuitModel(n_qubits, depth, theta, p_deph)


# ============================================================
# 线路构建
# ============================================================

def encode(x: InputPoint, n_qubits: int) -> List[Gate]:
    """
    数据编码：每个比特 q 依次作用 Rx(x_q)、Ry(x_q)

    Returns:
    --------
    List[Gate]
        2·n_qubits 个编码门
    """
    if len(x) != n_qubits:
        raise UsageError(f"特征个数 {len(x)} 与比特数 {n_qubits} 不符")
    gates = []
    for q, value in enumerate(x.features):
        gates.append(rx(value, q))
        gates.append(ry(value, q))
    return gates


def variational_layer(layer_params: Sequence[float], n_qubits: int = 2) -> List[Gate]:
    """
    单个变分层: Ry(θa) q0, Ry(θb) q1, Rx(θc) q0, Rx(θd) q1, CNOT(q0→q1)
    """
    if n_qubits != 2:
        raise UsageError(f"变分层只定义于 2 比特: n_qubits={n_qubits}")
    params = np.asarray(layer_params, dtype=float).reshape(-1)
    if len(params) != PARAMS_PER_LAYER:
        raise UsageError(f"每层需要 {PARAMS_PER_LAYER} 个参数，实际 {len(params)}")
    a, b, c, d = params
    return [ry(a, 0), ry(b, 1), rx(c, 0), rx(d, 1), cnot(0, 1)]


def circuit_gates(model: CircuitModel, x: InputPoint) -> List[Gate]:
    """完整门序列（编码 + 全部变分层），不含噪声"""
    gates = encode(x, model.n_qubits)
    for layer in range(model.depth):
        gates.extend(variational_layer(model.layer_params(layer), model.n_qubits))
    return gates


# ============================================================
# 前向计算
# ============================================================

def final_state(model: CircuitModel, x: InputPoint):
    """
    逐门演化得到的线路末态（单点参考路径）

    p_deph = 0 时走纯态路径；否则走密度矩阵路径，
    编码块之后以及每个变分层之后对全部比特施加退相位
    """
    if model.p_deph == 0.0:
        return apply_circuit(zero_state(model.n_qubits), circuit_gates(model, x))

    rho = apply_circuit(zero_density_matrix(model.n_qubits), encode(x, model.n_qubits))
    rho = dephase_all(rho, model.p_deph)
    for layer in range(model.depth):
        rho = apply_circuit(rho, variational_layer(model.layer_params(layer), model.n_qubits))
        rho = dephase_all(rho, model.p_deph)
    return rho


def encoded_states(xs: Sequence[InputPoint], n_qubits: int) -> np.ndarray:
    """
    编码后的纯态，逐比特 Ry(x_q) Rx(x_q)|0⟩ 再做张量积

    Returns:
    --------
    np.ndarray
        N × 2^n 振幅矩阵，每行一个输入点
    """
    for x in xs:
        if len(x) != n_qubits:
            raise UsageError(f"特征个数 {len(x)} 与比特数 {n_qubits} 不符")
    features = np.array([x.features for x in xs], dtype=float).reshape(len(xs), n_qubits)
    states = np.ones((len(xs), 1), dtype=complex)
    for q in range(n_qubits):
        half = features[:, q] / 2
        c, s = np.cos(half), np.sin(half)
        # Rx|0⟩ = (c, -i s)，再作用 Ry
        qubit = np.stack([c * c + 1j * s * s, s * c - 1j * s * c], axis=1)
        states = np.einsum('ni,nj->nij', states, qubit).reshape(len(xs), -1)
    return states


def layer_unitaries(model: CircuitModel) -> List[np.ndarray]:
    """每个变分层的 2^n × 2^n 酉矩阵"""
    return [
        circuit_unitary(variational_layer(model.layer_params(layer), model.n_qubits), model.n_qubits)
        for layer in range(model.depth)
    ]


def forward_exact_batch(model: CircuitModel, xs: Sequence[InputPoint]) -> np.ndarray:
    """
    一组输入点的精确输出概率（不裁剪）

    同一 θ 的层酉矩阵只构建一次，全部输入点一起演化
    """
    if len(xs) == 0:
        return np.zeros(0, dtype=float)
    target = all_ones_index(model.n_qubits)
    states = encoded_states(xs, model.n_qubits)

    if model.p_deph == 0.0:
        unitary = np.eye(2 ** model.n_qubits, dtype=complex)
        for layer in layer_unitaries(model):
            unitary = layer @ unitary
        probs = np.abs(states @ unitary[target]) ** 2
    else:
        mask = dephasing_mask(model.n_qubits, model.p_deph)
        rhos = np.einsum('ni,nj->nij', states, states.conj()) * mask
        for layer in layer_unitaries(model):
            rhos = (layer @ rhos @ layer.conj().T) * mask
        probs = np.real(rhos[:, target, target])

    return np.clip(probs, 0.0, 1.0)


def forward_exact(model: CircuitModel, x: InputPoint) -> float:
    """精确输出概率 p(x; θ) = ⟨1…1|ρ|1…1⟩（不裁剪）"""
    return float(forward_exact_batch(model, [x])[0])


@dataclass
class ShotCounter:
    """测量次数计数器：优化消耗与评估消耗分开统计"""
    optimization: int = 0
    evaluation: int = 0

    def add(self, shots: int, purpose: str = "optimization"):
        if purpose == "evaluation":
            self.evaluation += shots
        else:
            self.optimization += shots

    @property
    def total(self) -> int:
        return self.optimization + self.evaluation


def _check_shots(shots: int):
    if shots is EXACT or int(shots) < 1:
        raise ConfigError(f"测量次数必须 >= 1: {shots}", key="shots")


def sample_probability(
    p,
    shots: int,
    rng: np.random.Generator,
    counter: Optional[ShotCounter] = None,
    purpose: str = "optimization",
):
    """
    有限次测量估计 k/S，k ~ Binomial(S, p)，不裁剪

    p 可以是标量或数组，数组时每个元素各自消耗 S 次测量
    """
    _check_shots(shots)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    k = rng.binomial(int(shots), p)
    if counter is not None:
        counter.add(int(shots) * int(p.size), purpose)
    estimate = k / shots
    return float(estimate) if p.ndim == 0 else estimate


def clip_probability(p, eps: Optional[float] = None):
    """裁剪到 [ε, 1 - ε]"""
    if eps is None:
        eps = get_config().simulation.clip_eps
    return np.clip(p, eps, 1.0 - eps)


def forward_sampled(
    model: CircuitModel,
    x: InputPoint,
    shots: int,
    rng: np.random.Generator,
    counter: Optional[ShotCounter] = None,
    purpose: str = "optimization",
) -> float:
    """
    采样前向：clip(k/S, ε, 1 - ε)

    Parameters:
    -----------
    shots : int
        测量次数 S（>= 1）
    rng : np.random.Generator
        调用方持有的随机流
    counter : ShotCounter, optional
        测量次数计数器
    """
    _check_shots(shots)
    p = forward_exact(model, x)
    return float(clip_probability(sample_probability(p, shots, rng, counter, purpose)))


def predict(
    model: CircuitModel,
    xs: Sequence[InputPoint],
    shots,
    rng: Optional[np.random.Generator] = None,
    counter: Optional[ShotCounter] = None,
    purpose: str = "optimization",
) -> np.ndarray:
    """
    训练用预测 ŷ：精确模式返回裁剪后的精确概率，否则逐点采样后裁剪

    精确模式也裁剪，保证 BCE 损失与 logit 变换的定义域
    """
    if shots is EXACT:
        return clip_probability(forward_exact_batch(model, xs))
    _check_shots(shots)
    if rng is None:
        raise UsageError("采样模式需要随机流")
    estimates = sample_probability(forward_exact_batch(model, xs), shots, rng, counter, purpose)
    return np.asarray(clip_probability(estimates), dtype=float)
