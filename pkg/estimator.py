"""
QNN Bench - 估计器模块
================================
参数平移 Jacobian（精确/有限次采样）、残差、MSE/BCE 损失及其对概率的梯度、
logit 变换

Author: QNN Bench Team
"""

from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import expit, logit

from config import EXACT, get_config
from models import (
    CircuitModel, InputPoint, ShotCounter,
    forward_exact_batch, sample_probability,
)
from utils import ConfigError, NumericError, UsageError, require_same_length


class LossKind(str, Enum):
    """损失类型"""
    MSE = "mse"
    BCE = "bce"


def _as_loss_kind(kind: Union[str, LossKind]) -> LossKind:
    try:
        return LossKind(str(getattr(kind, "value", kind)).lower())
    except ValueError:
        raise ConfigError(f"未知损失类型: {kind}", key="loss_kind") from None


# ============================================================
# Jacobian
# ============================================================

def _check_sampling(shots, rng):
    if shots is EXACT:
        return
    if int(shots) < 1:
        raise ConfigError(f"测量次数必须 >= 1: {shots}", key="shots")
    if rng is None:
        raise UsageError("采样模式需要随机流")


def parameter_shift_gradient(
    prob_fn: Callable[[np.ndarray], Union[float, np.ndarray]],
    theta: np.ndarray,
    shots=EXACT,
    rng: Optional[np.random.Generator] = None,
    counter: Optional[ShotCounter] = None,
) -> np.ndarray:
    """
    对任意 θ -> 概率（标量或数组）的函数做参数平移求导

    每个分量 ½ (p(θ + π/2 e_j) - p(θ - π/2 e_j))，
    采样模式下两次平移评估各自独立抽样且不裁剪

    Returns:
    --------
    np.ndarray
        标量函数时形状为 (P,)，数组函数时为 (P, N)
    """
    _check_sampling(shots, rng)
    shift = get_config().simulation.shift
    theta = np.asarray(theta, dtype=float)
    rows = []

    for j in range(len(theta)):
        theta_plus = theta.copy()
        theta_plus[j] += shift
        theta_minus = theta.copy()
        theta_minus[j] -= shift

        p_plus = np.asarray(prob_fn(theta_plus), dtype=float)
        p_minus = np.asarray(prob_fn(theta_minus), dtype=float)
        if shots is not EXACT:
            p_plus = sample_probability(p_plus, shots, rng, counter)
            p_minus = sample_probability(p_minus, shots, rng, counter)
        rows.append(0.5 * (p_plus - p_minus))

    return np.array(rows, dtype=float)


def jacobian(
    model: CircuitModel,
    xs: Sequence[InputPoint],
    shots=EXACT,
    rng: Optional[np.random.Generator] = None,
    counter: Optional[ShotCounter] = None,
) -> np.ndarray:
    """
    参数平移规则计算 J_ij = ∂p_i/∂θ_j

    Parameters:
    -----------
    model : CircuitModel
        当前模型
    xs : Sequence[InputPoint]
        N 个输入点
    shots : int or EXACT
        每次平移评估的测量次数；EXACT 表示精确概率
    rng : np.random.Generator, optional
        采样模式下必须提供
    counter : ShotCounter, optional
        测量次数计数器（采样模式下共 2NP 次评估）

    Returns:
    --------
    np.ndarray
        N × P 矩阵
    """
    if model.n_params < 1:
        raise UsageError("模型没有可训练参数")
    if len(xs) < 1:
        raise UsageError("数据集为空")
    _check_sampling(shots, rng)

    # 每个平移后的 θ 对全部输入点一起求值
    rows = parameter_shift_gradient(
        lambda th: forward_exact_batch(model.with_theta(th), xs),
        model.theta, shots, rng, counter,
    )
    return np.ascontiguousarray(rows.T)


# ============================================================
# 残差与损失
# ============================================================

def residual(y: Sequence[float], y_hat: Sequence[float]) -> np.ndarray:
    """r = y - ŷ"""
    require_same_length(y, y_hat, "y", "y_hat")
    return np.asarray(y, dtype=float) - np.asarray(y_hat, dtype=float)


def _check_open_interval(y_hat: np.ndarray, name: str = "y_hat"):
    if np.any(y_hat <= 0.0) or np.any(y_hat >= 1.0):
        raise NumericError(f"{name} 必须严格位于 (0, 1) 内")


def loss(kind: Union[str, LossKind], y: Sequence[float], y_hat: Sequence[float]) -> float:
    """
    平均损失

    MSE: (1/N) Σ (y - ŷ)²
    BCE: -(1/N) Σ [y ln ŷ + (1 - y) ln(1 - ŷ)]
    """
    kind = _as_loss_kind(kind)
    require_same_length(y, y_hat, "y", "y_hat")
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)

    if kind == LossKind.MSE:
        return float(np.mean((y - y_hat) ** 2))

    _check_open_interval(y_hat)
    return float(-np.mean(y * np.log(y_hat) + (1.0 - y) * np.log1p(-y_hat)))


def loss_gradient_wrt_p(
    kind: Union[str, LossKind],
    y: Sequence[float],
    y_hat: Sequence[float],
) -> np.ndarray:
    """
    ∂L̄/∂ŷ_i

    MSE: -2 (y_i - ŷ_i) / N
    BCE: (ŷ_i - y_i) / (N ŷ_i (1 - ŷ_i))
    """
    kind = _as_loss_kind(kind)
    require_same_length(y, y_hat, "y", "y_hat")
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    n = len(y)

    if kind == LossKind.MSE:
        return -2.0 * (y - y_hat) / n

    _check_open_interval(y_hat)
    return (y_hat - y) / (n * y_hat * (1.0 - y_hat))


def loss_gradient(
    kind: Union[str, LossKind],
    J: np.ndarray,
    y: Sequence[float],
    y_hat: Sequence[float],
) -> np.ndarray:
    """链式法则 ∇θ L̄ = Jᵀ ∂L̄/∂p"""
    return np.asarray(J, dtype=float).T @ loss_gradient_wrt_p(kind, y, y_hat)


# ============================================================
# logit 变换
# ============================================================

def logit_transform(p):
    """z = ln(p / (1 - p))"""
    p = np.asarray(p, dtype=float)
    _check_open_interval(p, "p")
    z = logit(p)
    return float(z) if z.ndim == 0 else z


def inverse_logit(z):
    """p = 1 / (1 + e^{-z})"""
    p = expit(np.asarray(z, dtype=float))
    return float(p) if p.ndim == 0 else p


def logit_jacobian_scale(p):
    """∂z/∂p = 1 / (p (1 - p))"""
    p = np.asarray(p, dtype=float)
    _check_open_interval(p, "p")
    scale = 1.0 / (p * (1.0 - p))
    return float(scale) if scale.ndim == 0 else scale
