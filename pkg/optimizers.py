"""
QNN Bench - 优化器模块
================================
三种参数更新规则，共享同一 step 接口:

- GD: θ ← θ - η ∇θ L̄
- Adam: 带偏差修正的一阶/二阶矩自适应更新
- 代数修正: Δθ = (JᵀJ + λI)⁻¹ Jᵀ r，无学习率；可选 logit 空间

Author: QNN Bench Team
"""

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from config import ExperimentConfig, get_config
from estimator import (
    LossKind, loss_gradient, logit_transform, logit_jacobian_scale,
)
from models import clip_probability
from utils import ConfigError, UsageError, require_finite


@dataclass(frozen=True)
class GdConfig:
    """梯度下降配置"""
    eta: float = 0.1


@dataclass(frozen=True)
class AlgebraicConfig:
    """代数修正配置（只有 λ 和空间模式，不含学习率）"""
    lambda_: float = 0.2
    mode: str = "probability"

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ConfigError(f"Tikhonov 参数必须 > 0: {self.lambda_}", key="lambda")
        if self.mode not in ("probability", "logit"):
            raise ConfigError(f"未知模式: {self.mode}", key="algebraic_mode")


@dataclass(frozen=True)
class AdamState:
    """Adam 状态：超参数 + 矩累积量 + 步数"""
    eta: float
    beta1: float
    beta2: float
    eps_hat: float
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, n_params: int, eta: float = 0.1) -> 'AdamState':
        """零矩初始状态，β 与 ε 取全局配置"""
        opt = get_config().optimizer
        return cls(
            eta=eta,
            beta1=opt.adam_beta1,
            beta2=opt.adam_beta2,
            eps_hat=opt.adam_eps_hat,
            m=np.zeros(n_params),
            v=np.zeros(n_params),
        )


# ============================================================
# 更新规则
# ============================================================

def _check_lengths(theta: np.ndarray, grad: np.ndarray):
    if len(theta) != len(grad):
        raise UsageError(f"参数与梯度长度不一致: {len(theta)} != {len(grad)}")


def gd_step(theta: np.ndarray, grad: np.ndarray, cfg: GdConfig) -> np.ndarray:
    """θ - η·grad"""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    _check_lengths(theta, grad)
    return theta - cfg.eta * grad


def adam_step(
    state: AdamState,
    theta: np.ndarray,
    grad: np.ndarray,
) -> Tuple[np.ndarray, AdamState]:
    """
    单步 Adam

    Returns:
    --------
    Tuple[np.ndarray, AdamState]
        (新参数, 新状态)，输入状态不被修改
    """
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(grad, dtype=float)
    _check_lengths(theta, g)
    _check_lengths(state.m, g)

    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)

    new_theta = theta - state.eta * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return new_theta, replace(state, m=m, v=v, t=t)


def tikhonov_solve(J: np.ndarray, r: np.ndarray, lambda_: float) -> np.ndarray:
    """
    求解 (JᵀJ + λI) Δθ = Jᵀ r（Cholesky 分解）

    Parameters:
    -----------
    J : np.ndarray
        N × P Jacobian
    r : np.ndarray
        长度 N 残差
    lambda_ : float
        Tikhonov 参数（> 0，保证正定）

    Returns:
    --------
    np.ndarray
        长度 P 的修正量 Δθ
    """
    if not lambda_ > 0:
        raise ConfigError(f"Tikhonov 参数必须 > 0: {lambda_}", key="lambda")
    J = require_finite(np.asarray(J, dtype=float), "Jacobian")
    r = require_finite(np.asarray(r, dtype=float).reshape(-1), "residual")
    if J.ndim != 2 or J.shape[0] != len(r):
        raise UsageError(f"Jacobian 形状 {J.shape} 与残差长度 {len(r)} 不符")

    A = J.T @ J + lambda_ * np.eye(J.shape[1])
    b = J.T @ r
    return cho_solve(cho_factor(A, lower=True), b)


def algebraic_step(
    theta: np.ndarray,
    J: np.ndarray,
    r: np.ndarray,
    cfg: AlgebraicConfig,
    predictions: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    代数参数修正 θ + Δθ

    logit 模式: 目标 y = r + ŷ 先裁剪，残差取 logit(y) - logit(ŷ)，
    J 的第 i 行乘以 1/(ŷ_i(1 - ŷ_i))，再同样求解
    """
    theta = np.asarray(theta, dtype=float)
    J = require_finite(np.asarray(J, dtype=float), "Jacobian")
    r = require_finite(np.asarray(r, dtype=float).reshape(-1), "residual")

    if cfg.mode == "logit":
        if predictions is None:
            raise UsageError("logit 模式需要提供预测值")
        y_hat = np.asarray(predictions, dtype=float)
        targets = clip_probability(r + y_hat)
        r = logit_transform(targets) - logit_transform(y_hat)
        J = J * logit_jacobian_scale(y_hat)[:, None]

    delta = tikhonov_solve(J, r, cfg.lambda_)
    if len(delta) != len(theta):
        raise UsageError(f"参数长度 {len(theta)} 与 Jacobian 列数 {len(delta)} 不符")
    return theta + delta


# ============================================================
# 统一 step 接口
# ============================================================

@dataclass
class StepInputs:
    """一步更新所需的量（全批量）"""
    J: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    loss_kind: LossKind


class Optimizer:
    """优化器基类"""

    name = "base"

    def step(self, theta: np.ndarray, inputs: StepInputs) -> np.ndarray:
        raise NotImplementedError


class GradientDescent(Optimizer):
    """普通梯度下降"""

    name = "gd"

    def __init__(self, cfg: GdConfig):
        self.cfg = cfg

    def step(self, theta: np.ndarray, inputs: StepInputs) -> np.ndarray:
        grad = loss_gradient(inputs.loss_kind, inputs.J, inputs.y, inputs.y_hat)
        return gd_step(theta, grad, self.cfg)


class Adam(Optimizer):
    """Adam（内部持有状态，单线程使用）"""

    name = "adam"

    def __init__(self, state: AdamState):
        self.state = state

    def step(self, theta: np.ndarray, inputs: StepInputs) -> np.ndarray:
        grad = loss_gradient(inputs.loss_kind, inputs.J, inputs.y, inputs.y_hat)
        new_theta, self.state = adam_step(self.state, theta, grad)
        return new_theta


class AlgebraicCorrection(Optimizer):
    """逆概率代数修正"""

    name = "algebraic"

    def __init__(self, cfg: AlgebraicConfig):
        self.cfg = cfg

    def step(self, theta: np.ndarray, inputs: StepInputs) -> np.ndarray:
        r = inputs.y - inputs.y_hat
        return algebraic_step(theta, inputs.J, r, self.cfg, predictions=inputs.y_hat)


def make_optimizer(cfg: ExperimentConfig, n_params: int) -> Optimizer:
    """按实验配置创建优化器实例"""
    if cfg.optimizer == "gd":
        return GradientDescent(GdConfig(eta=cfg.eta))
    if cfg.optimizer == "adam":
        return Adam(AdamState.initial(n_params, eta=cfg.eta))
    if cfg.optimizer == "algebraic":
        return AlgebraicCorrection(AlgebraicConfig(lambda_=cfg.lambda_, mode=cfg.algebraic_mode))
    raise ConfigError(f"未知优化器: {cfg.optimizer}", key="optimizer")
