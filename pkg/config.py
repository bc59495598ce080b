"""
QNN Bench - 配置管理模块
================================
集中管理所有系统配置参数，支持环境变量覆盖

- SystemConfig: 全局常量（裁剪阈值、平移量、Adam 常数、默认扫描点）
- ExperimentConfig: 单次实验配置，可由 key=value 配置文件 + 命令行覆盖生成

Author: QNN Bench Team
"""

import os
import math
from dataclasses import dataclass, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # 未安装 python-dotenv 时仅使用系统环境变量

from utils import ConfigError, Logger, git_style_hash

logger = Logger("config")

# 精确模式（不做有限次采样）
EXACT = None

LOSS_KINDS = ("mse", "bce")
OPTIMIZERS = ("gd", "adam", "algebraic")
ALGEBRAIC_MODES = ("probability", "logit")


@dataclass
class SimulationConfig:
    """模拟器配置"""
    clip_eps: float = 1e-6                   # 采样估计裁剪阈值 ε
    shift: float = math.pi / 2               # 参数平移量
    max_qubits: int = 20                     # 稠密模拟上限
    atol: float = 1e-12                      # 归一化/厄米性容差


@dataclass
class OptimizerConfig:
    """优化器常数配置"""
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps_hat: float = 1e-8


@dataclass
class BenchConfig:
    """基准测试配置"""
    # 默认扫描点
    shot_values: Tuple[int, ...] = (10, 100, 1000, 10000)
    p_values: Tuple[float, ...] = (0.0, 0.02, 0.05, 0.1, 0.2)

    # 输入特征均匀分布区间（弧度）
    feature_low: float = -math.pi
    feature_high: float = math.pi

    # 对比报告中记录的"少步数"检查点
    early_step: int = 5


class SystemConfig:
    """
    系统主配置类
    整合所有子配置模块
    """
    def __init__(self):
        self.simulation = SimulationConfig()
        self.optimizer = OptimizerConfig()
        self.bench = BenchConfig()


# 全局配置实例（单例模式）
_config_instance = None


def get_config() -> SystemConfig:
    """获取全局配置实例"""
    global _config_instance
    if _config_instance is None:
        _config_instance = SystemConfig()
    return _config_instance


# ============================================================
# 实验配置
# ============================================================

@dataclass(frozen=True)
class ExperimentConfig:
    """
    教师-学生实验配置

    配置文件键名与字段名一致，唯一例外是 `lambda`（Python 关键字）
    对应字段 `lambda_`；`shots=exact` 表示精确模式
    """
    n_qubits: int = 2
    teacher_depth: int = 6
    student_depth: int = 3
    n_points: int = 16
    steps: int = 50
    shots: Optional[int] = 1000
    lambda_: float = 0.2
    eta: float = 0.1
    loss_kind: str = "mse"
    p_deph: float = 0.0
    ensemble_size: int = 10
    master_seed: int = 0
    init_sigma: float = 1.0
    optimizer: str = "algebraic"
    algebraic_mode: str = "probability"

    def validate(self) -> 'ExperimentConfig':
        """检查不变量，违规时抛出 ConfigError（带键名）"""
        if self.n_qubits != 2:
            raise ConfigError("当前 ansatz 只支持 2 个量子比特", key="n_qubits")
        if self.teacher_depth < 0:
            raise ConfigError("必须 >= 0", key="teacher_depth")
        if self.student_depth < 1:
            raise ConfigError("必须 >= 1", key="student_depth")
        if self.n_points < 1:
            raise ConfigError("必须 >= 1", key="n_points")
        if self.steps < 1:
            raise ConfigError("必须 >= 1", key="steps")
        if self.shots is not EXACT and self.shots < 1:
            raise ConfigError("必须 >= 1 或为 exact", key="shots")
        if not (self.lambda_ > 0 and math.isfinite(self.lambda_)):
            raise ConfigError("Tikhonov 参数必须 > 0", key="lambda")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ConfigError("学习率必须 >= 0", key="eta")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"必须是 {LOSS_KINDS} 之一", key="loss_kind")
        if not 0.0 <= self.p_deph <= 1.0:
            raise ConfigError("必须在 [0, 1] 内", key="p_deph")
        if self.ensemble_size < 1:
            raise ConfigError("必须 >= 1", key="ensemble_size")
        if self.master_seed < 0:
            raise ConfigError("随机种子必须 >= 0", key="master_seed")
        if not (self.init_sigma >= 0 and math.isfinite(self.init_sigma)):
            raise ConfigError("必须 >= 0", key="init_sigma")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"必须是 {OPTIMIZERS} 之一", key="optimizer")
        if self.algebraic_mode not in ALGEBRAIC_MODES:
            raise ConfigError(f"必须是 {ALGEBRAIC_MODES} 之一", key="algebraic_mode")

        if self.teacher_depth <= self.student_depth:
            logger.warning(
                f"teacher_depth={self.teacher_depth} <= student_depth={self.student_depth}，"
                "不是标准的深教师/浅学生设置"
            )
        return self

    def with_overrides(self, **changes) -> 'ExperimentConfig':
        """返回替换部分字段后的新配置（已校验）"""
        return replace(self, **changes).validate()

    @property
    def n_params(self) -> int:
        """学生参数个数 P = 4L"""
        return 4 * self.student_depth

    def to_dict(self) -> Dict[str, object]:
        """导出为配置文件键名的字典（用于回显与哈希）"""
        data = {}
        for f in fields(self):
            key = _FIELD_TO_KEY.get(f.name, f.name)
            value = getattr(self, f.name)
            data[key] = "exact" if (f.name == "shots" and value is EXACT) else value
        return data

    def config_hash(self) -> str:
        """git 风格配置哈希"""
        return git_style_hash(self.to_dict())


_KEY_TO_FIELD = {"lambda": "lambda_"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def config_keys() -> List[str]:
    """全部合法配置键"""
    return [_FIELD_TO_KEY.get(f.name, f.name) for f in fields(ExperimentConfig)]


def _parse_value(key: str, raw: Optional[str]):
    """按字段类型解析单个字符串值"""
    name = _KEY_TO_FIELD.get(key, key)
    if name not in _FIELD_TYPES:
        raise ConfigError("未知配置项", key=key)
    if raw is None:
        raise ConfigError("缺少取值", key=key)

    text = raw.strip()
    try:
        if name == "shots":
            if text.lower() == "exact":
                return name, EXACT
            return name, int(text)
        kind = _FIELD_TYPES[name]
        if kind in (int, "int"):
            return name, int(text)
        if kind in (float, "float"):
            return name, float(text)
        return name, text.lower()
    except ValueError:
        raise ConfigError(f"无法解析取值 {raw!r}", key=key) from None


def _split_override(item: str) -> Tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"覆盖项格式应为 key=value: {item!r}")
    key, value = item.split("=", 1)
    return key.strip(), value


def parse_config(path: Optional[str], overrides: Sequence[str] = ()) -> ExperimentConfig:
    """
    读取 key=value 配置文件并应用命令行覆盖

    Parameters:
    -----------
    path : str, optional
        配置文件路径（`#` 开头为注释）；None 表示只用默认值
    overrides : Sequence[str]
        命令行 key=value 覆盖项，优先级高于文件

    Returns:
    --------
    ExperimentConfig
        已校验的实验配置
    """
    values: Dict[str, object] = {}

    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"配置文件不存在: {path}")
        from dotenv import dotenv_values
        for key, raw in dotenv_values(path, interpolate=False).items():
            name, value = _parse_value(key.strip(), raw)
            values[name] = value

    for item in overrides:
        key, raw = _split_override(item)
        name, value = _parse_value(key, raw)
        values[name] = value

    try:
        cfg = ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()


def parse_value_list(text: str, kind=float) -> List:
    """解析逗号分隔的扫描点列表"""
    try:
        items = [kind(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"无法解析扫描点列表 {text!r}", key="values") from None
    if not items:
        raise ConfigError("扫描点列表为空", key="values")
    return items

