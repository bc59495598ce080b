"""
QNN Bench - 工具函数模块
================================
通用工具函数和辅助类：日志、异常、随机流、哈希、格式化

Author: QNN Bench Team
"""

import os
import sys
import json
import hashlib
from datetime import datetime, timedelta, timezone
from typing import Any, Dict, Optional, Sequence

import numpy as np


# ============================================================
# 时区配置
# ============================================================

# 北京时区 (UTC+8)
BEIJING_TZ = timezone(timedelta(hours=8))


def get_beijing_now() -> datetime:
    """获取北京时间（用于日志和 meta.json 时间戳）"""
    return datetime.now(BEIJING_TZ)


# ============================================================
# 异常定义
# ============================================================

class QNNBenchError(Exception):
    """系统异常基类"""


class ConfigError(QNNBenchError):
    """配置错误（参数越界、未知配置项、无法解析的值）"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class UsageError(QNNBenchError):
    """调用错误（量子比特下标越界、长度不匹配、参数个数错误）"""


class NumericError(QNNBenchError):
    """数值错误（非有限值、BCE/logit 定义域越界）"""


# ============================================================
# 日志工具
# ============================================================

class Logger:
    """
    简单的日志工具

    日志写入 stderr，stdout 只保留命令行横幅，结果文件不受影响
    """

    LEVELS = {
        'DEBUG': 10,
        'INFO': 20,
        'WARNING': 30,
        'ERROR': 40,
    }

    def __init__(self, name: str = "qnn_bench", level: Optional[str] = None):
        self.name = name
        if level is None:
            level = os.environ.get("QNN_BENCH_LOG_LEVEL", "INFO")
        self.level = self.LEVELS.get(level.upper(), 20)

    def _log(self, level: str, message: str):
        if self.LEVELS.get(level, 0) >= self.level:
            timestamp = get_beijing_now().strftime('%Y-%m-%d %H:%M:%S')
            print(f"[{timestamp}] [{level}] {self.name}: {message}", file=sys.stderr)

    def debug(self, message: str):
        self._log('DEBUG', message)

    def info(self, message: str):
        self._log('INFO', message)

    def warning(self, message: str):
        self._log('WARNING', message)

    def error(self, message: str):
        self._log('ERROR', message)


# 全局日志实例
logger = Logger()


# ============================================================
# 随机流工具
# ============================================================

# 用途标签 -> 固定编码，保证同一 (种子, 成员, 用途) 总得到同一条随机流
STREAM_TAGS = {
    'teacher_params': 1,
    'inputs': 2,
    'student_init': 3,
    'forward': 4,
    'jacobian': 5,
    'evaluation': 6,
}


def make_rng(seed: int, tag: str) -> np.random.Generator:
    """
    按 (种子, 用途) 派生独立随机流

    Parameters:
    -----------
    seed : int
        成员种子（master_seed + 成员序号）
    tag : str
        用途标签，见 STREAM_TAGS

    Returns:
    --------
    np.random.Generator
        与调度顺序无关的确定性随机流
    """
    if tag not in STREAM_TAGS:
        raise UsageError(f"未知随机流用途: {tag}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), STREAM_TAGS[tag]]))


# ============================================================
# 哈希工具
# ============================================================

def canonical_json(data: Any) -> str:
    """规范化 JSON（键排序，紧凑分隔符）"""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def git_style_hash(data: Any) -> str:
    """git 风格 SHA-1 摘要（对规范化 JSON 计算）"""
    payload = canonical_json(data).encode("utf-8")
    header = f"blob {len(payload)}\0".encode("utf-8")
    return hashlib.sha1(header + payload).hexdigest()


# ============================================================
# 数值工具
# ============================================================

def require_finite(values: np.ndarray, name: str) -> np.ndarray:
    """检查数组全部有限，否则抛出 NumericError"""
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} 含有非有限值")
    return arr


def require_same_length(a: Sequence, b: Sequence, name_a: str, name_b: str):
    if len(a) != len(b):
        raise UsageError(f"{name_a} 与 {name_b} 长度不一致: {len(a)} != {len(b)}")


# ============================================================
# 数值格式化
# ============================================================

def format_loss(value: float) -> str:
    """格式化损失值（日志/横幅显示用）"""
    if not np.isfinite(value):
        return "nan"
    return f"{value:.3e}"


def format_seconds(seconds: float) -> str:
    """格式化耗时"""
    if seconds >= 60:
        return f"{seconds / 60:.1f} min"
    return f"{seconds:.2f} s"


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """均值/标准差(ddof=0)/最小/最大，空输入返回 nan"""
    arr = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    if arr.size == 0:
        nan = float("nan")
        return {'mean': nan, 'std': nan, 'min': nan, 'max': nan, 'count': 0}
    return {
        'mean': float(arr.mean()),
        'std': float(arr.std()),
        'min': float(arr.min()),
        'max': float(arr.max()),
        'count': int(arr.size),
    }
