"""
QNN Bench - 数据服务层
==============================
教师网络合成数据集：生成、缓存

教师参数 θ ~ N(0, σ²)，输入特征 ~ U[-π, π]，
标签为教师无噪声精确输出概率（不采样、不裁剪）

Author: QNN Bench Team
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from config import ExperimentConfig, get_config
from models import CircuitModel, InputPoint, forward_exact_batch, random_model
from utils import Logger, git_style_hash, make_rng

logger = Logger("data_service")


@dataclass
class TeacherDataset:
    """教师数据集"""
    xs: List[InputPoint]
    y: np.ndarray
    teacher: CircuitModel
    seed: int

    def __len__(self):
        return len(self.xs)

    def features_matrix(self) -> np.ndarray:
        """N × K 特征矩阵"""
        return np.vstack([x.features for x in self.xs])


class DatasetService:
    """
    数据服务类
    提供统一的数据集访问接口，相同 (配置, 种子) 只生成一次
    """

    def __init__(self):
        self.config = get_config()
        self._data_cache: Dict[str, TeacherDataset] = {}

    @staticmethod
    def _cache_key(cfg: ExperimentConfig, seed: int) -> str:
        """只有影响数据集的字段参与缓存键"""
        return git_style_hash({
            "n_qubits": cfg.n_qubits,
            "teacher_depth": cfg.teacher_depth,
            "n_points": cfg.n_points,
            "init_sigma": cfg.init_sigma,
            "seed": int(seed),
        })

    def make_teacher_dataset(
        self,
        cfg: ExperimentConfig,
        seed: int,
        use_cache: bool = True,
    ) -> TeacherDataset:
        """
        生成教师数据集

        Parameters:
        -----------
        cfg : ExperimentConfig
            实验配置（使用 n_qubits、teacher_depth、n_points、init_sigma）
        seed : int
            数据集种子
        use_cache : bool
            是否使用内存缓存

        Returns:
        --------
        TeacherDataset
            N 个输入点与 [0, 1] 内的目标概率
        """
        cache_key = self._cache_key(cfg, seed)
        if use_cache and cache_key in self._data_cache:
            logger.debug(f"数据集缓存命中 seed={seed}")
            return self._data_cache[cache_key]

        bench = self.config.bench
        teacher = random_model(
            cfg.n_qubits, cfg.teacher_depth, cfg.init_sigma,
            make_rng(seed, "teacher_params"),
        )
        features = make_rng(seed, "inputs").uniform(
            bench.feature_low, bench.feature_high, size=(cfg.n_points, cfg.n_qubits)
        )
        xs = [InputPoint(row) for row in features]
        y = forward_exact_batch(teacher, xs)

        dataset = TeacherDataset(xs=xs, y=y, teacher=teacher, seed=int(seed))
        logger.info(
            f"教师数据集生成完成: N={cfg.n_points}, L_teacher={cfg.teacher_depth}, "
            f"seed={seed}, y∈[{y.min():.3f}, {y.max():.3f}]"
        )
        if use_cache:
            self._data_cache[cache_key] = dataset
        return dataset

    def clear_cache(self):
        """清除所有缓存"""
        self._data_cache.clear()


# 全局数据服务实例
_data_service_instance = None


def get_data_service() -> DatasetService:
    """获取数据服务单例"""
    global _data_service_instance
    if _data_service_instance is None:
        _data_service_instance = DatasetService()
    return _data_service_instance


def make_teacher_dataset(cfg: ExperimentConfig, seed: int) -> Tuple[List[InputPoint], np.ndarray]:
    """便捷函数：返回 (输入点, 目标概率)"""
    dataset = get_data_service().make_teacher_dataset(cfg, seed)
    return dataset.xs, dataset.y
