"""
QNN Bench - 基准测试引擎
============================
教师-学生训练框架，支持多优化器对比与参数扫描

Author: QNN Bench Team
"""

import math
import time
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config import EXACT, OPTIMIZERS, ExperimentConfig, get_config
from data_service import DatasetService, TeacherDataset, get_data_service
from estimator import LossKind, jacobian, loss
from models import ShotCounter, predict, random_model
from optimizers import StepInputs, make_optimizer
from utils import (
    ConfigError, Logger, NumericError, QNNBenchError,
    format_loss, format_seconds, make_rng, require_finite, summarize,
)

logger = Logger("bench_engine")

STATUS_OK = "ok"
STATUS_ABORTED = "aborted"


@dataclass
class RunRecord:
    """训练记录（一行 = 某个种子某一步的损失）"""
    seed: int
    optimizer: str
    step: int
    loss: float
    wall_time: float             # 自本次训练开始的秒数
    config_hash: str
    status: str = STATUS_OK
    message: str = ""


@dataclass
class SweepSummary:
    """扫描结果（集合均值/标准差）"""
    sweep_variable: str          # "shots" 或 "p_deph"
    optimizer: str
    values: List[float]
    final_loss_mean: List[float]
    final_loss_std: List[float]
    loss_curves: Dict[str, List[float]] = field(default_factory=dict)
    aborted_runs: List[Dict[str, object]] = field(default_factory=list)
    loglog_slope: Optional[float] = None
    loglog_intercept: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        """sweep.csv 表格"""
        return pd.DataFrame({
            'value': self.values,
            'final_loss_mean': self.final_loss_mean,
            'final_loss_std': self.final_loss_std,
        })


@dataclass
class ShotUsage:
    """最近一次训练的测量消耗"""
    optimization: int = 0
    evaluation: int = 0
    expected_optimization: Optional[int] = None


# ============================================================
# 记录工具
# ============================================================

def records_to_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    """记录列表转 DataFrame"""
    columns = [f for f in RunRecord.__dataclass_fields__]
    if not records:
        return pd.DataFrame(columns=columns)
    return pd.DataFrame([asdict(r) for r in records], columns=columns)


def aborted_runs(records: Sequence[RunRecord]) -> List[Dict[str, object]]:
    """中止运行的诊断信息"""
    return [
        {'seed': r.seed, 'optimizer': r.optimizer, 'step': r.step, 'message': r.message}
        for r in records if r.status == STATUS_ABORTED
    ]


def final_losses(records: Sequence[RunRecord]) -> Dict[int, float]:
    """
    每个种子最后一步的损失（中止的运行不计入）

    Returns:
    --------
    Dict[int, float]
        {种子: 最终损失}
    """
    aborted = {r.seed for r in records if r.status == STATUS_ABORTED}
    finals: Dict[int, RunRecord] = {}
    for r in records:
        if r.seed in aborted or r.status != STATUS_OK:
            continue
        if r.seed not in finals or r.step > finals[r.seed].step:
            finals[r.seed] = r
    return {seed: rec.loss for seed, rec in sorted(finals.items())}


def mean_loss_curve(records: Sequence[RunRecord]) -> List[float]:
    """按步求集合平均损失曲线（只用正常完成的运行）"""
    df = records_to_frame(records)
    if df.empty:
        return []
    df = df[df['status'] == STATUS_OK]
    return df.groupby('step')['loss'].mean().sort_index().tolist()


# ============================================================
# 引擎
# ============================================================

class BenchmarkEngine:
    """
    基准测试引擎

    支持:
    - 单次训练（GD / Adam / 代数修正）
    - 种子集合
    - 多优化器对比
    - 测量次数扫描、退相位扫描
    """

    def __init__(self, data_service: Optional[DatasetService] = None):
        self.config = get_config()
        self.data_service = data_service or get_data_service()
        self.last_shot_usage = ShotUsage()

    def make_teacher_dataset(self, cfg: ExperimentConfig, seed: int) -> TeacherDataset:
        return self.data_service.make_teacher_dataset(cfg, seed)

    def train(
        self,
        cfg: ExperimentConfig,
        seed: int,
        dataset: Optional[TeacherDataset] = None,
    ) -> List[RunRecord]:
        """
        训练一个学生网络

        Parameters:
        -----------
        cfg : ExperimentConfig
            实验配置
        seed : int
            成员种子（决定学生初始化与采样随机流）
        dataset : TeacherDataset, optional
            教师数据集，默认由 master_seed 生成

        Returns:
        --------
        List[RunRecord]
            step 0 … T 共 T + 1 条记录；出现非有限值时以一条中止记录结束
        """
        if dataset is None:
            dataset = self.make_teacher_dataset(cfg, cfg.master_seed)

        start = time.perf_counter()
        config_hash = cfg.config_hash()
        kind = LossKind(cfg.loss_kind)
        shots = cfg.shots

        student = random_model(
            cfg.n_qubits, cfg.student_depth, cfg.init_sigma,
            make_rng(seed, "student_init"), p_deph=cfg.p_deph,
        )
        optimizer = make_optimizer(cfg, student.n_params)
        counter = ShotCounter()
        rng_forward = make_rng(seed, "forward")
        rng_jacobian = make_rng(seed, "jacobian")
        rng_evaluation = make_rng(seed, "evaluation")

        records: List[RunRecord] = []

        def record(step: int, value: float):
            records.append(RunRecord(
                seed=int(seed), optimizer=optimizer.name, step=step, loss=value,
                wall_time=time.perf_counter() - start, config_hash=config_hash,
            ))

        step = 0
        try:
            for step in range(cfg.steps):
                # === 前向（测量） ===
                y_hat = predict(student, dataset.xs, shots, rng_forward, counter)
                value = loss(kind, dataset.y, y_hat)
                if not math.isfinite(value):
                    raise NumericError(f"第 {step} 步损失非有限: {value}")
                record(step, value)

                # === Jacobian（参数平移） ===
                J = jacobian(student, dataset.xs, shots, rng_jacobian, counter)

                # === 参数更新 ===
                theta = optimizer.step(student.theta, StepInputs(J, dataset.y, y_hat, kind))
                student = student.with_theta(require_finite(theta, "theta"))

            step = cfg.steps
            y_hat = predict(student, dataset.xs, shots, rng_evaluation, counter, purpose="evaluation")
            value = loss(kind, dataset.y, y_hat)
            if not math.isfinite(value):
                raise NumericError(f"第 {step} 步损失非有限: {value}")
            record(step, value)

        except NumericError as e:
            logger.warning(f"训练中止 seed={seed} optimizer={optimizer.name} step={step}: {e}")
            records.append(RunRecord(
                seed=int(seed), optimizer=optimizer.name, step=step, loss=float("nan"),
                wall_time=time.perf_counter() - start, config_hash=config_hash,
                status=STATUS_ABORTED, message=str(e),
            ))

        self.last_shot_usage = ShotUsage(
            optimization=counter.optimization,
            evaluation=counter.evaluation,
            expected_optimization=self.expected_optimization_shots(cfg),
        )
        if records[-1].status == STATUS_OK:
            expected = self.last_shot_usage.expected_optimization
            if expected is not None and counter.optimization != expected:
                raise QNNBenchError(
                    f"测量次数统计不符: 实际 {counter.optimization}, 预期 {expected}"
                )
            logger.info(
                f"训练完成 seed={seed} optimizer={optimizer.name} "
                f"loss={format_loss(records[-1].loss)} 耗时 {format_seconds(records[-1].wall_time)}"
            )
        return records

    @staticmethod
    def expected_optimization_shots(cfg: ExperimentConfig) -> Optional[int]:
        """T · (N + 2NP) · S；精确模式为 None"""
        if cfg.shots is EXACT:
            return None
        n, p = cfg.n_points, cfg.n_params
        return cfg.steps * (n + 2 * n * p) * cfg.shots

    def run_ensemble(self, cfg: ExperimentConfig) -> List[RunRecord]:
        """
        种子集合：成员种子 master_seed + 0 … ensemble_size - 1，
        全部成员共用 master_seed 生成的数据集
        """
        dataset = self.make_teacher_dataset(cfg, cfg.master_seed)
        records: List[RunRecord] = []
        for member in range(cfg.ensemble_size):
            records.extend(self.train(cfg, cfg.master_seed + member, dataset))

        failed = aborted_runs(records)
        if failed:
            logger.warning(f"集合中 {len(failed)} 个成员中止 (optimizer={cfg.optimizer})")
        return records

    def compare_optimizers(
        self,
        cfg: ExperimentConfig,
        optimizers: Sequence[str] = OPTIMIZERS,
    ) -> Dict[str, List[RunRecord]]:
        """
        多优化器对比：相同数据集、相同种子

        Returns:
        --------
        Dict[str, List[RunRecord]]
            {优化器名称: 集合记录}
        """
        results = {}
        for name in optimizers:
            logger.info(f"对比运行: optimizer={name}")
            results[name] = self.run_ensemble(cfg.with_overrides(optimizer=name))
        return results

    def _sweep(
        self,
        cfg: ExperimentConfig,
        variable: str,
        values: Sequence[float],
        configs: Sequence[ExperimentConfig],
    ) -> SweepSummary:
        means, stds, curves, failed = [], [], {}, []
        for value, point_cfg in zip(values, configs):
            records = self.run_ensemble(point_cfg)
            stats = summarize(list(final_losses(records).values()))
            means.append(stats['mean'])
            stds.append(stats['std'])
            curves[str(value)] = mean_loss_curve(records)
            failed.extend({**item, variable: value} for item in aborted_runs(records))
            logger.info(
                f"扫描点 {variable}={value}: final_loss={format_loss(stats['mean'])} "
                f"± {format_loss(stats['std'])}"
            )
        return SweepSummary(
            sweep_variable=variable,
            optimizer=cfg.optimizer,
            values=list(values),
            final_loss_mean=means,
            final_loss_std=stds,
            loss_curves=curves,
            aborted_runs=failed,
        )

    def sweep_shots(self, cfg: ExperimentConfig, shot_values: Sequence[int]) -> SweepSummary:
        """
        测量次数扫描（MSE 回归），并拟合 log(最终损失) ~ log(S) 的斜率
        """
        if not shot_values:
            raise ConfigError("扫描点列表为空", key="values")
        shot_values = [int(s) for s in shot_values]
        if any(s < 1 for s in shot_values):
            raise ConfigError(f"测量次数必须 >= 1: {shot_values}", key="values")

        configs = [cfg.with_overrides(shots=s, loss_kind=LossKind.MSE.value) for s in shot_values]
        summary = self._sweep(cfg, "shots", shot_values, configs)
        summary.loglog_slope, summary.loglog_intercept = loglog_fit(
            shot_values, summary.final_loss_mean
        )
        return summary

    def sweep_dephasing(self, cfg: ExperimentConfig, p_values: Sequence[float]) -> SweepSummary:
        """退相位扫描（忽略测量噪声，强制精确模式）"""
        if not p_values:
            raise ConfigError("扫描点列表为空", key="values")
        p_values = [float(p) for p in p_values]
        if any(not 0.0 <= p <= 1.0 for p in p_values):
            raise ConfigError(f"退相位概率必须在 [0, 1] 内: {p_values}", key="values")

        configs = [cfg.with_overrides(p_deph=p, shots=EXACT) for p in p_values]
        return self._sweep(cfg, "p_deph", p_values, configs)


def loglog_fit(xs: Sequence[float], ys: Sequence[float]):
    """
    最小二乘拟合 log(y) = a·log(x) + b

    Returns:
    --------
    Tuple[float, float]
        (斜率 a, 截距 b)；有效点少于 2 个时为 (nan, nan)
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    mask = np.isfinite(y) & (y > 0) & (x > 0)
    if np.count_nonzero(mask) < 2 or len(np.unique(x[mask])) < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope), float(intercept)
