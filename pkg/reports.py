"""
QNN Bench - 报表生成模块
================================
集合统计、结果文件（CSV/JSON）与命令行摘要

Author: QNN Bench Team
"""

import json
import math
import platform
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from bench_engine import (
    STATUS_OK, RunRecord, SweepSummary,
    aborted_runs, final_losses, mean_loss_curve, records_to_frame,
)
from config import ExperimentConfig, get_config
from utils import Logger, format_loss, summarize

logger = Logger("reports")

HISTORY_COLUMNS = ['seed', 'optimizer', 'step', 'loss']
SWEEP_COLUMNS = ['value', 'final_loss_mean', 'final_loss_std']
FLOAT_FORMAT = '%.17g'
REFERENCE_SLOPE = -1.0


# ============================================================
# 统计
# ============================================================

def ensemble_statistics(records: Sequence[RunRecord]) -> pd.DataFrame:
    """
    按 (优化器, 步) 统计集合损失

    Returns:
    --------
    pd.DataFrame
        列: optimizer, step, mean, std（总体标准差 ddof=0）, count
    """
    df = records_to_frame(records)
    if df.empty:
        return pd.DataFrame(columns=['optimizer', 'step', 'mean', 'std', 'count'])
    df = df[df['status'] == STATUS_OK]
    grouped = df.groupby(['optimizer', 'step'])['loss']
    stats = pd.DataFrame({
        'mean': grouped.mean(),
        'std': grouped.std(ddof=0),
        'count': grouped.count(),
    }).reset_index()
    return stats.sort_values(['optimizer', 'step']).reset_index(drop=True)


def mean_loss_at_step(records: Sequence[RunRecord], step: int) -> float:
    """某一步的集合平均损失；该步无记录时为 nan"""
    values = [r.loss for r in records if r.status == STATUS_OK and r.step == step]
    return summarize(values)['mean']


def optimizer_statistics(records: Sequence[RunRecord]) -> Dict[str, Any]:
    """单个优化器的最终损失统计"""
    finals = list(final_losses(records).values())
    stats = summarize(finals)
    seeds = {r.seed for r in records}
    return {
        'final_loss_mean': stats['mean'],
        'final_loss_std': stats['std'],
        'final_loss_min': stats['min'],
        'final_loss_max': stats['max'],
        'runs': len(seeds),
        'completed_runs': stats['count'],
    }


# ============================================================
# 文件输出
# ============================================================

def history_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    """history.csv 表格（中止记录只出现在 summary.json）"""
    df = records_to_frame(records)
    if not df.empty:
        df = df[df['status'] == STATUS_OK]
    return df[HISTORY_COLUMNS].reset_index(drop=True)


def write_history(records: Sequence[RunRecord], path: str) -> str:
    history_frame(records).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"已写入 {path}")
    return path


def write_sweep(summary: SweepSummary, path: str) -> str:
    summary.to_frame()[SWEEP_COLUMNS].to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n'
    )
    logger.info(f"已写入 {path}")
    return path


def _json_safe(value: Any) -> Any:
    """nan/inf -> null，numpy 标量 -> Python 标量"""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(data: Dict[str, Any], path: str) -> str:
    """键排序、无时间戳，保证同配置重跑字节一致"""
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_safe(data), f, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
        f.write('\n')
    logger.info(f"已写入 {path}")
    return path


def build_meta(started_at, finished_at, argv: Optional[List[str]] = None) -> Dict[str, Any]:
    """meta.json：时间戳、耗时、版本、命令行"""
    return {
        'started_at': started_at.isoformat(),
        'finished_at': finished_at.isoformat(),
        'elapsed_seconds': (finished_at - started_at).total_seconds(),
        'versions': {
            'python': platform.python_version(),
            'numpy': np.__version__,
            'pandas': pd.__version__,
            'scipy': scipy.__version__,
        },
        'argv': list(sys.argv if argv is None else argv),
        'conventions': {
            'bce_targets': 'soft teacher probabilities',
            'dephasing': 'every qubit after the encoding block and after each variational layer',
            'final_loss': 'loss at the last recorded step',
        },
    }


# ============================================================
# 报告
# ============================================================

class ReportGenerator:
    """
    报告生成器
    为每个命令组装 summary.json 并打印摘要
    """

    def __init__(self, verb: str, cfg: ExperimentConfig):
        self.verb = verb
        self.cfg = cfg
        self.config = get_config()

    def _base(self, failed: List[Dict[str, Any]]) -> Dict[str, Any]:
        return {
            'verb': self.verb,
            'config': self.cfg.to_dict(),
            'config_hash': self.cfg.config_hash(),
            'status': 'partial' if failed else 'complete',
            'aborted_runs': failed,
        }

    def history_summary(self, results: Dict[str, Sequence[RunRecord]]) -> Dict[str, Any]:
        """train / compare 摘要"""
        early = self.config.bench.early_step
        failed: List[Dict[str, Any]] = []
        optimizers = {}
        for name, records in results.items():
            failed.extend(aborted_runs(records))
            stats = optimizer_statistics(records)
            stats[f'mean_loss_step_{early}'] = mean_loss_at_step(records, early)
            stats['loss_curve'] = mean_loss_curve(records)
            optimizers[name] = stats

        summary = self._base(failed)
        summary['optimizers'] = optimizers
        return summary

    def sweep_summary(self, sweeps: Dict[str, SweepSummary]) -> Dict[str, Any]:
        """sweep-shots / sweep-dephasing 摘要"""
        failed: List[Dict[str, Any]] = []
        optimizers, tables = {}, {}
        for name, sweep in sweeps.items():
            failed.extend(sweep.aborted_runs)
            finite = [m for m in sweep.final_loss_mean if math.isfinite(m)]
            stats = summarize(finite)
            entry = {
                'final_loss_mean': sweep.final_loss_mean,
                'final_loss_std': sweep.final_loss_std,
                'final_loss_min': stats['min'],
                'final_loss_max': stats['max'],
                'loss_curves': sweep.loss_curves,
            }
            if sweep.sweep_variable == 'shots':
                entry['loglog_slope'] = sweep.loglog_slope
                entry['loglog_intercept'] = sweep.loglog_intercept
            optimizers[name] = entry
            tables[name] = sweep.to_frame().to_dict('records')

        summary = self._base(failed)
        first = next(iter(sweeps.values()))
        summary['sweep_variable'] = first.sweep_variable
        summary['values'] = first.values
        summary['optimizers'] = optimizers
        summary['sweep'] = tables
        if first.sweep_variable == 'shots':
            # 顶层斜率优先取代数修正的扫描
            primary = 'algebraic' if 'algebraic' in sweeps else next(iter(sweeps))
            summary['loglog_optimizer'] = primary
            summary['loglog_slope'] = sweeps[primary].loglog_slope
            summary['loglog_intercept'] = sweeps[primary].loglog_intercept
            summary['reference_slope'] = REFERENCE_SLOPE
        return summary

    @staticmethod
    def print_summary(summary: Dict[str, Any]):
        """打印摘要（stdout）"""
        print("\n" + "=" * 60)
        print(f"运行摘要: {summary['verb']}  (config {summary['config_hash'][:10]})")
        print("-" * 60)

        if 'sweep' in summary:
            variable = summary['sweep_variable']
            for name, rows in summary['sweep'].items():
                print(f"优化器: {name}")
                print(f"  {variable:<10} | {'最终损失均值':<12} | {'标准差':<12}")
                for row in rows:
                    print(f"  {row['value']:<10g} | {format_loss(row['final_loss_mean']):<12} | "
                          f"{format_loss(row['final_loss_std']):<12}")
            if 'loglog_slope' in summary:
                slope = summary['loglog_slope']
                shown = "nan" if slope is None or not math.isfinite(slope) else f"{slope:.3f}"
                print(f"对数斜率 ({summary['loglog_optimizer']}): {shown}  "
                      f"(参考 {summary['reference_slope']:.0f})")
        else:
            early = get_config().bench.early_step
            print(f"{'优化器':<12} | {'最终损失':<12} | {'标准差':<12} | {'第' + str(early) + '步':<12}")
            print("-" * 60)
            for name, stats in summary['optimizers'].items():
                print(f"{name:<12} | {format_loss(stats['final_loss_mean']):<12} | "
                      f"{format_loss(stats['final_loss_std']):<12} | "
                      f"{format_loss(stats[f'mean_loss_step_{early}']):<12}")

        if summary['aborted_runs']:
            print("-" * 60)
            print(f"⚠️ {len(summary['aborted_runs'])} 个运行中止，结果为部分结果")
        print("=" * 60)

