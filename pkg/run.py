"""
QNN Bench - 命令行入口
==============================
运行教师-学生训练、优化器对比与噪声扫描，结果写入 CSV/JSON

用法:
    # 单个优化器的种子集合
    python run.py train --config bench.cfg --output-dir results/train

    # 三种优化器对比（GD / Adam / 代数修正）
    python run.py compare -o results/compare shots=1000 loss_kind=bce

    # 测量次数扫描
    python run.py sweep-shots --values 10,100,1000,10000 --optimizers adam,algebraic

    # 退相位扫描
    python run.py sweep-dephasing --values 0,0.02,0.05,0.1,0.2

退出码: 0 成功，1 配置/调用错误，2 数值中止（结果标记为 partial）

Author: QNN Bench Team
"""

import os
import sys
from argparse import ArgumentParser
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from bench_engine import BenchmarkEngine
from config import OPTIMIZERS, ExperimentConfig, get_config, parse_config, parse_value_list
from reports import ReportGenerator, build_meta, write_history, write_json, write_sweep
from utils import (
    ConfigError, Logger, NumericError, QNNBenchError, UsageError, get_beijing_now,
)

logger = Logger("run")

VERBS = ("train", "compare", "sweep-shots", "sweep-dephasing")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2


@dataclass
class CliCommand:
    """一次命令行调用"""
    verb: str
    config_path: Optional[str] = None
    output_dir: str = "results"
    overrides: List[str] = field(default_factory=list)
    values: Optional[str] = None         # 扫描点，逗号分隔
    optimizers: Optional[str] = None     # 扫描用优化器，逗号分隔

    def __post_init__(self):
        if self.verb not in VERBS:
            raise UsageError(f"未知命令: {self.verb}（可用: {', '.join(VERBS)}）")


class _Parser(ArgumentParser):
    """参数错误转为 UsageError，由 main 统一映射退出码"""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = _Parser(prog="run.py", description="QNN Bench - 量子神经网络优化器基准")
    parser.add_argument('verb', choices=VERBS, help="要执行的命令")
    parser.add_argument('overrides', nargs='*', metavar='key=value', help="覆盖配置项")
    parser.add_argument('-c', '--config', dest='config_path', default=None, help="key=value 配置文件")
    parser.add_argument('-o', '--output-dir', default="results", help="输出目录")
    parser.add_argument('--values', default=None, help="扫描点列表，逗号分隔")
    parser.add_argument('--optimizers', default=None, help="扫描用优化器列表，逗号分隔")
    return parser


def parse_args(argv: List[str]) -> CliCommand:
    args = build_parser().parse_intermixed_args(argv)
    return CliCommand(
        verb=args.verb,
        config_path=args.config_path,
        output_dir=args.output_dir,
        overrides=list(args.overrides),
        values=args.values,
        optimizers=args.optimizers,
    )


def _prepare_output_dir(path: str):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise UsageError(f"无法创建输出目录 {path}: {e}") from None


def _sweep_optimizers(cmd: CliCommand, cfg: ExperimentConfig) -> List[str]:
    if cmd.optimizers is None:
        return [cfg.optimizer]
    names = parse_value_list(cmd.optimizers, str)
    for name in names:
        if name not in OPTIMIZERS:
            raise ConfigError(f"必须是 {OPTIMIZERS} 之一: {name}", key="optimizers")
    return names


# ============================================================
# 命令实现
# ============================================================

def run_train(cmd: CliCommand, cfg: ExperimentConfig, engine: BenchmarkEngine) -> Dict:
    print(f"\n>>> 训练 optimizer={cfg.optimizer}, 集合大小 {cfg.ensemble_size}...")
    records = engine.run_ensemble(cfg)
    write_history(records, os.path.join(cmd.output_dir, "history.csv"))
    return ReportGenerator(cmd.verb, cfg).history_summary({cfg.optimizer: records})


def run_compare(cmd: CliCommand, cfg: ExperimentConfig, engine: BenchmarkEngine) -> Dict:
    print(f"\n>>> 对比 {', '.join(OPTIMIZERS)}（相同数据集与种子）...")
    results = engine.compare_optimizers(cfg, OPTIMIZERS)
    for name, records in results.items():
        write_history(records, os.path.join(cmd.output_dir, f"history_{name}.csv"))
    return ReportGenerator(cmd.verb, cfg).history_summary(results)


def run_sweep(cmd: CliCommand, cfg: ExperimentConfig, engine: BenchmarkEngine) -> Dict:
    bench = get_config().bench
    if cmd.verb == "sweep-shots":
        values = parse_value_list(cmd.values, int) if cmd.values else list(bench.shot_values)
        sweep_fn = engine.sweep_shots
    else:
        values = parse_value_list(cmd.values, float) if cmd.values else list(bench.p_values)
        sweep_fn = engine.sweep_dephasing

    names = _sweep_optimizers(cmd, cfg)
    sweeps = {}
    for name in names:
        print(f"\n>>> {cmd.verb} optimizer={name}, 扫描点 {values}...")
        sweeps[name] = sweep_fn(cfg.with_overrides(optimizer=name), values)

    for name, sweep in sweeps.items():
        filename = "sweep.csv" if len(sweeps) == 1 else f"sweep_{name}.csv"
        write_sweep(sweep, os.path.join(cmd.output_dir, filename))
    return ReportGenerator(cmd.verb, cfg).sweep_summary(sweeps)


COMMANDS = {
    "train": run_train,
    "compare": run_compare,
    "sweep-shots": run_sweep,
    "sweep-dephasing": run_sweep,
}


def run_command(cmd: CliCommand, argv: Optional[List[str]] = None) -> int:
    """
    执行命令并写出结果文件

    Returns:
    --------
    int
        退出码；有运行中止时为 2（结果仍然写出，summary.json 标记为 partial）
    """
    started_at = get_beijing_now()
    cfg = parse_config(cmd.config_path, cmd.overrides)
    _prepare_output_dir(cmd.output_dir)

    print("=" * 60)
    print(f"🧪 QNN Bench - {cmd.verb}")
    print("-" * 60)
    print(f"运行时间（北京时间）: {started_at.strftime('%Y-%m-%d %H:%M:%S')}")
    print(f"配置哈希: {cfg.config_hash()}")
    print(f"输出目录: {cmd.output_dir}")
    print("=" * 60)

    engine = BenchmarkEngine()
    summary = COMMANDS[cmd.verb](cmd, cfg, engine)

    write_json(summary, os.path.join(cmd.output_dir, "summary.json"))
    write_json(
        build_meta(started_at, get_beijing_now(), argv),
        os.path.join(cmd.output_dir, "meta.json"),
    )
    ReportGenerator.print_summary(summary)
    logger.info(f"{cmd.verb} 完成，状态 {summary['status']}")

    return EXIT_NUMERIC if summary['status'] == 'partial' else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """主入口"""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run_command(parse_args(argv), argv)
    except (ConfigError, UsageError) as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"数值错误: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except QNNBenchError as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
