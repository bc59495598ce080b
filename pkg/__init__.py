"""
QNN Bench
=========
量子神经网络优化器基准：逆概率代数修正 vs 梯度下降 / Adam

Teacher-student benchmark for quantum neural network optimizers
under shot noise and dephasing.

模块说明:
- statesim: 稠密纯态/密度矩阵模拟器
- models: 编码线路 + 变分 ansatz，精确/采样前向
- estimator: 参数平移 Jacobian、损失、logit 变换
- optimizers: GD、Adam、Tikhonov 代数修正
- data_service: 教师数据集
- bench_engine: 训练循环、集合、对比与扫描
- reports: 集合统计与结果文件
- config: 系统配置与实验配置
- utils: 日志、异常、随机流
- run: 命令行入口

快速开始:
    $ pip install -r requirements.txt
    $ python run.py compare -o results/compare

模块以脚本目录方式组织（`python run.py ...`），不做包内相对导入。

Author: QNN Bench Team
Version: 1.0.0
"""

__version__ = "1.0.0"
__author__ = "QNN Bench Team"
