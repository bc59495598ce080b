"""
基准测试引擎测试：数据集、训练循环、集合、扫描
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import bench_engine
from bench_engine import (
    STATUS_ABORTED, BenchmarkEngine, RunRecord,
    final_losses, loglog_fit, mean_loss_curve,
)
from config import EXACT, ExperimentConfig
from data_service import DatasetService, make_teacher_dataset
from models import encode
from statesim import all_ones_index, apply_circuit, born_probability, zero_state
from reports import ensemble_statistics, mean_loss_at_step
from utils import ConfigError, NumericError


def _small_cfg(**changes) -> ExperimentConfig:
    base = dict(
        teacher_depth=2, student_depth=1, n_points=4, steps=3,
        shots=100, ensemble_size=2, master_seed=3,
    )
    base.update(changes)
    return ExperimentConfig(**base).validate()


def _engine() -> BenchmarkEngine:
    return BenchmarkEngine(DatasetService())


def _strip_time(records):
    return [(r.seed, r.optimizer, r.step, r.loss, r.config_hash, r.status) for r in records]


# ============================================================
# 数据集
# ============================================================

def test_teacher_dataset_deterministic():
    cfg = _small_cfg()
    service = DatasetService()
    a = service.make_teacher_dataset(cfg, 11, use_cache=False)
    b = service.make_teacher_dataset(cfg, 11, use_cache=False)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.features_matrix(), b.features_matrix())
    assert np.array_equal(a.teacher.theta, b.teacher.theta)


def test_teacher_dataset_ranges():
    cfg = _small_cfg(n_points=16, teacher_depth=6, student_depth=3)
    dataset = DatasetService().make_teacher_dataset(cfg, 0)
    assert len(dataset) == 16
    assert dataset.teacher.n_params == 24
    assert np.all((dataset.y >= 0.0) & (dataset.y <= 1.0))
    features = dataset.features_matrix()
    assert features.shape == (16, 2)
    assert np.all(np.abs(features) <= math.pi)


def test_teacher_dataset_cache():
    cfg = _small_cfg()
    service = DatasetService()
    first = service.make_teacher_dataset(cfg, 5)
    assert service.make_teacher_dataset(cfg, 5) is first
    # 学生侧配置不影响数据集
    assert service.make_teacher_dataset(cfg.with_overrides(optimizer="gd"), 5) is first
    assert service.make_teacher_dataset(cfg, 6) is not first
    service.clear_cache()
    assert service.make_teacher_dataset(cfg, 5) is not first


def test_encoding_only_teacher():
    """teacher_depth = 0：标签就是只有编码线路时的输出概率"""
    cfg = _small_cfg(teacher_depth=0, n_points=5)
    xs, y = make_teacher_dataset(cfg, 9)
    expected = [
        born_probability(apply_circuit(zero_state(2), encode(x, 2)), all_ones_index(2)) for x in xs
    ]
    assert_allclose(y, expected, atol=1e-12)


def test_different_seeds_give_different_datasets():
    cfg = _small_cfg()
    service = DatasetService()
    a = service.make_teacher_dataset(cfg, 1)
    b = service.make_teacher_dataset(cfg, 2)
    assert not np.array_equal(a.y, b.y)


# ============================================================
# 训练
# ============================================================

def test_train_record_count():
    cfg = _small_cfg(steps=3)
    records = _engine().train(cfg, cfg.master_seed)
    assert [r.step for r in records] == [0, 1, 2, 3]
    assert all(r.status == "ok" and math.isfinite(r.loss) for r in records)
    assert {r.config_hash for r in records} == {cfg.config_hash()}


def test_train_single_step():
    """T = 1：初始损失 + 一次更新后的损失"""
    cfg = _small_cfg(steps=1)
    records = _engine().train(cfg, 0)
    assert [r.step for r in records] == [0, 1]


@pytest.mark.parametrize("optimizer", ["gd", "adam", "algebraic"])
def test_train_shot_budget(optimizer):
    """优化消耗 T·(N + 2NP)·S 次测量，最终评估另计 N·S 次"""
    cfg = _small_cfg(optimizer=optimizer, steps=2, shots=10)
    engine = _engine()
    engine.train(cfg, 0)
    n, p = cfg.n_points, cfg.n_params
    assert engine.last_shot_usage.optimization == 2 * (n + 2 * n * p) * 10
    assert engine.last_shot_usage.expected_optimization == engine.last_shot_usage.optimization
    assert engine.last_shot_usage.evaluation == n * 10


def test_train_exact_mode_uses_no_shots():
    engine = _engine()
    engine.train(_small_cfg(shots=EXACT), 0)
    assert engine.last_shot_usage.optimization == 0
    assert engine.last_shot_usage.expected_optimization is None


def test_gd_zero_learning_rate_keeps_loss():
    cfg = _small_cfg(optimizer="gd", eta=0.0, shots=EXACT, steps=4)
    losses = [r.loss for r in _engine().train(cfg, 0)]
    assert_allclose(losses, losses[0], rtol=0, atol=0)


def test_train_deterministic():
    cfg = _small_cfg()
    a = _engine().train(cfg, 7)
    b = _engine().train(cfg, 7)
    assert _strip_time(a) == _strip_time(b)


def test_train_seeds_differ():
    cfg = _small_cfg()
    engine = _engine()
    a = engine.train(cfg, 1)
    b = engine.train(cfg, 2)
    assert a[0].loss != b[0].loss


def test_algebraic_reduces_loss_exact():
    cfg = _small_cfg(shots=EXACT, steps=5, student_depth=2, teacher_depth=2, n_points=6)
    records = _engine().train(cfg, 0)
    assert records[-1].loss < records[0].loss


@pytest.mark.parametrize("mode", ["probability", "logit"])
def test_train_bce_modes(mode):
    cfg = _small_cfg(loss_kind="bce", algebraic_mode=mode)
    records = _engine().train(cfg, 0)
    assert len(records) == cfg.steps + 1
    assert all(math.isfinite(r.loss) and r.loss > 0 for r in records)


def test_train_with_dephasing():
    cfg = _small_cfg(p_deph=0.1, shots=EXACT)
    records = _engine().train(cfg, 0)
    assert all(math.isfinite(r.loss) for r in records)


def test_train_abort_produces_diagnostic_record(monkeypatch):
    """非有限值中止本次运行，以一条 aborted 记录结束"""
    calls = {"n": 0}
    real_jacobian = bench_engine.jacobian

    def flaky_jacobian(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise NumericError("Jacobian 含有非有限值")
        return real_jacobian(*args, **kwargs)

    monkeypatch.setattr(bench_engine, "jacobian", flaky_jacobian)
    cfg = _small_cfg(steps=4)
    records = _engine().train(cfg, 0)
    assert [r.status for r in records] == ["ok", "ok", STATUS_ABORTED]
    assert records[-1].step == 1
    assert math.isnan(records[-1].loss)
    assert "Jacobian" in records[-1].message
    assert final_losses(records) == {}


def test_ensemble_continues_after_abort(monkeypatch):
    real_jacobian = bench_engine.jacobian
    state = {"n": 0}

    def first_run_fails(*args, **kwargs):
        state["n"] += 1
        if state["n"] == 1:
            raise NumericError("非有限值")
        return real_jacobian(*args, **kwargs)

    monkeypatch.setattr(bench_engine, "jacobian", first_run_fails)
    cfg = _small_cfg(ensemble_size=2, steps=2)
    records = _engine().run_ensemble(cfg)
    aborted = [r for r in records if r.status == STATUS_ABORTED]
    assert len(aborted) == 1 and aborted[0].seed == cfg.master_seed
    assert list(final_losses(records)) == [cfg.master_seed + 1]


# ============================================================
# 集合
# ============================================================

def test_ensemble_record_count_and_seeds():
    cfg = _small_cfg(ensemble_size=3, steps=2)
    records = _engine().run_ensemble(cfg)
    assert len(records) == 3 * (2 + 1)
    assert sorted({r.seed for r in records}) == [3, 4, 5]


def test_ensemble_of_one_matches_train():
    cfg = _small_cfg(ensemble_size=1)
    engine = _engine()
    assert _strip_time(engine.run_ensemble(cfg)) == _strip_time(engine.train(cfg, cfg.master_seed))


def test_ensemble_deterministic():
    cfg = _small_cfg()
    assert _strip_time(_engine().run_ensemble(cfg)) == _strip_time(_engine().run_ensemble(cfg))


def test_ensemble_statistics_by_hand():
    """2 个种子、2 步的手算均值与总体标准差"""
    records = [
        RunRecord(0, "gd", 0, 1.0, 0.0, "h"),
        RunRecord(0, "gd", 1, 0.5, 0.0, "h"),
        RunRecord(1, "gd", 0, 3.0, 0.0, "h"),
        RunRecord(1, "gd", 1, 0.25, 0.0, "h"),
    ]
    stats = ensemble_statistics(records)
    assert list(stats['step']) == [0, 1]
    assert_allclose(stats['mean'], [2.0, 0.375])
    assert_allclose(stats['std'], [1.0, 0.125])
    assert list(stats['count']) == [2, 2]
    assert mean_loss_curve(records) == [2.0, 0.375]
    assert mean_loss_at_step(records, 1) == pytest.approx(0.375)
    assert final_losses(records) == {0: 0.5, 1: 0.25}


def test_compare_optimizers_share_dataset_and_seeds():
    cfg = _small_cfg(shots=EXACT, steps=2)
    results = _engine().compare_optimizers(cfg)
    assert list(results) == ["gd", "adam", "algebraic"]
    # 同一数据集、同一初始化：第 0 步损失相同
    initial = {name: [r.loss for r in recs if r.step == 0] for name, recs in results.items()}
    assert initial["gd"] == initial["adam"] == initial["algebraic"]
    assert all(r.optimizer == name for name, recs in results.items() for r in recs)


# ============================================================
# 扫描
# ============================================================

def test_loglog_fit():
    xs = [10, 100, 1000, 10000]
    slope, intercept = loglog_fit(xs, [3.0 / x for x in xs])
    assert slope == pytest.approx(-1.0)
    assert intercept == pytest.approx(math.log(3.0))
    assert all(math.isnan(v) for v in loglog_fit([10], [1.0]))


def test_sweep_shots_identical_values():
    cfg = _small_cfg(steps=2)
    summary = _engine().sweep_shots(cfg, [50, 50])
    assert summary.values == [50, 50]
    assert summary.final_loss_mean[0] == summary.final_loss_mean[1]
    assert summary.final_loss_std[0] == summary.final_loss_std[1]
    assert math.isnan(summary.loglog_slope)


def test_sweep_shots_forces_mse_and_single_shot():
    cfg = _small_cfg(loss_kind="bce", steps=2)
    summary = _engine().sweep_shots(cfg, [1, 1000])
    assert all(math.isfinite(v) for v in summary.final_loss_mean)
    assert math.isfinite(summary.loglog_slope)
    assert list(summary.to_frame().columns) == ["value", "final_loss_mean", "final_loss_std"]
    assert set(summary.loss_curves) == {"1", "1000"}


def test_sweep_validation():
    engine = _engine()
    cfg = _small_cfg()
    with pytest.raises(ConfigError):
        engine.sweep_shots(cfg, [])
    with pytest.raises(ConfigError):
        engine.sweep_shots(cfg, [0, 10])
    with pytest.raises(ConfigError):
        engine.sweep_dephasing(cfg, [0.1, 1.5])


def test_sweep_dephasing_zero_matches_noiseless():
    cfg = _small_cfg(steps=2)
    engine = _engine()
    summary = engine.sweep_dephasing(cfg, [0.0, 1.0])
    noiseless = engine.run_ensemble(cfg.with_overrides(shots=EXACT, p_deph=0.0))
    expected = np.mean(list(final_losses(noiseless).values()))
    assert summary.final_loss_mean[0] == pytest.approx(expected, abs=1e-12)
    assert math.isfinite(summary.final_loss_mean[1])
    assert summary.sweep_variable == "p_deph"


# ============================================================
# 长时间基准实验
# ============================================================

@pytest.mark.slow
def test_realizable_self_distillation():
    """教师与学生结构相同、无噪声：20 步内 MSE < 1e-4 的种子不少于 8/10"""
    cfg = ExperimentConfig(
        teacher_depth=3, student_depth=3, shots=EXACT, steps=20, optimizer="algebraic",
    ).validate()
    finals = final_losses(_engine().run_ensemble(cfg))
    assert sum(v < 1e-4 for v in finals.values()) >= 8


@pytest.mark.slow
def test_shot_scaling_slope():
    cfg = ExperimentConfig(optimizer="algebraic").validate()
    summary = _engine().sweep_shots(cfg, [10, 100, 1000, 10000])
    assert -1.3 <= summary.loglog_slope <= -0.7


@pytest.mark.slow
@pytest.mark.parametrize("loss_kind", ["mse", "bce"])
def test_convergence_speed_ordering(loss_kind):
    cfg = ExperimentConfig(shots=1000, loss_kind=loss_kind).validate()
    results = _engine().compare_optimizers(cfg)
    assert mean_loss_at_step(results["algebraic"], 5) < mean_loss_at_step(results["gd"], 50)
    algebraic_final = np.mean(list(final_losses(results["algebraic"]).values()))
    adam_final = np.mean(list(final_losses(results["adam"]).values()))
    assert algebraic_final <= adam_final


@pytest.mark.slow
def test_dephasing_degradation_trend():
    cfg = ExperimentConfig(optimizer="algebraic").validate()
    engine = _engine()
    summary = engine.sweep_dephasing(cfg, [0.0, 0.02, 0.05, 0.1, 0.2])
    means = summary.final_loss_mean
    assert all(a <= b for a, b in zip(means, means[1:]))
    noiseless = engine.run_ensemble(cfg.with_overrides(shots=EXACT, p_deph=0.0))
    expected = np.mean(list(final_losses(noiseless).values()))
    assert means[0] == pytest.approx(expected, abs=1e-12)
