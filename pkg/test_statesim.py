"""
量子态模拟模块测试
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from statesim import (
    DensityMatrix, Gate, GateKind, StateVector,
    all_ones_index, apply_circuit, apply_gate, apply_gate_dm, born_probability,
    circuit_unitary, cnot, dephase, dephase_all, dephasing_mask, gate_operator, pauli_z, rx, ry,
    zero_density_matrix, zero_state,
)
from utils import ConfigError, UsageError


def _random_gates(rng, n_gates=12):
    gates = []
    for _ in range(n_gates):
        choice = rng.integers(3)
        q = int(rng.integers(2))
        if choice == 0:
            gates.append(rx(rng.uniform(-math.pi, math.pi), q))
        elif choice == 1:
            gates.append(ry(rng.uniform(-math.pi, math.pi), q))
        else:
            gates.append(cnot(q, 1 - q))
    return gates


def test_zero_state():
    """|00⟩ 只有下标 0 的振幅为 1"""
    psi = zero_state(2)
    assert_allclose(psi.amplitudes, [1, 0, 0, 0])
    assert psi.norm() == pytest.approx(1.0)


def test_rx_pi_flips_qubit():
    """Rx(π) 作用于比特 0：|00⟩ -> -i|10⟩，比特 0 是最高位"""
    psi = apply_gate(zero_state(2), rx(math.pi, 0))
    assert_allclose(psi.amplitudes, [0, 0, -1j, 0], atol=1e-15)
    assert born_probability(psi, 2) == pytest.approx(1.0)


def test_ry_half_angle():
    """Ry(π/2)|0⟩ 两个基矢概率各 1/2"""
    psi = apply_gate(zero_state(1), ry(math.pi / 2, 0))
    assert_allclose(psi.probabilities(), [0.5, 0.5], atol=1e-15)


def test_cnot_permutation():
    """CNOT(0->1)|10⟩ = |11⟩，控制位为 0 时不变"""
    psi = StateVector(2, [0, 0, 1, 0])
    assert_allclose(apply_gate(psi, cnot(0, 1)).amplitudes, [0, 0, 0, 1])
    psi = StateVector(2, [0, 1, 0, 0])
    assert_allclose(apply_gate(psi, cnot(0, 1)).amplitudes, [0, 1, 0, 0])


def test_gate_operators_unitary():
    for gate in [rx(0.3, 0), ry(-1.2, 1), cnot(1, 0), pauli_z(0)]:
        op = gate_operator(gate, 2)
        assert_allclose(op @ op.conj().T, np.eye(4), atol=1e-12)


def test_gate_validation():
    with pytest.raises(UsageError):
        Gate(GateKind.CNOT, target=1)
    with pytest.raises(UsageError):
        cnot(1, 1)
    with pytest.raises(UsageError):
        apply_gate(zero_state(2), rx(0.1, 2))


def test_n_qubits_validation():
    with pytest.raises(ConfigError):
        zero_state(0)
    with pytest.raises(ConfigError):
        zero_state(64)


def test_statevector_norm_preserved():
    """随机线路保持范数，概率和为 1"""
    rng = np.random.default_rng(7)
    for _ in range(10):
        psi = apply_circuit(zero_state(2), _random_gates(rng))
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)
        assert psi.probabilities().sum() == pytest.approx(1.0, abs=1e-12)


def test_density_matrix_matches_statevector():
    """无噪声时密度矩阵路径与纯态路径一致"""
    rng = np.random.default_rng(11)
    for _ in range(10):
        gates = _random_gates(rng)
        psi = apply_circuit(zero_state(2), gates)
        rho = apply_circuit(zero_density_matrix(2), gates)
        assert isinstance(rho, DensityMatrix)
        assert_allclose(rho.elements, psi.to_density_matrix().elements, atol=1e-12)
        assert born_probability(rho, 3) == pytest.approx(born_probability(psi, 3), abs=1e-12)


def test_apply_gate_dm_properties():
    rng = np.random.default_rng(3)
    rho = zero_density_matrix(2)
    for gate in _random_gates(rng, 20):
        rho = apply_gate_dm(rho, gate)
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    assert rho.is_hermitian()
    assert rho.eigenvalues().min() >= -1e-10


def test_dephase_zero_is_identity():
    rho = apply_circuit(zero_density_matrix(2), [ry(0.7, 0), rx(1.1, 1), cnot(0, 1)])
    assert_allclose(dephase(rho, 0, 0.0).elements, rho.elements, atol=0)


def test_dephase_half_kills_coherence():
    """p = 1/2 时 |+⟩⟨+| 的非对角元归零，对角元不变"""
    plus = apply_circuit(zero_density_matrix(1), [ry(math.pi / 2, 0)])
    out = dephase(plus, 0, 0.5)
    assert_allclose(out.elements, np.diag([0.5, 0.5]), atol=1e-15)


def test_dephase_full_flips_coherence_sign():
    """p = 1 等价于 Z 共轭：非对角元变号"""
    plus = apply_circuit(zero_density_matrix(1), [ry(math.pi / 2, 0)])
    out = dephase(plus, 0, 1.0)
    assert_allclose(out.elements, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)


@pytest.mark.parametrize("p", [0.02, 0.1, 0.5, 1.0])
def test_dephase_keeps_valid_state(p):
    """退相位保持迹、厄米性、半正定，且对角元不变"""
    rng = np.random.default_rng(5)
    rho = apply_circuit(zero_density_matrix(2), _random_gates(rng))
    out = dephase_all(rho, p)
    assert out.trace() == pytest.approx(1.0, abs=1e-12)
    assert out.is_hermitian()
    assert out.eigenvalues().min() >= -1e-10
    assert_allclose(out.probabilities(), rho.probabilities(), atol=1e-12)


def test_dephase_rejects_bad_probability():
    with pytest.raises(ConfigError, match="p_deph"):
        dephase(zero_density_matrix(2), 0, 1.5)
    with pytest.raises(ConfigError):
        dephase(zero_density_matrix(2), 0, -0.1)


def test_born_probability_bounds():
    psi = zero_state(2)
    assert born_probability(psi, all_ones_index(2)) == 0.0
    with pytest.raises(UsageError):
        born_probability(psi, 4)
    with pytest.raises(UsageError):
        born_probability(psi, -1)


def test_all_ones_index():
    assert all_ones_index(2) == 3
    assert all_ones_index(3) == 7


def test_ry_pi_on_density_matrix():
    """Ry(π)|0⟩⟨0|Ry(π)† = |1⟩⟨1|"""
    rho = apply_gate_dm(zero_density_matrix(1), ry(math.pi, 0))
    assert_allclose(rho.elements, [[0, 0], [0, 1]], atol=1e-15)


def test_basis_state_is_dephasing_fixed_point():
    one = DensityMatrix(1, [[0, 0], [0, 1]])
    assert_allclose(dephase(one, 0, 0.3).elements, one.elements, atol=0)


def test_gate_application_matches_full_operator():
    """按比特轴作用与完整酉矩阵乘法一致（3 比特，含非相邻 CNOT）"""
    rng = np.random.default_rng(17)
    psi = apply_circuit(zero_state(3), [ry(0.4, 0), rx(1.3, 1), ry(-0.8, 2)])
    rho = psi.to_density_matrix()
    for gate in [rx(0.9, 2), ry(-2.1, 1), cnot(0, 2), cnot(2, 1), pauli_z(1),
                 rx(rng.uniform(-3, 3), 0)]:
        op = gate_operator(gate, 3)
        assert_allclose(apply_gate(psi, gate).amplitudes, op @ psi.amplitudes, atol=1e-12)
        assert_allclose(apply_gate_dm(rho, gate).elements, op @ rho.elements @ op.conj().T, atol=1e-12)


def test_circuit_unitary_matches_gate_sequence():
    gates = _random_gates(np.random.default_rng(23))
    psi = apply_circuit(zero_state(2), gates)
    assert_allclose(circuit_unitary(gates, 2)[:, 0], psi.amplitudes, atol=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.1, 0.5, 1.0])
def test_dephase_matches_z_conjugation(p):
    """(1 - p)ρ + p ZρZ† 直接按矩阵计算"""
    rho = apply_circuit(zero_density_matrix(2), _random_gates(np.random.default_rng(29)))
    for q in range(2):
        z = gate_operator(pauli_z(q), 2)
        expected = (1 - p) * rho.elements + p * z @ rho.elements @ z.conj().T
        assert_allclose(dephase(rho, q, p).elements, expected, atol=1e-12)


def test_dephasing_mask_composes_all_qubits():
    rho = apply_circuit(zero_density_matrix(2), _random_gates(np.random.default_rng(31)))
    mask = dephasing_mask(2, 0.2)
    assert_allclose(rho.elements * mask, dephase_all(rho, 0.2).elements, atol=1e-12)
    assert_allclose(np.diag(mask), 1.0)
    assert mask[0, 3] == pytest.approx(0.6 ** 2)


def test_hermiticity_tolerance_from_config():
    skew = DensityMatrix(1, [[0.5, 0.5 + 1e-9], [0.5, 0.5]])
    assert not skew.is_hermitian()
    assert skew.is_hermitian(atol=1e-6)
