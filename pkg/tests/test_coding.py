import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prmimo.channel import (
    ChannelGenConfig,
    ChannelTensor,
    PolarizationConfig,
    effective_channel,
    generate_channel,
    realization_rng,
)
from prmimo.coding import (
    CodingError,
    WaterfillingAllocation,
    capacity,
    channel_capacity,
    jensen_capacity_bound,
    joint_coding,
    joint_coding_batch,
    optimal_polarization,
    rx_pd_matrix,
    tx_pd_matrix,
    waterfill,
    waterfill_capacity,
)

from .conftest import crandn


def _tensor(rng, n_r=2, n_t=2):
    return ChannelTensor(crandn(rng, n_r, n_t, 2, 2))


def _quad(m, theta):
    p = np.array([math.cos(theta), math.sin(theta)])
    return float((p @ m @ p).real)


# -- determinant matrices ---------------------------------------------------

def test_tx_pd_single_rx_vertical(rng):
    t = _tensor(rng, 1, 3)
    ev = np.array([1.0, 0.0])
    for j in range(3):
        h = t.blocks[0, j]
        np.testing.assert_allclose(tx_pd_matrix(t, [0.0], j).matrix, h.conj().T @ np.outer(ev, ev) @ h)


def test_rx_pd_single_tx_vertical(rng):
    t = _tensor(rng, 3, 1)
    ev = np.array([1.0, 0.0])
    for i in range(3):
        h = t.blocks[i, 0]
        np.testing.assert_allclose(rx_pd_matrix(t, [0.0], i).matrix, h @ np.outer(ev, ev) @ h.conj().T)


def test_pd_of_zero_tensor_is_zero():
    t = ChannelTensor(np.zeros((2, 2, 2, 2)))
    assert not np.any(tx_pd_matrix(t, [0.3, 0.1], 1).matrix)
    assert not np.any(rx_pd_matrix(t, [0.3, 0.1], 0).matrix)


def test_pd_index_errors(rng):
    t = _tensor(rng)
    with pytest.raises(CodingError):
        tx_pd_matrix(t, [0.0, 0.0], 2)
    with pytest.raises(CodingError):
        rx_pd_matrix(t, [0.0, 0.0], -1)
    with pytest.raises(CodingError):
        tx_pd_matrix(t, [0.0], 0)


def test_pd_quadratic_forms_give_column_and_row_sums(rng):
    for _ in range(50):
        t = _tensor(rng, 3, 4)
        tx, rx = rng.uniform(-3, 3, 4), rng.uniform(-3, 3, 3)
        h = effective_channel(t, PolarizationConfig(tx, rx, canonical=False))
        for j in range(4):
            m = tx_pd_matrix(t, rx, j).matrix
            np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
            assert np.linalg.eigvalsh(m).min() >= -1e-10
            assert _quad(m, tx[j]) == pytest.approx(np.sum(np.abs(h[:, j]) ** 2), rel=1e-10)
        for i in range(3):
            m = rx_pd_matrix(t, tx, i).matrix
            assert _quad(m, rx[i]) == pytest.approx(np.sum(np.abs(h[i]) ** 2), rel=1e-10)


def test_column_decomposition_identity(rng):
    for _ in range(200):
        n_r, n_t = rng.integers(1, 5, size=2)
        t = _tensor(rng, n_r, n_t)
        tx, rx = rng.uniform(-3, 3, n_t), rng.uniform(-3, 3, n_r)
        h = effective_channel(t, PolarizationConfig(tx, rx))
        s2 = np.linalg.svd(h, compute_uv=False) ** 2
        total = sum(_quad(tx_pd_matrix(t, rx, j).matrix, tx[j]) for j in range(n_t))
        assert total == pytest.approx(s2.sum(), rel=1e-9)


# -- optimal polarization ----------------------------------------------------

@pytest.mark.parametrize("m, expected", [
    (np.diag([1.0, 4.0]), -math.pi / 2),       # pi/2 reduced into [-pi/2, pi/2)
    (np.array([[2.0, 1.0], [1.0, 2.0]]), math.pi / 4),
    (np.eye(2), 0.0),
])
def test_optimal_polarization_examples(m, expected):
    assert optimal_polarization(m) == pytest.approx(expected)


def test_optimal_polarization_beats_fine_grid(rng):
    grid = np.deg2rad(np.arange(0.0, 180.0, 0.1))
    for _ in range(30):
        a = crandn(rng, 2, 2)
        m = a @ a.conj().T
        best = optimal_polarization(m)
        assert _quad(m, best) >= max(_quad(m, g) for g in grid) - 1e-12


# -- waterfilling --------------------------------------------------------------

def test_waterfill_single_mode():
    a = waterfill([1.0], 1.0, 10.0)
    np.testing.assert_allclose(a.powers, [10.0])
    assert a.threshold == pytest.approx(11.0)


def test_waterfill_symmetric():
    np.testing.assert_allclose(waterfill([1.0, 1.0], 1.0, 10.0).powers, [5.0, 5.0])


def test_waterfill_inactive_mode():
    a = waterfill([2.0, 0.5], 1.0, 1.0)
    np.testing.assert_allclose(a.powers, [1.0, 0.0])
    assert a.threshold == pytest.approx(1.5)


def test_waterfill_rejects_all_zero():
    with pytest.raises(CodingError):
        waterfill([0.0, 0.0], 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8),
       st.floats(1e-3, 1e4), st.floats(0.1, 10.0))
def test_waterfill_kkt(g, total, noise):
    a = waterfill(g, noise, total)
    p = a.powers
    assert p.sum() == pytest.approx(total, rel=1e-9)
    expected = np.maximum(0.0, a.threshold - noise / np.asarray(g))
    np.testing.assert_allclose(p, expected, rtol=1e-9, atol=1e-9 * total)
    # vectorized path agrees
    assert waterfill_capacity(np.array([g]), np.array([total]), noise)[0] == pytest.approx(
        capacity(g, a), rel=1e-10, abs=1e-12)


def _capacity_oracle(h, snr_db):
    # independent brute-force active-set search
    g = np.sort(np.linalg.svd(h, compute_uv=False) ** 2)[::-1]
    p_tot = 10 ** (snr_db / 10)
    best = 0.0
    for r in range(1, len(g) + 1):
        if g[r - 1] <= 0:
            break
        mu = (p_tot + np.sum(1 / g[:r])) / r
        p = mu - 1 / g[:r]
        if np.all(p >= 0):
            best = max(best, float(np.sum(np.log2(1 + p * g[:r]))))
    return best


def test_capacity_examples():
    zero = WaterfillingAllocation(np.zeros(2), 1.0, 1.0, 1.0)
    assert capacity([1.0, 2.0], zero) == 0.0
    assert capacity([1.0], waterfill([1.0], 1.0, 3.0)) == pytest.approx(2.0)


def test_channel_capacity_matches_oracle(rng):
    for _ in range(100):
        h = crandn(rng, 2, 2)
        assert float(channel_capacity(h, 30.0)) == pytest.approx(_capacity_oracle(h, 30.0), rel=1e-10)
    h = crandn(rng, 50, 3, 4)
    np.testing.assert_allclose(channel_capacity(h, 5.0), [_capacity_oracle(m, 5.0) for m in h], rtol=1e-10)


def test_jensen_bound():
    a = waterfill([1.0, 1.0], 1.0, 10.0)
    assert jensen_capacity_bound([1.0, 1.0], 1.0, a.threshold) == pytest.approx(capacity([1.0, 1.0], a))
    a = waterfill([4.0, 1.0], 1.0, 1000.0)
    assert jensen_capacity_bound([4.0, 1.0], 1.0, a.threshold) >= capacity([4.0, 1.0], a)
    a = waterfill([3.0], 1.0, 7.0)
    assert jensen_capacity_bound([3.0], 1.0, a.threshold) == pytest.approx(capacity([3.0], a))
    a = waterfill([2.0, 0.5], 1.0, 1.0)
    with pytest.raises(CodingError):
        jensen_capacity_bound([2.0, 0.5], 1.0, a.threshold)


# -- joint coding --------------------------------------------------------------

def _joint_oracle(t, iterations):
    # plain loops over elements with eigh on the real part
    tx, rx = np.zeros(t.n_t), np.zeros(t.n_r)

    def best(m):
        w, v = np.linalg.eigh(m.real)
        if abs(w[1] - w[0]) < 1e-12:
            return 0.0
        return math.atan2(v[1, 1], v[0, 1])

    for _ in range(iterations):
        tx = np.array([best(tx_pd_matrix(t, rx, j).matrix) for j in range(t.n_t)])
        rx = np.array([best(rx_pd_matrix(t, tx, i).matrix) for i in range(t.n_r)])
    return tx, rx


def test_joint_coding_matches_loop_oracle(rng):
    for _ in range(30):
        t = _tensor(rng, *rng.integers(1, 5, size=2))
        res = joint_coding(t, 5, tolerance=None)
        tx, rx = _joint_oracle(t, 5)
        np.testing.assert_allclose(np.sin(2 * res.final_config.tx_angles), np.sin(2 * tx), atol=1e-9)
        np.testing.assert_allclose(np.cos(2 * res.final_config.rx_angles), np.cos(2 * rx), atol=1e-9)


def test_joint_coding_v_only_channel(rng):
    b = np.zeros((2, 2, 2, 2), dtype=complex)
    b[..., 0, 0] = crandn(rng, 2, 2)
    res = joint_coding(ChannelTensor(b), 5)
    assert res.converged and res.iterations_used == 1
    assert np.all(res.final_config.tx_angles == 0) and np.all(res.final_config.rx_angles == 0)


def test_joint_coding_h_only_channel(rng):
    b = np.zeros((2, 3, 2, 2), dtype=complex)
    b[..., 1, 1] = crandn(rng, 2, 3)
    res = joint_coding(ChannelTensor(b), 5)
    np.testing.assert_allclose(res.final_config.tx_angles, -math.pi / 2)
    np.testing.assert_allclose(res.final_config.rx_angles, -math.pi / 2)


def test_joint_coding_trace_monotone_and_final(rng):
    for _ in range(100):
        t = _tensor(rng, *rng.integers(1, 5, size=2))
        res = joint_coding(t, 8, tolerance=None)
        assert len(res.objective_trace) == 16
        assert np.all(np.diff(res.objective_trace) >= -1e-9)
        h = effective_channel(t, res.final_config)
        assert res.objective_trace[-1] == pytest.approx(np.sum(np.abs(h) ** 2), rel=1e-12)


def test_joint_coding_tolerance_mode_converges(rng):
    t = _tensor(rng, 3, 3)
    res = joint_coding(t, 200, tolerance=1e-6)
    assert res.converged and res.iterations_used < 200
    fixed = joint_coding(t, 5, tolerance=None)
    assert not fixed.converged and fixed.iterations_used == 5


def test_joint_coding_rejects_zero_iterations(rng):
    with pytest.raises(CodingError):
        joint_coding(_tensor(rng), 0)


def test_tx_sweep_is_coordinatewise_optimal(rng):
    grid = np.deg2rad(np.arange(0.0, 180.0, 0.1))
    for _ in range(10):
        t = _tensor(rng, 2, 3)
        _, _, _, _, trace = joint_coding_batch(t.blocks, 2, record=True)
        obj, tx, rx = trace[2]  # after the second Tx sweep
        for j in range(3):
            m = tx_pd_matrix(t, rx, j).matrix
            assert _quad(m, tx[j]) >= max(_quad(m, g) for g in grid) - 1e-10
        assert obj == pytest.approx(np.sum(np.abs(effective_channel(t, PolarizationConfig(tx, rx))) ** 2))


def test_joint_beats_random_in_median():
    caps_j, caps_r = [], []
    for k in range(1000):
        rng = realization_rng(77, k)
        t = generate_channel(ChannelGenConfig(2, 2), rng)
        j = joint_coding(t, 5, tolerance=None).final_config
        r = PolarizationConfig(rng.uniform(-np.pi, np.pi, 2), rng.uniform(-np.pi, np.pi, 2))
        caps_j.append(float(channel_capacity(effective_channel(t, j), 10.0)))
        caps_r.append(float(channel_capacity(effective_channel(t, r), 10.0)))
    assert np.median(caps_j) > np.median(caps_r)
