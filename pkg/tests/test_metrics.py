import numpy as np
import pytest

from mfris.channel import build_channels
from mfris.config import ScenarioConfig
from mfris.geometry import SPACES, sample_geometry
from mfris.metrics import (SensingFilters, TransmitDesign, audit, beampattern,
                           bs_power, comm_sinr, echo_objective, sensing_sinr_matrix,
                           sensing_sinr_scalar, user_rate)
from mfris.ris import RisConfiguration, random_feasible


def small_instance(seed=0, **overrides):
    cfg = ScenarioConfig(n_tx=4, m_elems=8, m_sense=4, users_r=1, users_t=1,
                         targets_r=1, targets_t=1, **overrides)
    rng = np.random.default_rng(seed)
    geom = sample_geometry(cfg, rng)
    channels = build_channels(geom, cfg, rng)
    ris = random_feasible("ES", cfg.m_elems, cfg.beta_max, rng)
    W = (rng.standard_normal((cfg.n_tx, cfg.users))
         + 1j * rng.standard_normal((cfg.n_tx, cfg.users)))
    F = (rng.standard_normal((cfg.n_tx, cfg.n_tx))
         + 1j * rng.standard_normal((cfg.n_tx, cfg.n_tx)))
    tx = TransmitDesign(W=W, F=F)
    m = rng.standard_normal(cfg.m_sense) + 1j * rng.standard_normal(cfg.m_sense)
    m = np.sqrt(cfg.p_sense) * m / np.linalg.norm(m)
    filters = SensingFilters(m_r=m, m_t=m.copy())
    return cfg, channels, ris, tx, filters


def test_bs_power_values():
    zero = TransmitDesign(np.zeros((4, 2)), np.zeros((4, 4)))
    assert bs_power(zero) == 0.0
    unit = TransmitDesign(np.eye(4)[:, :2], np.eye(4))
    assert bs_power(unit) == pytest.approx(6.0)
    rng = np.random.default_rng(1)
    W = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    F = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    direct = float(np.sum(np.abs(W) ** 2) + np.sum(np.abs(F) ** 2))
    assert bs_power(TransmitDesign(W, F)) == pytest.approx(direct, rel=1e-14)


def test_comm_sinr_zero_beamformer():
    cfg, channels, ris, tx, _ = small_instance()
    tx.W[:, 0] = 0.0
    assert comm_sinr(0, channels, ris, tx, cfg) == 0.0


def test_comm_sinr_scalar_instance_oracle():
    # hand-expanded formula on an M = N = 1, single-user instance
    cfg, channels, ris, tx, _ = small_instance()
    g = np.array([0.3 - 0.4j])
    theta = np.array([1.2 * np.exp(1j * 0.3)])
    h = np.array([[0.5 + 0.2j]])
    w = np.array([[0.7 - 0.1j]])
    f = np.array([[0.2 + 0.9j]])
    sig = abs(g.conj()[0] * theta[0] * h[0, 0] * w[0, 0]) ** 2
    interference = abs(g.conj()[0] * theta[0] * h[0, 0] * f[0, 0]) ** 2
    amplified = cfg.noise_ris_w * abs(g.conj()[0] * theta[0]) ** 2
    expected = sig / (interference + amplified + cfg.noise_user_w)

    class Tiny:
        bs_ris = h
        ris_user = [g]
        def user_space(self, k):
            return "r"

    ris1 = RisConfiguration("ES", theta, np.zeros(1, complex))
    got = comm_sinr(0, Tiny(), ris1, TransmitDesign(w, f), cfg)
    assert got == pytest.approx(expected, rel=1e-12)


def test_comm_sinr_global_phase_invariance():
    cfg, channels, ris, tx, _ = small_instance()
    base = [comm_sinr(k, channels, ris, tx, cfg) for k in range(cfg.users)]
    tx.W = tx.W * np.exp(1j * 1.234)
    rotated = [comm_sinr(k, channels, ris, tx, cfg) for k in range(cfg.users)]
    assert np.allclose(base, rotated, rtol=1e-12)


def test_rate_monotone_in_sinr():
    cfg, channels, ris, tx, _ = small_instance()
    r = user_rate(0, channels, ris, tx, cfg)
    tx2 = TransmitDesign(tx.W * 2.0, tx.F)
    # doubling the desired beamformer amplitude raises user 0's SINR here
    assert user_rate(0, channels, ris, tx2, cfg) != r


def test_sensing_sinr_zero_tx():
    cfg, channels, ris, _, filters = small_instance()
    zero = TransmitDesign(np.zeros((cfg.n_tx, cfg.users)),
                          np.zeros((cfg.n_tx, cfg.n_tx)))
    for d in SPACES:
        assert sensing_sinr_scalar(d, channels, ris, zero, filters, cfg) == 0.0


def test_sensing_sinr_filter_scale_invariance():
    cfg, channels, ris, tx, filters = small_instance()
    base = sensing_sinr_scalar("r", channels, ris, tx, filters, cfg)
    scaled = SensingFilters(m_r=filters.m_r * (2.0 - 1.5j), m_t=filters.m_t)
    assert sensing_sinr_scalar("r", channels, ris, tx, scaled, cfg) == pytest.approx(
        base, rel=1e-12)


def test_scalar_matrix_equivalence_random_instances():
    # the two closed forms of the echo SINR agree to 1e-10 relative
    for seed in range(50):
        cfg, channels, ris, tx, filters = small_instance(seed=seed)
        for d in SPACES:
            a = sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
            b = sensing_sinr_matrix(d, channels, ris, tx, filters, cfg)
            assert a == pytest.approx(b, rel=1e-10)


def test_covariance_matrices_hermitian_psd():
    from mfris.metrics import sensing_covariances
    cfg, channels, ris, tx, _ = small_instance(seed=3)
    for d in SPACES:
        signal, noise = sensing_covariances(d, channels, ris, tx, cfg)
        assert np.linalg.norm(signal - signal.conj().T) <= 1e-12 * np.linalg.norm(signal)
        eigs = np.linalg.eigvalsh(noise)
        assert eigs.min() >= cfg.noise_sense_w * (1 - 1e-10)
        assert np.linalg.eigvalsh(signal).min() >= -1e-10 * np.abs(signal).max()


def test_audit_flags_power_and_rate():
    cfg, channels, ris, tx, filters = small_instance()
    overdriven = TransmitDesign(tx.W * 1e6, tx.F * 1e6)
    report = audit(channels, ris, overdriven, filters, cfg)
    assert not report.ok
    assert any("BS power" in v for v in report.violations)


def test_beampattern_zero_tx_and_arity():
    cfg, channels, ris, _, _ = small_instance()
    zero = TransmitDesign(np.zeros((cfg.n_tx, cfg.users)),
                          np.zeros((cfg.n_tx, cfg.n_tx)))
    elev = np.arange(-90.0, 91.0, 1.0)
    azim = np.arange(0.0, 181.0, 2.0)
    maps = beampattern(ris, zero, channels, elev, azim)
    for d in SPACES:
        assert maps[d].shape == (181, 91)
        assert np.all(maps[d] == 0.0)


def test_beampattern_continuity_refinement():
    # adjacent cells on a fine grid differ by a vanishing fraction of the peak
    cfg, channels, ris, tx, _ = small_instance(seed=9)
    elev = np.arange(-20.0, 20.01, 0.25)
    azim = np.array([40.0])
    maps = beampattern(ris, tx, channels, elev, azim)
    gains = maps["r"][:, 0]
    step = np.abs(np.diff(gains)).max()
    assert step <= 0.05 * gains.max()


def test_echo_objective_sums_spaces():
    cfg, channels, ris, tx, filters = small_instance(seed=5)
    total = echo_objective(channels, ris, tx, filters, cfg)
    parts = sum(sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
                for d in SPACES)
    assert total == pytest.approx(parts, rel=1e-14)
