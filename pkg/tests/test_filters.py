import numpy as np
import pytest

from mfris.channel import build_channels
from mfris.config import ScenarioConfig
from mfris.filters import (build_quotient_matrices, generalized_rayleigh_argmax,
                           optimal_filters)
from mfris.geometry import SPACES, sample_geometry
from mfris.metrics import TransmitDesign, sensing_sinr_scalar
from mfris.ris import random_feasible


def quotient(x, A, B):
    return float(np.real(x.conj() @ A @ x) / np.real(x.conj() @ B @ x))


def random_pair(rng, n):
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = X + X.conj().T
    Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    B = Y @ Y.conj().T + 0.5 * np.eye(n)
    return A, B


def test_diagonal_case():
    x = generalized_rayleigh_argmax(np.diag([2.0, 1.0]).astype(complex),
                                    np.eye(2, dtype=complex), p=1.0)
    assert abs(x[0]) == pytest.approx(1.0, abs=1e-12)
    assert abs(x[1]) == pytest.approx(0.0, abs=1e-12)


def test_beats_random_sampling():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4):
        A, B = random_pair(rng, n)
        x_star = generalized_rayleigh_argmax(A, B)
        best = quotient(x_star, A, B)
        samples = rng.standard_normal((10_000, n)) + 1j * rng.standard_normal((10_000, n))
        for s in samples:
            assert best >= quotient(s, A, B) - 1e-9


def test_scaling_invariance():
    rng = np.random.default_rng(1)
    A, B = random_pair(rng, 4)
    x1 = generalized_rayleigh_argmax(A, B)
    x2 = generalized_rayleigh_argmax(3.0 * A, B)
    # direction unchanged (canonical phase makes the comparison direct)
    assert np.allclose(x1, x2, atol=1e-9)
    assert quotient(x2, 3.0 * A, B) == pytest.approx(3.0 * quotient(x1, A, B),
                                                     rel=1e-10)


def test_norm_constraint_respected():
    rng = np.random.default_rng(2)
    A, B = random_pair(rng, 5)
    x = generalized_rayleigh_argmax(A, B, p=2.5)
    assert np.linalg.norm(x) == pytest.approx(2.5, rel=1e-12)


def test_rejects_singular_denominator():
    A = np.eye(3, dtype=complex)
    B = np.diag([1.0, 1.0, 0.0]).astype(complex)
    with pytest.raises(np.linalg.LinAlgError):
        generalized_rayleigh_argmax(A, B)


def test_optimality_certificate():
    # the attained quotient equals the top eigenvalue of the symmetric reduction
    rng = np.random.default_rng(3)
    A, B = random_pair(rng, 6)
    x = generalized_rayleigh_argmax(A, B)
    vals, vecs = np.linalg.eigh(B)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    reduced = inv_sqrt @ A @ inv_sqrt
    top = np.linalg.eigvalsh(0.5 * (reduced + reduced.conj().T))[-1]
    assert quotient(x, A, B) == pytest.approx(top, rel=1e-9)


def small_state(seed=0):
    cfg = ScenarioConfig(n_tx=4, m_elems=8, m_sense=4, users_r=1, users_t=1,
                         targets_r=1, targets_t=1)
    rng = np.random.default_rng(seed)
    geom = sample_geometry(cfg, rng)
    channels = build_channels(geom, cfg, rng)
    ris = random_feasible("ES", cfg.m_elems, cfg.beta_max, rng)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    F = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    return cfg, channels, ris, TransmitDesign(W=W, F=F)


def test_quotient_matrices_match_scalar_sinr():
    cfg, channels, ris, tx = small_state()
    rng = np.random.default_rng(9)
    for d in SPACES:
        signal, noise = build_quotient_matrices(d, channels, ris, tx, cfg)
        m = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        m = m / np.linalg.norm(m)
        from mfris.metrics import SensingFilters
        filters = SensingFilters(m_r=m, m_t=m)
        direct = sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
        assert quotient(m, signal, noise) == pytest.approx(direct, rel=1e-10)


def test_quotient_matrices_zero_tx():
    cfg, channels, ris, _ = small_state()
    zero = TransmitDesign(np.zeros((4, 2)), np.zeros((4, 4)))
    signal, noise = build_quotient_matrices("r", channels, ris, zero, cfg)
    assert np.all(signal == 0.0)
    eigs = np.linalg.eigvalsh(noise)
    assert eigs.min() >= cfg.noise_sense_w * (1 - 1e-12)


def test_optimal_filters_norm_and_dominance():
    cfg, channels, ris, tx = small_state(seed=4)
    filters = optimal_filters(channels, ris, tx, cfg)
    rng = np.random.default_rng(11)
    for d in SPACES:
        assert np.linalg.norm(filters.filter(d)) ** 2 == pytest.approx(
            cfg.p_sense, rel=1e-10)
        assert not filters.degenerate[d]
    best = sum(sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
               for d in SPACES)
    from mfris.metrics import SensingFilters
    for _ in range(1000):
        m_r = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        m_t = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        cand = SensingFilters(
            m_r=np.sqrt(cfg.p_sense) * m_r / np.linalg.norm(m_r),
            m_t=np.sqrt(cfg.p_sense) * m_t / np.linalg.norm(m_t))
        value = sum(sensing_sinr_scalar(d, channels, ris, tx, cand, cfg)
                    for d in SPACES)
        assert value <= best + 1e-9 * max(1.0, best)


def test_optimal_filters_separability():
    # re-optimizing the reflection filter never moves the refraction SINR
    cfg, channels, ris, tx = small_state(seed=6)
    filters = optimal_filters(channels, ris, tx, cfg)
    tampered = optimal_filters(channels, ris, tx, cfg)
    tampered.m_r = np.sqrt(cfg.p_sense) * np.eye(cfg.m_sense)[:, 0].astype(complex)
    before = sensing_sinr_scalar("t", channels, ris, tx, filters, cfg)
    after = sensing_sinr_scalar("t", channels, ris, tx, tampered, cfg)
    assert before == pytest.approx(after, rel=1e-14)


def test_degenerate_zero_tx_flagged():
    cfg, channels, ris, _ = small_state(seed=7)
    zero = TransmitDesign(np.zeros((4, 2)), np.zeros((4, 4)))
    filters = optimal_filters(channels, ris, zero, cfg)
    for d in SPACES:
        assert filters.degenerate[d]
        assert np.linalg.norm(filters.filter(d)) ** 2 == pytest.approx(cfg.p_sense)


def test_filter_phase_invariance_of_quotient():
    cfg, channels, ris, tx = small_state(seed=8)
    filters = optimal_filters(channels, ris, tx, cfg)
    rotated_m = filters.m_r * np.exp(1j * 0.9)
    from mfris.metrics import SensingFilters
    rotated = SensingFilters(m_r=rotated_m, m_t=filters.m_t)
    a = sensing_sinr_scalar("r", channels, ris, tx, filters, cfg)
    b = sensing_sinr_scalar("r", channels, ris, tx, rotated, cfg)
    assert a == pytest.approx(b, rel=1e-12)
