import itertools

import numpy as np
import pytest

from mfris.ao import find_feasible_start
from mfris.channel import build_channels
from mfris.config import ScenarioConfig
from mfris.conic import solve
from mfris.filters import optimal_filters
from mfris.geometry import SPACES, sample_geometry
from mfris.metrics import audit, comm_sinr, echo_objective
from mfris.ris import RisConfiguration, amplification_power, validate
from mfris.risopt import (build_ris_matrices, build_ris_socp, project_protocol,
                          solve_ris)
from mfris.txopt import update_auxiliaries


def make_state(seed=0, protocol="ES", **overrides):
    params = dict(n_tx=4, m_elems=8, m_sense=4, users_r=1, users_t=1,
                  targets_r=1, targets_t=1, protocol=protocol)
    params.update(overrides)
    cfg = ScenarioConfig(seed=seed, **params)
    rng = np.random.default_rng(seed)
    geom = sample_geometry(cfg, rng)
    channels = build_channels(geom, cfg, rng)
    tx, ris = find_feasible_start(channels, cfg)
    filters = optimal_filters(channels, ris, tx, cfg)
    aux = update_auxiliaries(channels, ris, tx, filters, cfg)
    return cfg, channels, ris, tx, filters, aux


def test_quadratic_form_identities():
    # the assembled forms reproduce the metric expressions exactly
    for seed in range(8):
        cfg, channels, ris, tx, filters, aux = make_state(seed=seed)
        mats = build_ris_matrices(channels, tx, filters, aux, cfg)
        rng = np.random.default_rng(seed + 100)
        for d in SPACES:
            theta = rng.standard_normal(cfg.m_elems) + 1j * rng.standard_normal(cfg.m_elems)
            probe = ris.copy()
            if d == "r":
                probe.theta_r = theta
            else:
                probe.theta_t = theta
            m = filters.filter(d)
            direct = float(np.sum(np.abs(
                (m.conj() @ channels.response(d)) * theta) ** 2))
            form = float(np.real(theta.conj() @ np.diag(mats.g_md[d]) @ theta))
            assert form == pytest.approx(direct, rel=1e-10)
        for k in range(cfg.users):
            d = channels.user_space(k)
            theta = rng.standard_normal(cfg.m_elems) + 1j * rng.standard_normal(cfg.m_elems)
            probe = ris.copy()
            if d == "r":
                probe.theta_r = theta
            else:
                probe.theta_t = theta
            direct = float(np.abs(
                (channels.ris_user[k].conj() * theta) @ channels.bs_ris
                @ tx.W[:, k]) ** 2)
            form = float(np.real(theta.conj() @ mats.s[k] @ theta))
            assert form == pytest.approx(direct, rel=1e-10)


def test_coupling_vector_reproduces_surrogate_gain():
    cfg, channels, ris, tx, filters, aux = make_state(seed=1)
    mats = build_ris_matrices(channels, tx, filters, aux, cfg)
    for d in SPACES:
        theta = ris.theta(d)
        echo = ((filters.filter(d).conj() @ channels.response(d)) * theta
                ) @ channels.bs_ris
        direct = 2.0 * float(
            np.sum(np.real(aux.lam[d].conj() * (echo @ tx.W)))
            + np.sum(np.real(aux.eta[d].conj() * (echo @ tx.F))))
        form = 2.0 * float(np.real(theta.conj() @ mats.t[d]))
        assert form == pytest.approx(direct, rel=1e-10)


def test_interference_form_psd_and_matches():
    cfg, channels, ris, tx, filters, aux = make_state(seed=2)
    mats = build_ris_matrices(channels, tx, filters, aux, cfg)
    rng = np.random.default_rng(5)
    for k in range(cfg.users):
        S_bar = mats.s_bar[k]
        assert np.linalg.norm(S_bar - S_bar.conj().T) <= 1e-12 * np.linalg.norm(S_bar)
        assert np.linalg.eigvalsh(S_bar).min() >= -1e-12 * np.abs(S_bar).max()
        d = channels.user_space(k)
        theta = rng.standard_normal(cfg.m_elems) + 1j * rng.standard_normal(cfg.m_elems)
        g = channels.ris_user[k]
        eff = (g.conj() * theta) @ channels.bs_ris
        others = np.delete(np.arange(cfg.users), k)
        direct = float(np.sum(np.abs(eff @ tx.W[:, others]) ** 2)
                       + np.sum(np.abs(eff @ tx.F) ** 2))
        direct += cfg.noise_ris_w * float(np.sum(np.abs(g.conj() * theta) ** 2))
        form = float(np.real(theta.conj() @ S_bar @ theta))
        assert form == pytest.approx(direct, rel=1e-10)


def test_variable_arity_with_amplitude_auxiliaries():
    cfg, channels, ris, tx, filters, aux = make_state(seed=3)
    model = build_ris_socp(channels, tx, filters, aux, ris, cfg)
    m = cfg.m_elems
    assert model.n_design_vars == 4 * m
    assert model.n_amplitude_vars == 2 * m
    power_form = cfg.with_updates(amplitude_form="power")
    model2 = build_ris_socp(channels, tx, filters, aux, ris, power_form)
    assert model2.n_amplitude_vars == 0


def test_qos_tangency_rows():
    cfg, channels, ris, tx, filters, aux = make_state(seed=4)
    model = build_ris_socp(channels, tx, filters, aux, ris, cfg)
    for lin, quad in model.tangency:
        assert lin == pytest.approx(quad, rel=1e-10, abs=1e-300)


def test_solution_validates_and_keeps_qos():
    for protocol in ("ES", "ACTIVE"):
        cfg, channels, ris, tx, filters, aux = make_state(seed=5, protocol=protocol)
        model = build_ris_socp(channels, tx, filters, aux, ris, cfg)
        sol = solve(model.program, tol=cfg.solver_tol)
        assert sol.ok
        cand = model.unpack(sol.x, ris)
        assert validate(cand, cfg.beta_max) == []
        for k in range(cfg.users):
            assert comm_sinr(k, channels, cand, tx, cfg) >= cfg.gamma_th * (1 - 1e-6)
        if protocol != "STAR":
            amp = amplification_power(cand, tx.W, tx.F, channels.bs_ris,
                                      cfg.noise_ris_w)
            assert amp <= cfg.ris_budget_w * (1 + 1e-6)


def test_solve_ris_monotone_trace():
    cfg, channels, ris, tx, filters, _ = make_state(seed=6)
    best, trace = solve_ris(channels, tx, filters, cfg, ris)
    scale = max(1.0, max(trace.objective))
    assert trace.monotone(1e-7 * scale)
    assert echo_objective(channels, best, tx, filters, cfg) >= trace.objective[0]


def test_es_conservatism_recorded():
    cfg, channels, ris, tx, filters, _ = make_state(seed=7)
    _, trace = solve_ris(channels, tx, filters, cfg, ris)
    assert trace.conservatism
    assert all(0.0 <= c <= 1.0 + 1e-9 for c in trace.conservatism)


def test_ms_output_validates_and_improves():
    cfg, channels, ris, tx, filters, _ = make_state(seed=8, protocol="MS")
    start = echo_objective(channels, ris, tx, filters, cfg)
    best, _ = solve_ris(channels, tx, filters, cfg, ris)
    assert validate(best, cfg.beta_max) == []
    assert best.mode_mask is not None
    assert echo_objective(channels, best, tx, filters, cfg) >= start * (1 - 1e-9)


def test_projection_protocols_stay_on_equality_sets():
    for protocol in ("STAR", "PASSIVE"):
        cfg, channels, ris, tx, filters, _ = make_state(seed=9, protocol=protocol,
                                                        r_th=0.2)
        best, _ = solve_ris(channels, tx, filters, cfg, ris)
        assert validate(best, cfg.beta_max) == []
        if protocol == "STAR":
            total = best.beta("r") + best.beta("t")
            assert np.allclose(total, 1.0, atol=1e-9)
        else:
            serving = best.mode_mask.astype(bool)
            assert np.allclose(np.abs(best.theta_r[serving]), 1.0, atol=1e-9)


def test_tiny_instance_against_grid():
    # M=2 instance: the SCA result is compared with a coefficient grid sweep
    cfg, channels, ris, tx, filters, _ = make_state(
        seed=10, m_elems=2, n_tx=2, m_sense=2, users_r=1, users_t=0,
        targets_r=1, targets_t=0, r_th=0.2, beta_max=10.0)
    best, _ = solve_ris(channels, tx, filters, cfg, ris)
    solver_obj = echo_objective(channels, best, tx, filters, cfg)

    phases = np.exp(2j * np.pi * np.arange(8) / 8)
    amps = np.sqrt(np.linspace(0.0, cfg.beta_max, 5))
    per_face = np.array([a * p for a in amps for p in phases])
    pairs = [(a, b) for a in per_face for b in per_face
             if abs(a) ** 2 + abs(b) ** 2 <= cfg.beta_max]
    top = 0.0
    for (r0, t0), (r1, t1) in itertools.product(pairs, repeat=2):
        cand = RisConfiguration("ES", np.array([r0, r1]), np.array([t0, t1]))
        if any(comm_sinr(k, channels, cand, tx, cfg) < cfg.gamma_th
               for k in range(cfg.users)):
            continue
        obj = echo_objective(channels, cand, tx, filters, cfg)
        if obj > top:
            top = obj
    assert solver_obj >= 0.95 * top
