"""Panel-coefficient block: surrogate objective, protocol constraint sets, SCA loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .config import ScenarioConfig
from .filters import canonical_phase
from .geometry import SPACES
from .lifting import RowBlock, extract_complex
from .metrics import (TransmitDesign, comm_sinr, echo_objective, space_weights,
                      user_gamma_threshold)
from .ris import RisConfiguration
from .txopt import (PULLBACK, FpAuxiliaries, ScaTrace, block_tolerance, stalled,
                    update_auxiliaries)


@dataclass
class RisSubproblemMatrices:
    """Quadratic forms of the panel subproblem, kept with their thin factors.

    For each space: coupling vector t_d with 2Re{theta^H t_d} the surrogate
    gain, and the diagonal g_md of the amplified-noise form. Per user: the
    rank-one QoS form S_k (factor a_k with theta^H S_k theta = |a_k^T theta|^2),
    the interference form S_bar_k, and the diagonal of the panel-power form U.
    """

    t: dict
    g_md: dict
    s: list
    s_factor: list
    s_bar: list
    s_bar_factors: list
    s_bar_diag: list
    u_diag: np.ndarray


def _stream_cols(tx: TransmitDesign) -> np.ndarray:
    return np.concatenate([tx.W, tx.F], axis=1)


def build_ris_matrices(channels, tx, filters, aux: FpAuxiliaries | None,
                       cfg: ScenarioConfig) -> RisSubproblemMatrices:
    """Assemble the subproblem forms; the echo parts are skipped when aux is None."""
    H = channels.bs_ris
    cols = _stream_cols(tx)
    through = H @ cols                      # (M, K+N) per-element stream responses
    t, g_md = {}, {}
    if aux is not None:
        for d in SPACES:
            front = filters.filter(d).conj() @ channels.response(d)   # m_d^H G_d, (M,)
            mults = np.concatenate([aux.lam[d], aux.eta[d]])
            v = (front[:, None] * through) @ mults.conj()
            t[d] = v.conj()
            g_md[d] = np.abs(front) ** 2
    s, s_factor, s_bar, s_bar_factors, s_bar_diag = [], [], [], [], []
    for k in range(cfg.users):
        g = channels.ris_user[k]
        a_all = g.conj()[:, None] * through  # column i: diag(g^H) H col_i
        a_k = a_all[:, k]
        s_factor.append(a_k)
        s.append(np.outer(a_k.conj(), a_k))
        others = np.delete(a_all, k, axis=1)
        s_bar_factors.append(others)
        diag = cfg.noise_ris_w * np.abs(g) ** 2
        s_bar_diag.append(diag)
        s_bar.append(others.conj() @ others.T + np.diag(diag))
        s_bar[-1] = 0.5 * (s_bar[-1] + s_bar[-1].conj().T)
    u_diag = np.sum(np.abs(through) ** 2, axis=1) + cfg.noise_ris_w
    return RisSubproblemMatrices(t=t, g_md=g_md, s=s, s_factor=s_factor,
                                 s_bar=s_bar, s_bar_factors=s_bar_factors,
                                 s_bar_diag=s_bar_diag, u_diag=u_diag)


@dataclass
class RisModel:
    program: conic.ConicProgram
    m_elems: int
    n_design_vars: int
    n_amplitude_vars: int
    constant: float
    tangency: list

    def unpack(self, x, template: RisConfiguration) -> RisConfiguration:
        out = template.copy()
        m = self.m_elems
        # each face carries a free global phase; pinning it keeps successive
        # iterates from drifting along the invariance
        out.theta_r = canonical_phase(extract_complex(x, 0, m))
        out.theta_t = canonical_phase(extract_complex(x, 2 * m, m))
        return out


def _face_offsets(m_elems):
    return {"r": 0, "t": 2 * m_elems}


def build_ris_socp(channels, tx, filters, aux, ris_bar: RisConfiguration,
                   cfg: ScenarioConfig, feasibility: bool = False) -> RisModel:
    """Convex inner approximation of the panel subproblem around ``ris_bar``.

    The protocol picks the amplitude constraint set: ES/MS couple the faces
    through auxiliary amplitudes (modulus-sum budget sqrt(beta_max), which
    implies the per-element power cap), ACTIVE adds the linearized gain floor,
    STAR/PASSIVE use relaxed unit balls that the caller projects back to the
    equality set. ``feasibility`` swaps the surrogate objective for a common
    QoS slack.
    """
    M = channels.m_elems
    protocol = ris_bar.protocol
    use_amp_aux = protocol in ("ES", "MS") and cfg.amplitude_form == "modulus_sum"
    n_design = 4 * M
    n_amp = 2 * M if use_amp_aux else 0
    n_vars = n_design + n_amp + 1
    t_idx = n_design + n_amp
    off = _face_offsets(M)
    amp_off = {"r": n_design, "t": n_design + M}
    w_space = space_weights(ris_bar)

    mats = build_ris_matrices(channels, tx, filters, None if feasibility else aux, cfg)

    objective = np.zeros(n_vars)
    blocks = []
    constant = 0.0

    if not feasibility:
        for d in SPACES:
            td = w_space[d] * mats.t[d]
            idx = np.arange(M)
            objective[off[d] + idx] -= 2.0 * td.real
            objective[off[d] + M + idx] -= 2.0 * td.imag
        objective[t_idx] = 1.0
        quad = RowBlock(n_vars)
        quad.var(t_idx)
        quad.const(0.5)
        for d in SPACES:
            weights = np.sqrt(w_space[d] * aux.coef(d) * cfg.noise_ris_w * mats.g_md[d])
            for m in range(M):
                if weights[m] == 0.0:
                    continue
                quad.var(off[d] + m, weights[m])
                quad.var(off[d] + M + m, weights[m])
        F_q, g_q = quad.build()
        blocks.append(conic.ConeBlock(conic.RSOC, F_q, g_q))
        cols = _stream_cols(tx)
        for d in SPACES:
            leak = filters.filter(d).conj() @ channels.bs_sensor[d]
            floor = float(np.sum(np.abs(leak @ cols) ** 2))
            floor += cfg.noise_sense_w * float(np.sum(np.abs(filters.filter(d)) ** 2))
            constant -= w_space[d] * aux.coef(d) * floor
    else:
        objective[t_idx] = -1.0

    zero_rows = RowBlock(n_vars)

    def freeze_face(d, elements):
        for m in elements:
            zero_rows.var(off[d] + m)
            zero_rows.var(off[d] + M + m)

    if protocol == "TS":
        # the faces are active in disjoint time phases: independent per-element caps
        radius = np.sqrt(cfg.beta_max) * PULLBACK
        for d in SPACES:
            for m in range(M):
                cap = RowBlock(n_vars)
                cap.const(radius)
                cap.var(off[d] + m)
                cap.var(off[d] + M + m)
                F_b, g_b = cap.build()
                blocks.append(conic.ConeBlock(conic.SOC, F_b, g_b))
    elif protocol in ("ES", "MS"):
        if use_amp_aux:
            budget = np.sqrt(cfg.beta_max) * PULLBACK
            caps = RowBlock(n_vars)
            for d in SPACES:
                for m in range(M):
                    face = RowBlock(n_vars)
                    face.var(amp_off[d] + m)
                    face.var(off[d] + m)
                    face.var(off[d] + M + m)
                    F_f, g_f = face.build()
                    blocks.append(conic.ConeBlock(conic.SOC, F_f, g_f))
            for m in range(M):
                caps.row([amp_off["r"] + m, amp_off["t"] + m], [-1.0, -1.0], budget)
            F_c, g_c = caps.build()
            blocks.append(conic.ConeBlock(conic.NONNEG, F_c, g_c))
        else:
            radius = np.sqrt(cfg.beta_max) * PULLBACK
            for m in range(M):
                ball = RowBlock(n_vars)
                ball.const(radius)
                for d in SPACES:
                    ball.var(off[d] + m)
                    ball.var(off[d] + M + m)
                F_b, g_b = ball.build()
                blocks.append(conic.ConeBlock(conic.SOC, F_b, g_b))
        if ris_bar.mode_mask is not None:
            serve_r = ris_bar.mode_mask.astype(bool)
            freeze_face("t", np.nonzero(serve_r)[0])
            freeze_face("r", np.nonzero(~serve_r)[0])
    elif protocol == "ACTIVE":
        serve_r = ris_bar.mode_mask.astype(bool)
        freeze_face("t", np.nonzero(serve_r)[0])
        freeze_face("r", np.nonzero(~serve_r)[0])
        radius = np.sqrt(cfg.beta_max) * PULLBACK
        floor_rows = RowBlock(n_vars)
        for d, serving in (("r", serve_r), ("t", ~serve_r)):
            theta_bar = ris_bar.theta(d)
            for m in np.nonzero(serving)[0]:
                cap = RowBlock(n_vars)
                cap.const(radius)
                cap.var(off[d] + m)
                cap.var(off[d] + M + m)
                F_b, g_b = cap.build()
                blocks.append(conic.ConeBlock(conic.SOC, F_b, g_b))
                tb = theta_bar[m]
                floor_rows.row([off[d] + m, off[d] + M + m],
                               [2.0 * tb.real, 2.0 * tb.imag],
                               -(np.abs(tb) ** 2) - 1.0)
        F_fl, g_fl = floor_rows.build()
        blocks.append(conic.ConeBlock(conic.NONNEG, F_fl, g_fl))
    elif protocol == "PASSIVE":
        serve_r = ris_bar.mode_mask.astype(bool)
        freeze_face("t", np.nonzero(serve_r)[0])
        freeze_face("r", np.nonzero(~serve_r)[0])
        for d, serving in (("r", serve_r), ("t", ~serve_r)):
            for m in np.nonzero(serving)[0]:
                cap = RowBlock(n_vars)
                cap.const(1.0)
                cap.var(off[d] + m)
                cap.var(off[d] + M + m)
                F_b, g_b = cap.build()
                blocks.append(conic.ConeBlock(conic.SOC, F_b, g_b))
    elif protocol == "STAR":
        for m in range(M):
            ball = RowBlock(n_vars)
            ball.const(1.0)
            for d in SPACES:
                ball.var(off[d] + m)
                ball.var(off[d] + M + m)
            F_b, g_b = ball.build()
            blocks.append(conic.ConeBlock(conic.SOC, F_b, g_b))

    if zero_rows.n_rows:
        F_z, g_z = zero_rows.build()
        eq_A, eq_b = F_z, -g_z
    else:
        eq_A, eq_b = None, None

    if protocol == "TS":
        # each phase independently respects the panel power budget
        weights = np.sqrt(mats.u_diag)
        for d in SPACES:
            amp = RowBlock(n_vars)
            amp.const(np.sqrt(cfg.ris_budget_w) * PULLBACK)
            for m in range(M):
                amp.var(off[d] + m, weights[m])
                amp.var(off[d] + M + m, weights[m])
            F_a, g_a = amp.build()
            blocks.append(conic.ConeBlock(conic.SOC, F_a, g_a))
    elif protocol in ("ES", "MS", "ACTIVE"):
        amp = RowBlock(n_vars)
        amp.const(np.sqrt(cfg.ris_budget_w) * PULLBACK)
        weights = np.sqrt(mats.u_diag)
        for d in SPACES:
            for m in range(M):
                amp.var(off[d] + m, weights[m])
                amp.var(off[d] + M + m, weights[m])
        F_a, g_a = amp.build()
        blocks.append(conic.ConeBlock(conic.SOC, F_a, g_a))

    tangency = []
    for k in range(cfg.users):
        gamma_th = user_gamma_threshold(k, channels, ris_bar, cfg)
        d = channels.user_space(k)
        theta_bar = ris_bar.theta(d)
        a_k = mats.s_factor[k]
        s_bar_val = a_k @ theta_bar
        quad_bar = float(np.abs(s_bar_val) ** 2)
        c_lin = s_bar_val.conjugate() * a_k   # row of 2Re{conj(s_bar) a^T theta}
        lin_at_bar = 2.0 * float(np.real(c_lin @ theta_bar)) - quad_bar
        tangency.append((lin_at_bar, quad_bar))
        noise = cfg.noise_user_w
        qos = RowBlock(n_vars)
        u = np.zeros(n_vars)
        idx = np.arange(M)
        scale_u = 1.0 / (gamma_th * noise)
        u[off[d] + idx] += 2.0 * scale_u * c_lin.real
        u[off[d] + M + idx] += -2.0 * scale_u * c_lin.imag
        if feasibility:
            u[t_idx] = -1.0 / gamma_th
        qos.dense_row(u, const=(-quad_bar - gamma_th * noise) * scale_u)
        qos.const(0.5)
        # u >= ||y||^2 with y = interference/sqrt(noise) encodes
        # lin >= gamma (noise + interference)
        y_scale = np.sqrt(1.0 / noise)
        for i in range(mats.s_bar_factors[k].shape[1]):
            a_i = mats.s_bar_factors[k][:, i]
            qos.complex_inner(a_i.conj(), off[d], off[d] + M, scale=y_scale)
        diag_w = np.sqrt(mats.s_bar_diag[k]) * y_scale
        for m in range(M):
            if diag_w[m] == 0.0:
                continue
            qos.var(off[d] + m, diag_w[m])
            qos.var(off[d] + M + m, diag_w[m])
        F_k, g_k = qos.build()
        blocks.append(conic.ConeBlock(conic.RSOC, F_k, g_k))

    program = conic.ConicProgram(
        n_vars=n_vars, objective=objective, blocks=blocks, eq_A=eq_A, eq_b=eq_b,
        meta={"n_design_vars": n_design, "n_amplitude_vars": n_amp})
    return RisModel(program=program, m_elems=M, n_design_vars=n_design,
                    n_amplitude_vars=n_amp, constant=constant, tangency=tangency)


def project_protocol(candidate: RisConfiguration) -> RisConfiguration:
    """Map a relaxed iterate onto the protocol's equality set (STAR/PASSIVE)."""
    out = candidate.copy()
    if candidate.protocol == "STAR":
        norms = np.sqrt(np.abs(out.theta_r) ** 2 + np.abs(out.theta_t) ** 2)
        dead = norms < 1e-12
        norms = np.where(dead, 1.0, norms)
        out.theta_r = np.where(dead, np.sqrt(0.5), out.theta_r / norms)
        out.theta_t = np.where(dead, np.sqrt(0.5), out.theta_t / norms)
    elif candidate.protocol == "PASSIVE":
        serve_r = out.mode_mask.astype(bool)
        for d, serving in (("r", serve_r), ("t", ~serve_r)):
            theta = out.theta(d)
            mags = np.abs(theta)
            unit = np.where(mags > 1e-12, theta / np.where(mags > 0, mags, 1.0), 1.0 + 0j)
            frozen = np.where(serving, unit, 0.0)
            if d == "r":
                out.theta_r = frozen
            else:
                out.theta_t = frozen
    return out


def _qos_ok(channels, ris, tx, cfg, rel_tol=1e-9) -> bool:
    if cfg.users == 0:
        return True
    return all(comm_sinr(k, channels, ris, tx, cfg)
               >= user_gamma_threshold(k, channels, ris, cfg) * (1.0 - rel_tol)
               for k in range(cfg.users))


def solve_ris(channels, tx, filters, cfg, ris0: RisConfiguration):
    """SCA loop over the panel SOCP; returns the best accepted iterate and trace.

    ES/TS/ACTIVE iterates are feasible by construction. MS relaxes to the ES
    set, rounds each element to its dominant mode and re-runs with the zero
    pattern fixed. STAR/PASSIVE solve a relaxed program and project each
    candidate back onto the equality set; the projected point is accepted only
    if it keeps QoS and does not decrease the true objective. The per-run ES
    amplitude-form conservatism (peak element power over beta_max) is recorded
    in the trace.
    """
    if ris0.protocol == "MS":
        return _solve_ms(channels, tx, filters, cfg, ris0)
    return _sca_loop(channels, tx, filters, cfg, ris0)


def _sca_loop(channels, tx, filters, cfg, ris0: RisConfiguration):
    protocol = ris0.protocol
    projected = protocol in ("STAR", "PASSIVE")
    current = ris0
    best = ris0
    best_obj = echo_objective(channels, current, tx, filters, cfg)
    prev_obj = best_obj
    tol = block_tolerance(cfg)
    trace = ScaTrace(objective=[best_obj])
    for _ in range(cfg.max_sca_iters):
        aux = update_auxiliaries(channels, current, tx, filters, cfg)
        model = build_ris_socp(channels, tx, filters, aux, current, cfg)
        sol = conic.solve(model.program, tol=cfg.solver_tol)
        trace.status.append(sol.status)
        if not sol.ok:
            break
        candidate = model.unpack(sol.x, current)
        if projected:
            candidate = project_protocol(candidate)
        obj = echo_objective(channels, candidate, tx, filters, cfg)
        accept = obj >= best_obj and (not projected or _qos_ok(channels, candidate, tx, cfg))
        trace.objective.append(obj if accept or not projected else best_obj)
        trace.surrogate.append(-sol.objective + model.constant)
        trace.tangency.append(model.tangency)
        if protocol == "ES":
            peak = float(np.max(candidate.beta("r") + candidate.beta("t")))
            trace.conservatism.append(peak / cfg.beta_max)
        if accept and obj > best_obj:
            best, best_obj = candidate, obj
        if projected and not accept:
            break  # the guarded step failed; keep the last feasible iterate
        current = candidate
        if stalled(prev_obj, obj, tol):
            break
        prev_obj = obj
    return best, trace


def _solve_ms(channels, tx, filters, cfg, ris0: RisConfiguration):
    """Relax to the ES set, round each element to its dominant mode, re-run fixed."""
    es_start = RisConfiguration("ES", theta_r=ris0.theta_r.copy(),
                                theta_t=ris0.theta_t.copy())
    es_best, trace = _sca_loop(channels, tx, filters, cfg, es_start)
    mask = (es_best.beta("r") >= es_best.beta("t")).astype(int)
    serve_r = mask.astype(bool)
    rounded = RisConfiguration(
        "MS",
        theta_r=np.where(serve_r, es_best.theta_r, 0.0),
        theta_t=np.where(serve_r, 0.0, es_best.theta_t),
        mode_mask=mask,
    )
    prev_obj = echo_objective(channels, ris0, tx, filters, cfg)
    if not _qos_ok(channels, rounded, tx, cfg, rel_tol=1e-7):
        rounded, slack = improve_qos_slack(channels, tx, cfg, rounded)
        if slack < 0.0:
            trace.objective.append(prev_obj)
            return ris0, trace
    refined, tail = _sca_loop(channels, tx, filters, cfg, rounded)
    trace.objective.extend(tail.objective)
    trace.status.extend(tail.status)
    trace.tangency.extend(tail.tangency)
    obj_ref = echo_objective(channels, refined, tx, filters, cfg)
    if obj_ref >= prev_obj:
        return refined, trace
    trace.objective.append(prev_obj)
    return ris0, trace


def improve_qos_slack(channels, tx, cfg, ris0: RisConfiguration,
                      filters=None, project: bool = True) -> tuple:
    """One feasibility step on the panel: maximize the common QoS slack.

    Returns (configuration, slack) where slack is min_k sinr_k/gamma_th - 1 of
    the returned configuration. STAR/PASSIVE candidates are projected onto
    their equality sets unless ``project`` is unset (relaxed climbing).
    """
    def min_slack(r):
        if cfg.users == 0:
            return np.inf
        return min(comm_sinr(k, channels, r, tx, cfg)
                   / user_gamma_threshold(k, channels, r, cfg) - 1.0
                   for k in range(cfg.users))

    model = build_ris_socp(channels, tx, filters, None, ris0, cfg, feasibility=True)
    sol = conic.solve(model.program, tol=cfg.solver_tol)
    if not sol.ok:
        return ris0, min_slack(ris0)
    candidate = model.unpack(sol.x, ris0)
    if project and ris0.protocol in ("STAR", "PASSIVE"):
        candidate = project_protocol(candidate)
    base = min_slack(ris0)
    cand = min_slack(candidate)
    return (candidate, cand) if cand > base else (ris0, base)
