"""Transmit beamforming block: fractional-programming surrogate, SCA and SOCP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .channel import ChannelSet
from .config import ScenarioConfig
from .geometry import SPACES
from .lifting import RowBlock, extract_complex, linear_2re
from .metrics import (SensingFilters, TransmitDesign, comm_sinr, echo_objective,
                      space_weights, user_gamma_threshold)
from .ris import RisConfiguration


class InfeasibleStart(RuntimeError):
    """No QoS-feasible transmit design could be produced."""


# budget radii inside the SOCPs are pulled back by this relative margin so
# solver-tolerance overshoot still lands strictly inside the feasible set
PULLBACK = 1.0 - 1e-8


def _echo_row(d, channels, ris, filters):
    m = filters.filter(d)
    return ((m.conj() @ channels.response(d)) * ris.theta(d)) @ channels.bs_ris


def _leak_row(d, channels, filters):
    return filters.filter(d).conj() @ channels.bs_sensor[d]


def _user_channel(k, channels, ris):
    """h_k with h_k^H w = g_k^H Theta_d H w for user k's own space."""
    d = channels.user_space(k)
    return ((channels.ris_user[k].conj() * ris.theta(d)) @ channels.bs_ris).conj()


def _user_noise(k, channels, ris, cfg):
    d = channels.user_space(k)
    amplified = cfg.noise_ris_w * float(
        np.sum(np.abs(channels.ris_user[k].conj() * ris.theta(d)) ** 2))
    return amplified + cfg.noise_user_w


def compute_delta(d, channels, ris, tx, filters, cfg) -> float:
    """Denominator of the echo SINR in space d (leakage + amplified noise + floor)."""
    m = filters.filter(d)
    leak = _leak_row(d, channels, filters)
    value = float(np.sum(np.abs(leak @ tx.W) ** 2) + np.sum(np.abs(leak @ tx.F) ** 2))
    value += cfg.noise_ris_w * float(
        np.sum(np.abs((m.conj() @ channels.response(d)) * ris.theta(d)) ** 2))
    value += cfg.noise_sense_w * float(np.sum(np.abs(m) ** 2))
    return value


@dataclass
class FpAuxiliaries:
    """Closed-form multipliers of the quadratic transform, one set per space."""

    lam: dict      # space -> (K,) complex
    eta: dict      # space -> (N,) complex
    delta: dict    # space -> float

    def coef(self, d) -> float:
        """Weight of the quadratic surrogate term: sum |lam|^2 + sum |eta|^2."""
        return float(np.sum(np.abs(self.lam[d]) ** 2) + np.sum(np.abs(self.eta[d]) ** 2))


def update_auxiliaries(channels, ris, tx, filters, cfg) -> FpAuxiliaries:
    """Multipliers at which the surrogate touches the true echo SINR."""
    lam, eta, delta = {}, {}, {}
    for d in SPACES:
        dd = compute_delta(d, channels, ris, tx, filters, cfg)
        if dd <= 0.0:
            raise ValueError("echo SINR denominator must be strictly positive")
        echo = _echo_row(d, channels, ris, filters)
        lam[d] = (echo @ tx.W) / dd
        eta[d] = (echo @ tx.F) / dd
        delta[d] = dd
    return FpAuxiliaries(lam=lam, eta=eta, delta=delta)


def surrogate_value(aux: FpAuxiliaries, channels, ris, tx, filters, cfg) -> float:
    """Concave-in-(W,F) surrogate of the echo objective at the given multipliers."""
    total = 0.0
    for d in SPACES:
        echo = _echo_row(d, channels, ris, filters)
        s = echo @ tx.W
        t = echo @ tx.F
        gain = 2.0 * float(np.sum(np.real(aux.lam[d].conj() * s))
                           + np.sum(np.real(aux.eta[d].conj() * t)))
        total += gain - aux.coef(d) * compute_delta(d, channels, ris, tx, filters, cfg)
    return total


@dataclass
class TxSubproblemMatrices:
    """Hermitian forms entering the transmit SOCP (leakage, panel power, QoS)."""

    p: dict    # space -> (N, N) leakage sandwich H_d^H m m^H H_d
    q: np.ndarray  # (N, N) panel throughput form
    t: list    # per-user rank-one QoS forms


def tx_subproblem_matrices(channels, ris, filters, cfg) -> TxSubproblemMatrices:
    p = {}
    for d in SPACES:
        leak = _leak_row(d, channels, filters)
        p[d] = np.outer(leak.conj(), leak)
    H = channels.bs_ris
    q = np.zeros((cfg.n_tx, cfg.n_tx), dtype=complex)
    for d in SPACES:
        through = ris.theta(d)[:, None] * H
        q += through.conj().T @ through
    t = []
    for k in range(cfg.users):
        h = _user_channel(k, channels, ris)
        t.append(np.outer(h, h.conj()))
    return TxSubproblemMatrices(p=p, q=q, t=t)


@dataclass
class TxModel:
    """Built conic program plus the index map back to a TransmitDesign."""

    program: conic.ConicProgram
    n_tx: int
    n_users: int
    n_cols: int
    n_design_vars: int
    constant: float            # surrogate constant dropped from the solver objective
    tangency: list             # per-user (linearized lhs, quadratic) at the expansion point

    def unpack(self, x) -> TransmitDesign:
        n, k = self.n_tx, self.n_users
        cols = [extract_complex(x, 2 * n * j, n) for j in range(self.n_cols)]
        W = np.stack(cols[:k], axis=1) if k else np.zeros((n, 0), dtype=complex)
        F = np.stack(cols[k:], axis=1)
        return TransmitDesign(W=W, F=F)


def build_tx_socp(channels: ChannelSet, ris: RisConfiguration, filters: SensingFilters,
                  aux: FpAuxiliaries | None, tx_bar: TransmitDesign,
                  cfg: ScenarioConfig, feasibility: bool = False) -> TxModel:
    """Convex inner approximation of the transmit subproblem around ``tx_bar``.

    Maximizes the quadratic-transform surrogate (or a common QoS slack when
    ``feasibility``) subject to the BS power budget, the linearized per-user
    QoS constraint and the panel amplification budget. QoS rows are normalized
    by each user's effective noise so the program is well conditioned.
    """
    N, K = cfg.n_tx, cfg.users
    n_cols = K + N
    n_design = 2 * N * n_cols
    n_vars = n_design + 1  # epigraph of the surrogate quadratic, or the QoS slack
    t_idx = n_design
    weights = space_weights(ris)

    re_off = lambda j: 2 * N * j
    im_off = lambda j: 2 * N * j + N

    H = channels.bs_ris
    cols_bar = np.concatenate([tx_bar.W, tx_bar.F], axis=1)

    objective = np.zeros(n_vars)
    blocks = []
    constant = 0.0

    if not feasibility:
        leak = {d: _leak_row(d, channels, filters) for d in SPACES}
        echo = {d: _echo_row(d, channels, ris, filters) for d in SPACES}
        # linear surrogate gain, minimized as its negative
        for j in range(n_cols):
            c = np.zeros(N, dtype=complex)
            for d in SPACES:
                mult = aux.lam[d][j] if j < K else aux.eta[d][j - K]
                c += weights[d] * mult * echo[d].conj()
            linear_2re(objective, c, re_off(j), im_off(j), scale=-1.0)
        objective[t_idx] = 1.0
        # epigraph of the weighted leakage quadratic
        quad = RowBlock(n_vars)
        quad.var(t_idx)
        quad.const(0.5)
        for d in SPACES:
            w = np.sqrt(weights[d] * aux.coef(d))
            if w == 0.0:
                continue
            for j in range(n_cols):
                quad.complex_inner(leak[d].conj(), re_off(j), im_off(j), scale=w)
        F_q, g_q = quad.build()
        blocks.append(conic.ConeBlock(conic.RSOC, F_q, g_q))
        for d in SPACES:
            m = filters.filter(d)
            floor = cfg.noise_ris_w * float(np.sum(np.abs(
                (m.conj() @ channels.response(d)) * ris.theta(d)) ** 2))
            floor += cfg.noise_sense_w * float(np.sum(np.abs(m) ** 2))
            constant -= weights[d] * aux.coef(d) * floor
    else:
        objective[t_idx] = -1.0  # maximize the common QoS slack

    # BS transmit power
    power = RowBlock(n_vars)
    power.const(np.sqrt(cfg.bs_budget_w) * PULLBACK)
    for i in range(n_design):
        power.var(i)
    F_p, g_p = power.build()
    blocks.append(conic.ConeBlock(conic.SOC, F_p, g_p))

    # QoS per user, normalized by its effective noise. The surrogate problem
    # linearizes the signal quadratic at the expansion point; the feasibility
    # problem instead uses the exact phase-rotated form (w_k's free phase makes
    # h^H w_k real nonnegative WLOG), which needs no expansion point.
    tangency = []
    for k in range(K):
        gamma_th = user_gamma_threshold(k, channels, ris, cfg)
        h = _user_channel(k, channels, ris)
        noise = _user_noise(k, channels, ris, cfg)
        qos = RowBlock(n_vars)
        if feasibility:
            head = np.zeros(n_vars)
            idx = np.arange(N)
            head[re_off(k) + idx] = h.real / np.sqrt(gamma_th * noise)
            head[im_off(k) + idx] = h.imag / np.sqrt(gamma_th * noise)
            head[t_idx] = -1.0
            qos.dense_row(head)
            qos.const(1.0)
            for j in range(n_cols):
                if j == k:
                    continue
                qos.complex_inner(h, re_off(j), im_off(j), scale=1.0 / np.sqrt(noise))
            F_k, g_k = qos.build()
            blocks.append(conic.ConeBlock(conic.SOC, F_k, g_k))
            continue
        response_bar = h.conj() @ cols_bar[:, k]
        quad_bar = float(np.abs(response_bar) ** 2)
        c_lin = h * response_bar  # T_k w_bar
        lin_at_bar = 2.0 * float(np.real(np.vdot(c_lin, cols_bar[:, k]))) - quad_bar
        tangency.append((lin_at_bar, quad_bar))
        u = np.zeros(n_vars)
        linear_2re(u, c_lin, re_off(k), im_off(k), scale=1.0 / (gamma_th * noise))
        qos.dense_row(u, const=(-quad_bar - gamma_th * noise) / (gamma_th * noise))
        qos.const(0.5)
        # u >= ||y||^2 with y = interference/sqrt(noise) encodes
        # lin >= gamma (noise + interference)
        scale = np.sqrt(1.0 / noise)
        for j in range(n_cols):
            if j == k:
                continue
            qos.complex_inner(h, re_off(j), im_off(j), scale=scale)
        F_k, g_k = qos.build()
        blocks.append(conic.ConeBlock(conic.RSOC, F_k, g_k))

    # panel amplification budget (passive architectures draw no panel power)
    if cfg.protocol not in ("STAR", "PASSIVE"):
        static = cfg.noise_ris_w * float(
            np.sum(np.abs(ris.theta_r) ** 2) + np.sum(np.abs(ris.theta_t) ** 2))
        radius_sq = cfg.ris_budget_w - static
        if radius_sq <= 0.0:
            raise conic.SolverFailure("panel noise amplification alone exceeds its budget")
        if cfg.protocol == "TS":
            # per-phase budget: one cone per face
            for d in SPACES:
                amp = RowBlock(n_vars)
                amp.const(np.sqrt(cfg.ris_budget_w - cfg.noise_ris_w * float(
                    np.sum(np.abs(ris.theta(d)) ** 2))) * PULLBACK)
                through = ris.theta(d)[:, None] * H
                for j in range(n_cols):
                    amp.complex_map(through, re_off(j), im_off(j))
                F_a, g_a = amp.build()
                blocks.append(conic.ConeBlock(conic.SOC, F_a, g_a))
        else:
            amp = RowBlock(n_vars)
            amp.const(np.sqrt(radius_sq) * PULLBACK)
            for d in SPACES:
                through = ris.theta(d)[:, None] * H
                for j in range(n_cols):
                    amp.complex_map(through, re_off(j), im_off(j))
            F_a, g_a = amp.build()
            blocks.append(conic.ConeBlock(conic.SOC, F_a, g_a))

    program = conic.ConicProgram(
        n_vars=n_vars, objective=objective, blocks=blocks,
        meta={"n_design_vars": n_design, "n_cols": n_cols})
    return TxModel(program=program, n_tx=N, n_users=K, n_cols=n_cols,
                   n_design_vars=n_design, constant=constant, tangency=tangency)


def stalled(prev: float, new: float, tol: float) -> bool:
    """Scale-free stopping test: the change is below tol absolutely or relatively.

    The echo objective's magnitude is set by the channel normalization and
    spans orders of magnitude across scenarios, so a purely absolute threshold
    would make iteration counts scale-dependent.
    """
    return abs(new - prev) <= tol * max(1.0, abs(prev))


def canonicalize(tx: TransmitDesign) -> TransmitDesign:
    """Pin the design's gauge freedoms without changing any metric.

    Every objective and constraint depends on the sensing beamformers only
    through their covariance F F^H and is invariant to per-user phases, so the
    eigenfactor representative of F and phase-aligned user columns denote the
    same operating point; fixing them keeps the alternating blocks from
    chasing equivalent representations.
    """
    cov = tx.F @ tx.F.conj().T
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.conj().T))
    F = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))
    W = tx.W.copy()
    for k in range(W.shape[1]):
        i = int(np.argmax(np.abs(W[:, k])))
        if np.abs(W[i, k]) > 0.0:
            W[:, k] = W[:, k] * np.exp(-1j * np.angle(W[i, k]))
    return TransmitDesign(W=W, F=F)


@dataclass
class ScaTrace:
    objective: list = field(default_factory=list)
    surrogate: list = field(default_factory=list)
    tangency: list = field(default_factory=list)
    status: list = field(default_factory=list)
    conservatism: list = field(default_factory=list)

    def monotone(self, tol: float) -> bool:
        values = np.asarray(self.objective)
        return bool(np.all(np.diff(values) >= -tol)) if len(values) > 1 else True


def initial_transmit_design(channels, ris, cfg) -> TransmitDesign:
    """Matched-filter start scaled into the power budgets with a 10% margin."""
    N, K = cfg.n_tx, cfg.users
    H = channels.bs_ris
    w_dirs = []
    for k in range(K):
        h = _user_channel(k, channels, ris)
        norm = np.linalg.norm(h)
        w_dirs.append(h / norm if norm > 0 else np.eye(N, dtype=complex)[:, k % N])
    sense = np.zeros((N, 0), dtype=complex)
    for d in SPACES:
        if channels.targets[d].alpha.size:
            front = (channels.response(d) * ris.theta(d)[None, :]) @ H
            sense = np.concatenate([sense, front.conj().T], axis=1)
    if sense.shape[1] == 0:
        sense = np.eye(N, dtype=complex)
    f_dirs = [sense[:, n % sense.shape[1]] for n in range(N)]
    f_dirs = [f / np.linalg.norm(f) if np.linalg.norm(f) > 0 else np.eye(N)[:, n]
              for n, f in enumerate(f_dirs)]

    W = np.stack(w_dirs, axis=1) if K else np.zeros((N, 0), dtype=complex)
    F = np.stack(f_dirs, axis=1)
    # user columns carry 3/4 of the margined BS budget, sensing columns the rest
    bs_budget = 0.9 * cfg.bs_budget_w
    w_share = 0.75 * bs_budget / max(K, 1) if K else 0.0
    f_share = (bs_budget - w_share * K) / N
    W = W * np.sqrt(w_share)
    F = F * np.sqrt(f_share)

    static = cfg.noise_ris_w * float(
        np.sum(np.abs(ris.theta_r) ** 2) + np.sum(np.abs(ris.theta_t) ** 2))
    through_power = 0.0
    for d in SPACES:
        through = ris.theta(d)[:, None] * H
        through_power += float(np.sum(np.abs(through @ W) ** 2)
                               + np.sum(np.abs(through @ F) ** 2))
    headroom = 0.9 * cfg.ris_budget_w - static
    if headroom <= 0.0:
        raise conic.SolverFailure("panel noise amplification alone exceeds its budget")
    if through_power > headroom:
        shrink = np.sqrt(headroom / through_power)
        W, F = W * shrink, F * shrink
    return TransmitDesign(W=W, F=F)


def ensure_qos_feasible(channels, ris, cfg, tx: TransmitDesign,
                        max_rounds: int = 10, strict: bool = True) -> TransmitDesign:
    """Feasibility phase: grow the worst QoS slack until every user clears it.

    With ``strict`` unset, a stalled phase returns the best-slack design
    instead of raising (the random baseline keeps its drawn coefficients even
    when they cannot support the QoS set).
    """
    def min_slack(design):
        if cfg.users == 0:
            return np.inf
        return min(comm_sinr(k, channels, ris, design, cfg)
                   / user_gamma_threshold(k, channels, ris, cfg) - 1.0
                   for k in range(cfg.users))

    best = tx
    best_slack = min_slack(tx)
    current = tx
    for _ in range(max_rounds):
        if best_slack > 1e-6:
            return best
        model = build_tx_socp(channels, ris, None, None, current, cfg, feasibility=True)
        sol = conic.solve(model.program, tol=cfg.solver_tol)
        if not sol.ok:
            break
        current = model.unpack(sol.x)
        slack = min_slack(current)
        if slack > best_slack:
            best, best_slack = current, slack
    if best_slack <= 0.0 and strict:
        raise InfeasibleStart(
            f"QoS feasibility phase stalled with slack {best_slack:.3g}")
    return best


def block_tolerance(cfg) -> float:
    """Inner-loop stall tolerance, kept well below the outer test.

    The alternating driver cannot resolve changes finer than what each block
    leaves on the table, so blocks must iterate past the outer tolerance or
    the outer loop sees a perpetual multi-block drift at exactly its threshold.
    """
    return 0.1 * min(cfg.sca_tol, cfg.ao_tol)


def solve_tx(channels, ris, filters, cfg, tx0: TransmitDesign):
    """SCA loop over the transmit SOCP; returns the best iterate and its trace."""
    current = tx0
    best = tx0
    best_obj = echo_objective(channels, ris, current, filters, cfg)
    prev_obj = best_obj
    tol = block_tolerance(cfg)
    trace = ScaTrace(objective=[best_obj])
    for _ in range(cfg.max_sca_iters):
        aux = update_auxiliaries(channels, ris, current, filters, cfg)
        model = build_tx_socp(channels, ris, filters, aux, current, cfg)
        sol = conic.solve(model.program, tol=cfg.solver_tol)
        trace.status.append(sol.status)
        if not sol.ok:
            break
        candidate = canonicalize(model.unpack(sol.x))
        obj = echo_objective(channels, ris, candidate, filters, cfg)
        trace.objective.append(obj)
        trace.surrogate.append(-sol.objective + model.constant)
        trace.tangency.append(model.tangency)
        if obj > best_obj:
            best, best_obj = candidate, obj
        current = candidate
        if stalled(prev_obj, obj, tol):
            break
        prev_obj = obj
    return best, trace
