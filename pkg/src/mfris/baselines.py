"""Comparison schemes: conventional four-hop architectures, random coefficients,
exhaustive search and the SDR pipeline."""

from __future__ import annotations

import itertools
import time

import numpy as np

from .ao import (BlockStep, SolutionRecord, _monotone_audit, best_effort_start,
                 find_feasible_start)
from .base import ParamsMixin, check_channel_set
from .channel import ChannelSet, TargetResponse
from .config import ScenarioConfig
from .filters import optimal_filters
from .geometry import SPACES
from .metrics import audit, echo_objective, sensing_sinr_scalar, user_rate
from .ris import RisConfiguration, random_feasible
from .risopt import solve_ris
from .txopt import (InfeasibleStart, ensure_qos_feasible, initial_transmit_design,
                    solve_tx, stalled)


def _finish_record(channels, cfg, ris, tx, filters, objectives, t_start,
                   protocol=None) -> SolutionRecord:
    report = audit(channels, ris, tx, filters, cfg)
    rates = np.array([user_rate(k, channels, ris, tx, cfg) for k in range(cfg.users)])
    per_space = {d: sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
                 for d in SPACES}
    return SolutionRecord(
        protocol=protocol or cfg.protocol,
        objective=objectives[-1],
        objectives=objectives,
        blocks=[],
        tx=tx, ris=ris, filters=filters,
        sensing_sinr=per_space,
        rates=rates,
        report=report,
        converged=True,
        outer_iters=len(objectives),
        monotone=_monotone_audit(objectives, 10.0 * cfg.solver_tol),
        wall_s=time.perf_counter() - t_start,
    )


def bs_echo_view(channels: ChannelSet, ris: RisConfiguration, cfg: ScenarioConfig):
    """Map the conventional four-hop echo onto the two-hop machinery.

    Conventional architectures receive the target echo back at the BS:
    y = H^T Theta_d (B diag(alpha) B^T) Theta_d H x + leakage + noise. Freezing
    the return leg at the current coefficients yields an effective response
    (Theta_d H)^T B diag(alpha) B^T with N "sensing" ports and the panel
    round-trip loop H^T Theta_d H as the leakage matrix, so every filter /
    transmit / coefficient block runs unchanged on this view. The once-hop
    amplified panel noise reaching the BS is orders of magnitude below the
    loop leakage and is not modeled.
    """
    H = channels.bs_ris
    targets, leak = {}, {}
    for d in SPACES:
        resp = channels.targets[d]
        inbound = (ris.theta(d)[:, None] * H).T          # (Theta_d H)^T, N x M
        targets[d] = TargetResponse(
            arrival=inbound @ resp.departure,
            departure=resp.departure.conj(),
            alpha=resp.alpha,
            angles=resp.angles)
        leak[d] = inbound @ H                            # round-trip loop, N x N
    view_channels = ChannelSet(
        bs_ris=H, ris_user=channels.ris_user, bs_sensor=leak, targets=targets,
        geometry=channels.geometry, m_elems=channels.m_elems,
        m_y=channels.m_y, m_z=channels.m_z)
    view_cfg = cfg.with_updates(m_sense=cfg.n_tx)
    return view_channels, view_cfg


def bs_echo_objective(channels, ris, tx, filters, cfg) -> float:
    """Self-consistent four-hop echo SINR sum (both legs at the given coefficients)."""
    view_channels, view_cfg = bs_echo_view(channels, ris, cfg)
    return echo_objective(view_channels, ris, tx, filters, view_cfg)


def fit_fixed_architecture(channels: ChannelSet, cfg: ScenarioConfig) -> SolutionRecord:
    """AO loop for the STAR/ACTIVE/PASSIVE architectures under the four-hop echo.

    The communication side runs on the real links; the sensing side runs on
    the BS-echo view refreshed every outer iteration. Coefficient updates are
    accepted only if the self-consistent four-hop objective does not decrease.
    A passive architecture that cannot reach the QoS set at all runs best
    effort: the rate targets are anchored at the achievable level and the
    final audit reports the shortfall.
    """
    t_start = time.perf_counter()
    audit_cfg = cfg
    try:
        tx, ris = find_feasible_start(channels, cfg)
    except InfeasibleStart:
        if cfg.protocol not in ("STAR", "PASSIVE") or cfg.users == 0:
            raise
        tx, ris, slack = best_effort_start(channels, cfg)
        if slack <= -0.95:
            raise
        reachable = 0.98 * (1.0 + slack) * cfg.gamma_th
        cfg = cfg.with_updates(r_th=float(np.log2(1.0 + reachable)))
        tx = ensure_qos_feasible(channels, ris, cfg, tx)
    blocks, objectives, traces = [], [], []
    filters = None
    prev = None
    converged = False
    for it in range(cfg.max_outer_iters):
        view_channels, view_cfg = bs_echo_view(channels, ris, cfg)

        t0 = time.perf_counter()
        filters = optimal_filters(view_channels, ris, tx, view_cfg)
        g_filter = echo_objective(view_channels, ris, tx, filters, view_cfg)
        blocks.append(BlockStep(it, "filter", g_filter,
                                1e3 * (time.perf_counter() - t0)))

        t0 = time.perf_counter()
        tx, tx_trace = solve_tx(view_channels, ris, filters, view_cfg, tx)
        g_tx = echo_objective(view_channels, ris, tx, filters, view_cfg)
        blocks.append(BlockStep(it, "tx", g_tx, 1e3 * (time.perf_counter() - t0)))

        t0 = time.perf_counter()
        candidate, ris_trace = solve_ris(view_channels, tx, filters, view_cfg, ris)
        g_cand = bs_echo_objective(channels, candidate, tx, filters, cfg)
        if g_cand >= g_tx:       # guard: the frozen return leg makes this a surrogate
            ris = candidate
            g_ris = g_cand
        else:
            g_ris = bs_echo_objective(channels, ris, tx, filters, cfg)
        blocks.append(BlockStep(it, "ris", g_ris, 1e3 * (time.perf_counter() - t0)))

        traces.append({"tx": tx_trace, "ris": ris_trace})
        objectives.append(g_ris)
        if prev is not None and stalled(prev, g_ris, cfg.ao_tol):
            converged = True
            break
        prev = g_ris

    # emit with the filters refit to the final coefficients (closed form, monotone)
    outer_iters = len(objectives)
    view_channels, view_cfg = bs_echo_view(channels, ris, cfg)
    filters = optimal_filters(view_channels, ris, tx, view_cfg)
    report = audit(channels, ris, tx, filters, audit_cfg)
    rates = np.array([user_rate(k, channels, ris, tx, cfg) for k in range(cfg.users)])
    per_space = {d: sensing_sinr_scalar(d, view_channels, ris, tx, filters, view_cfg)
                 for d in SPACES}
    objectives.append(sum(per_space.values()))
    return SolutionRecord(
        protocol=cfg.protocol,
        objective=objectives[-1],
        objectives=objectives,
        blocks=blocks,
        tx=tx, ris=ris, filters=filters,
        sensing_sinr=per_space,
        rates=rates,
        report=report,
        converged=converged,
        outer_iters=outer_iters,
        monotone=_monotone_audit(objectives, 10.0 * cfg.solver_tol),
        wall_s=time.perf_counter() - t_start,
        traces=traces,
    )


def random_baseline(channels: ChannelSet, cfg: ScenarioConfig) -> SolutionRecord:
    """Panel coefficients drawn from the feasible set; filter and transmit optimized.

    A random draw often cannot support the QoS set (the coefficient phases do
    the heavy lifting at this scale); the transmit block then keeps the
    best-slack design and the audit reports the rate violations.
    """
    t_start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))
    ris = random_feasible("ES", channels.m_elems, cfg.beta_max, rng)
    tx = initial_transmit_design(channels, ris, cfg)
    if cfg.users:
        tx = ensure_qos_feasible(channels, ris, cfg, tx, strict=False)
    filters = optimal_filters(channels, ris, tx, cfg)
    tx, _ = solve_tx(channels, ris, filters, cfg, tx)
    filters = optimal_filters(channels, ris, tx, cfg)
    obj = echo_objective(channels, ris, tx, filters, cfg)
    return _finish_record(channels, cfg, ris, tx, filters, [obj], t_start,
                          protocol="RANDOM")


class RandomBaseline(ParamsMixin):
    """Estimator wrapper for the random-coefficient comparison scheme."""

    def __init__(self, config: ScenarioConfig | None = None, seed: int | None = None):
        self.config = config
        self.seed = seed

    def fit(self, channels):
        cfg = self.config if self.config is not None else ScenarioConfig()
        if self.seed is not None and self.seed != cfg.seed:
            cfg = cfg.with_updates(seed=self.seed)
        check_channel_set(channels, cfg)
        self.record_ = random_baseline(channels, cfg)
        self.config_ = cfg
        self.objective_ = self.record_.objective
        return self

    def score(self, channels=None):
        return self.record_.objective if channels is None else echo_objective(
            channels, self.record_.ris, self.record_.tx, self.record_.filters,
            self.config_)


def _es_amplitude_grid(phase_steps: int, amp_steps: int, beta_max: float):
    """Per-face per-element candidate coefficients (phases x amplitudes)."""
    phases = np.exp(2j * np.pi * np.arange(phase_steps) / phase_steps)
    amps = np.sqrt(np.linspace(0.0, beta_max, amp_steps))
    return np.array([a * p for a in amps for p in phases])


def enumerate_candidates(m_elems: int, phase_steps: int, amp_steps: int,
                         beta_max: float):
    """All per-element coefficient pairs on the grid, ES-feasible ones only.

    Returns (theta_r, theta_t) arrays of shape (n_candidates, m_elems).
    """
    per_face = _es_amplitude_grid(phase_steps, amp_steps, beta_max)
    pairs = [(a, b) for a in per_face for b in per_face
             if abs(a) ** 2 + abs(b) ** 2 <= beta_max * (1 + 1e-12)]
    n_pairs = len(pairs)
    combos = itertools.product(range(n_pairs), repeat=m_elems)
    idx = np.fromiter(itertools.chain.from_iterable(combos), dtype=np.int64,
                      count=-1).reshape(-1, m_elems)
    pair_arr = np.asarray(pairs)
    theta_r = pair_arr[idx, 0]
    theta_t = pair_arr[idx, 1]
    return theta_r, theta_t


def _batched_filter_optimal_sinr(d, channels, theta_r, theta_t, tx, cfg):
    """Echo SINR with the per-candidate optimal filter, vectorised over candidates.

    Uses the rank-one closed form when the space has at most one target,
    otherwise a batched generalized eigenvalue evaluation.
    """
    thetas = theta_r if d == "r" else theta_t
    n_cand = thetas.shape[0]
    cols = np.concatenate([tx.W, tx.F], axis=1)
    through = channels.bs_ris @ cols              # (M, S)
    resp = channels.targets[d]
    leak = channels.bs_sensor[d] @ cols           # (M_s, S)
    leak_cov = leak @ leak.conj().T + cfg.noise_sense_w * np.eye(cfg.m_sense)

    if resp.alpha.size == 0:
        return np.zeros(n_cand)
    if resp.alpha.size == 1:
        a = resp.arrival[:, 0]
        b = resp.departure[:, 0]
        alpha = resp.alpha[0]
        # signal covariance is |alpha|^2 (b^H Theta through) outer -> rank one in a
        bh = b.conj()[None, :] * thetas           # rows: (b^H Theta_d)
        path = bh @ through                       # (C, S)
        sig_gain = np.abs(alpha) ** 2 * np.sum(np.abs(path) ** 2, axis=1)
        amp_noise = (cfg.noise_ris_w * np.abs(alpha) ** 2
                     * np.sum(np.abs(bh) ** 2, axis=1))
        # noise = leak_cov + amp_noise * a a^H; Sherman-Morrison against leak_cov
        base_inv = np.linalg.inv(leak_cov)
        base_quad = float(np.real(a.conj() @ base_inv @ a))
        corr = amp_noise * base_quad
        quad = base_quad - corr * base_quad / (1.0 + corr)
        return sig_gain * quad
    # general small-J path: batched Hermitian pencils
    front = resp.matrix                            # (M_s, M)
    out = np.zeros(n_cand)
    base = leak_cov
    for i in range(n_cand):
        ft = front * thetas[i][None, :]
        path = ft @ through
        signal = path @ path.conj().T
        noise = base + cfg.noise_ris_w * (ft @ ft.conj().T)
        eigs = np.linalg.eigvals(np.linalg.solve(noise, signal))
        out[i] = float(np.max(eigs.real))
    return out


def exhaustive_baseline(channels: ChannelSet, cfg: ScenarioConfig,
                        phase_steps: int = 8, amp_steps: int = 8,
                        top_r: int = 200) -> SolutionRecord:
    """Grid traversal of the coefficient set with re-optimized filter/transmit.

    Every grid candidate is scored exactly under a fixed reference transmit
    design with its filter-optimal echo SINR (vectorised); the ``top_r``
    candidates are then re-scored with the filter in closed form and the
    transmit block re-optimized (reduced iterations), and the best is returned.
    """
    m = channels.m_elems
    grid_size = float(phase_steps * amp_steps) ** (2 * m)
    if m > 3 or grid_size > 1e8:
        raise ValueError(
            f"exhaustive grid of {grid_size:.3g} candidates is too large (M must be <= 3)")
    t_start = time.perf_counter()
    theta_r, theta_t = enumerate_candidates(m, phase_steps, amp_steps, cfg.beta_max)

    ref_ris = RisConfiguration("ES", theta_r=np.full(m, np.sqrt(cfg.beta_max / 4),
                                                     dtype=complex),
                               theta_t=np.full(m, np.sqrt(cfg.beta_max / 4),
                                               dtype=complex))
    ref_tx = initial_transmit_design(channels, ref_ris, cfg)
    if cfg.users:
        try:
            ref_tx = ensure_qos_feasible(channels, ref_ris, cfg, ref_tx)
        except InfeasibleStart:
            pass

    score = sum(_batched_filter_optimal_sinr(d, channels, theta_r, theta_t,
                                             ref_tx, cfg) for d in SPACES)
    order = np.argsort(score)[::-1][:top_r]

    reduced = cfg.with_updates(max_sca_iters=min(cfg.max_sca_iters, 6))
    best = None
    for idx in order:
        cand = RisConfiguration("ES", theta_r=theta_r[idx].copy(),
                                theta_t=theta_t[idx].copy())
        tx = ref_tx
        try:
            if cfg.users:
                tx = ensure_qos_feasible(channels, cand, reduced, tx, max_rounds=4)
        except InfeasibleStart:
            continue
        filters = optimal_filters(channels, cand, tx, reduced)
        tx, _ = solve_tx(channels, cand, filters, reduced, tx)
        filters = optimal_filters(channels, cand, tx, reduced)
        obj = echo_objective(channels, cand, tx, filters, reduced)
        if best is None or obj > best[0]:
            best = (obj, cand, tx, filters)
    if best is None:
        raise InfeasibleStart("no exhaustive grid candidate admits a QoS-feasible design")
    obj, cand, tx, filters = best
    return _finish_record(channels, cfg, cand, tx, filters, [obj], t_start,
                          protocol="EXHAUSTIVE")


class ExhaustiveBaseline(ParamsMixin):
    """Estimator wrapper for the grid-search comparison scheme."""

    def __init__(self, config: ScenarioConfig | None = None,
                 phase_steps: int = 8, amp_steps: int = 8, top_r: int = 200):
        self.config = config
        self.phase_steps = phase_steps
        self.amp_steps = amp_steps
        self.top_r = top_r

    def fit(self, channels):
        cfg = self.config if self.config is not None else ScenarioConfig()
        check_channel_set(channels, cfg)
        self.record_ = exhaustive_baseline(channels, cfg, self.phase_steps,
                                           self.amp_steps, self.top_r)
        self.config_ = cfg
        self.objective_ = self.record_.objective
        return self


def sdr_baseline(channels: ChannelSet, cfg: ScenarioConfig,
                 n_randomizations: int = 100) -> SolutionRecord:
    """Rank-relaxed design: lifted PSD beamformer/coefficient programs plus
    Gaussian randomization. Requires the optional cvxpy backend."""
    try:
        import cvxpy as cp
    except ImportError as exc:
        raise RuntimeError("the SDR baseline needs the optional cvxpy backend") from exc
    t_start = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 13]))
    tx, ris, _ = best_effort_start(channels, cfg)
    filters = optimal_filters(channels, ris, tx, cfg)

    tx = _sdr_transmit(cp, channels, ris, filters, cfg, tx, rng, n_randomizations)
    filters = optimal_filters(channels, ris, tx, cfg)
    ris = _sdr_coefficients(cp, channels, ris, filters, cfg, tx, rng, n_randomizations)
    filters = optimal_filters(channels, ris, tx, cfg)
    obj = echo_objective(channels, ris, tx, filters, cfg)
    return _finish_record(channels, cfg, ris, tx, filters, [obj], t_start,
                          protocol="SDR")


def _sdr_transmit(cp, channels, ris, filters, cfg, tx0, rng, n_rand):
    """One Dinkelbach pass on the lifted transmit covariances, then randomization."""
    N, K = cfg.n_tx, cfg.users
    H = channels.bs_ris
    echo = {d: ((filters.filter(d).conj() @ channels.response(d)) * ris.theta(d)) @ H
            for d in SPACES}
    leak = {d: filters.filter(d).conj() @ channels.bs_sensor[d] for d in SPACES}
    floor = {}
    for d in SPACES:
        m = filters.filter(d)
        floor[d] = (cfg.noise_ris_w * float(np.sum(np.abs(
            (m.conj() @ channels.response(d)) * ris.theta(d)) ** 2))
            + cfg.noise_sense_w * float(np.sum(np.abs(m) ** 2)))
    h_users = []
    for k in range(K):
        d = channels.user_space(k)
        h_users.append(((channels.ris_user[k].conj() * ris.theta(d)) @ H).conj())
    through = {d: ris.theta(d)[:, None] * H for d in SPACES}
    static = cfg.noise_ris_w * float(np.sum(np.abs(ris.theta_r) ** 2)
                                     + np.sum(np.abs(ris.theta_t) ** 2))

    q = {d: sensing_sinr_scalar(d, channels, ris, tx0, filters, cfg) for d in SPACES}
    W_vars = [cp.Variable((N, N), hermitian=True) for _ in range(K)]
    F_var = cp.Variable((N, N), hermitian=True)
    R_sum = sum(W_vars) + F_var if K else F_var
    cons = [F_var >> 0] + [W >> 0 for W in W_vars]
    cons.append(cp.real(cp.trace(R_sum)) <= cfg.bs_budget_w)
    amp_load = sum(cp.real(cp.trace((through[d].conj().T @ through[d]) @ R_sum))
                   for d in SPACES)
    cons.append(amp_load + static <= cfg.ris_budget_w)
    for k in range(K):
        d = channels.user_space(k)
        hk = h_users[k]
        Tk = np.outer(hk, hk.conj())
        noise = cfg.noise_ris_w * float(np.sum(np.abs(
            channels.ris_user[k].conj() * ris.theta(d)) ** 2)) + cfg.noise_user_w
        interference = cp.real(cp.trace(Tk @ (R_sum - W_vars[k])))
        cons.append(cp.real(cp.trace(Tk @ W_vars[k]))
                    >= cfg.gamma_th * (interference + noise))
    objective = 0
    for d in SPACES:
        num_mat = np.outer(echo[d].conj(), echo[d])
        den_mat = np.outer(leak[d].conj(), leak[d])
        objective += (cp.real(cp.trace(num_mat @ R_sum))
                      - q[d] * (cp.real(cp.trace(den_mat @ R_sum)) + floor[d]))
    problem = cp.Problem(cp.Maximize(objective), cons)
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return tx0

    def psd_sqrt(M):
        vals, vecs = np.linalg.eigh(0.5 * (M + M.conj().T))
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)

    best = (echo_objective(channels, ris, tx0, filters, cfg), tx0)
    roots = [psd_sqrt(W.value) for W in W_vars]
    f_root = psd_sqrt(F_var.value)
    for _ in range(n_rand):
        W = np.zeros((N, K), dtype=complex)
        for k in range(K):
            z = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)
            W[:, k] = roots[k] @ z
        F = f_root  # the sensing covariance keeps its full-rank factor
        cand = _rescale_to_budgets(channels, ris, cfg, W, F)
        if cand is None:
            continue
        obj = echo_objective(channels, ris, cand, filters, cfg)
        if obj > best[0] and audit(channels, ris, cand, filters, cfg).ok:
            best = (obj, cand)
    return best[1]


def _rescale_to_budgets(channels, ris, cfg, W, F):
    from .metrics import TransmitDesign, bs_power
    tx = TransmitDesign(W=W, F=F)
    p = bs_power(tx)
    if p <= 0:
        return None
    scale = np.sqrt(cfg.bs_budget_w / p)
    tx = TransmitDesign(W=W * min(scale, 1.0), F=F * min(scale, 1.0))
    from .ris import amplification_power
    amp = amplification_power(ris, tx.W, tx.F, channels.bs_ris, cfg.noise_ris_w)
    if amp > cfg.ris_budget_w:
        shrink = np.sqrt(max(cfg.ris_budget_w - cfg.noise_ris_w * float(
            np.sum(np.abs(ris.theta_r) ** 2) + np.sum(np.abs(ris.theta_t) ** 2)), 0.0)
            / max(amp, 1e-300))
        tx = TransmitDesign(W=tx.W * shrink, F=tx.F * shrink)
    return tx


def _sdr_coefficients(cp, channels, ris0, filters, cfg, tx, rng, n_rand):
    """Lifted theta theta^H program per the rank-relaxation, then randomization."""
    from .risopt import build_ris_matrices
    from .txopt import update_auxiliaries
    M = channels.m_elems
    aux = update_auxiliaries(channels, ris0, tx, filters, cfg)
    mats = build_ris_matrices(channels, tx, filters, aux, cfg)
    q = {d: sensing_sinr_scalar(d, channels, ris0, tx, filters, cfg) for d in SPACES}
    cols = np.concatenate([tx.W, tx.F], axis=1)
    through = channels.bs_ris @ cols

    num_mat, den_scale = {}, {}
    for d in SPACES:
        front = filters.filter(d).conj() @ channels.response(d)
        streams = front[:, None] * through
        num_mat[d] = streams.conj() @ streams.T
        den_scale[d] = cfg.noise_ris_w * mats.g_md[d]
    leak_floor = {}
    for d in SPACES:
        leak = filters.filter(d).conj() @ channels.bs_sensor[d]
        leak_floor[d] = (float(np.sum(np.abs(leak @ cols) ** 2))
                         + cfg.noise_sense_w * float(
                             np.sum(np.abs(filters.filter(d)) ** 2)))

    theta_vars = {d: cp.Variable((M, M), hermitian=True) for d in SPACES}
    cons = [theta_vars[d] >> 0 for d in SPACES]
    cons.append(cp.real(cp.diag(theta_vars["r"]) + cp.diag(theta_vars["t"]))
                <= cfg.beta_max)
    power = sum(cp.real(cp.sum(cp.multiply(mats.u_diag, cp.diag(theta_vars[d]))))
                for d in SPACES)
    cons.append(power <= cfg.ris_budget_w)
    for k in range(cfg.users):
        d = channels.user_space(k)
        Sk = mats.s[k]
        Sbar = mats.s_bar[k]
        cons.append(cp.real(cp.trace(Sk @ theta_vars[d]))
                    >= cfg.gamma_th * (cp.real(cp.trace(Sbar @ theta_vars[d]))
                                       + cfg.noise_user_w))
    objective = 0
    for d in SPACES:
        den = (cp.real(cp.sum(cp.multiply(den_scale[d], cp.diag(theta_vars[d]))))
               + leak_floor[d])
        objective += cp.real(cp.trace(num_mat[d] @ theta_vars[d])) - q[d] * den
    problem = cp.Problem(cp.Maximize(objective), cons)
    problem.solve(solver=cp.CLARABEL)
    if problem.status not in ("optimal", "optimal_inaccurate"):
        return ris0

    def draw(d):
        Mv = 0.5 * (theta_vars[d].value + theta_vars[d].value.conj().T)
        vals, vecs = np.linalg.eigh(Mv)
        vals = np.clip(vals, 0.0, None)
        root = vecs * np.sqrt(vals)
        z = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2)
        return root @ z

    best = (echo_objective(channels, ris0, tx, filters, cfg), ris0)
    for _ in range(n_rand):
        cand = RisConfiguration("ES", theta_r=draw("r"), theta_t=draw("t"))
        total = cand.beta("r") + cand.beta("t")
        over = total > cfg.beta_max
        if np.any(over):
            shrink = np.sqrt(cfg.beta_max / total[over])
            cand.theta_r[over] *= shrink
            cand.theta_t[over] *= shrink
        obj = echo_objective(channels, cand, tx, filters, cfg)
        if obj > best[0] and audit(channels, cand, tx, filters, cfg).ok:
            best = (obj, cand)
    return best[1]


class SdrBaseline(ParamsMixin):
    """Estimator wrapper for the rank-relaxation comparison scheme."""

    def __init__(self, config: ScenarioConfig | None = None,
                 n_randomizations: int = 100):
        self.config = config
        self.n_randomizations = n_randomizations

    def fit(self, channels):
        cfg = self.config if self.config is not None else ScenarioConfig()
        check_channel_set(channels, cfg)
        self.record_ = sdr_baseline(channels, cfg, self.n_randomizations)
        self.config_ = cfg
        self.objective_ = self.record_.objective
        return self
