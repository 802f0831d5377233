"""Alternating-optimization driver: filter, transmit and panel blocks in turn."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .base import ParamsMixin, check_channel_set
from .channel import ChannelSet
from .config import ScenarioConfig
from .filters import optimal_filters
from .geometry import SPACES
from .metrics import (FeasibilityReport, SensingFilters, TransmitDesign, audit,
                      comm_sinr, echo_objective, sensing_sinr_scalar,
                      user_gamma_threshold, user_rate)
from .ris import RisConfiguration, default_init
from .risopt import improve_qos_slack, solve_ris
from .txopt import (InfeasibleStart, build_tx_socp, ensure_qos_feasible,
                    initial_transmit_design, solve_tx, stalled)

_FEASIBILITY_ROUNDS = 8
_FEASIBILITY_MARGIN = 1e-3


@dataclass
class BlockStep:
    iteration: int
    block: str
    objective: float
    wall_ms: float


@dataclass
class SolutionRecord:
    """Everything one optimization run produced, including its audit trail."""

    protocol: str
    objective: float
    objectives: list                  # objective after each full outer iteration
    blocks: list                      # BlockStep entries in execution order
    tx: TransmitDesign | None
    ris: RisConfiguration | None
    filters: SensingFilters | None
    sensing_sinr: dict
    rates: np.ndarray
    report: FeasibilityReport
    converged: bool
    outer_iters: int
    monotone: bool
    wall_s: float
    traces: list = field(default_factory=list)   # per iteration {'tx': ..., 'ris': ...}
    phases: dict | None = None                   # TS: per-phase SolutionRecord
    time_split: tuple | None = None

    @property
    def objective_db(self) -> float:
        return 10.0 * np.log10(max(self.objective, 1e-300))

    def block_chain(self) -> list:
        return [(s.iteration, s.block, s.objective) for s in self.blocks]


def _monotone_audit(values, tol) -> bool:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return True
    return bool(np.all(np.diff(arr) >= -(tol + 1e-12 * np.abs(arr[:-1]))))


class AlternatingOptimizer(ParamsMixin):
    """Echo-SINR maximizer with a fit/score estimator surface.

    ``fit`` consumes a channel realization and alternates the closed-form
    filter update, the transmit SOCP and the panel SOCP until the objective
    stalls. The fitted design is exposed through ``record_`` and evaluated by
    ``score``.
    """

    def __init__(self, config: ScenarioConfig | None = None,
                 protocol: str | None = None, seed: int | None = None):
        self.config = config
        self.protocol = protocol
        self.seed = seed

    def _effective_config(self) -> ScenarioConfig:
        cfg = self.config if self.config is not None else ScenarioConfig()
        updates = {}
        if self.protocol is not None and self.protocol != cfg.protocol:
            updates["protocol"] = self.protocol
        if self.seed is not None and self.seed != cfg.seed:
            updates["seed"] = self.seed
        return cfg.with_updates(**updates) if updates else cfg

    def fit(self, channels: ChannelSet):
        cfg = self._effective_config()
        check_channel_set(channels, cfg)
        if cfg.protocol == "TS":
            self.record_ = _fit_time_switching(channels, cfg)
        elif cfg.protocol in ("STAR", "ACTIVE", "PASSIVE"):
            from .baselines import fit_fixed_architecture
            self.record_ = fit_fixed_architecture(channels, cfg)
        else:
            self.record_ = _fit_alternating(channels, cfg)
        self.config_ = cfg
        self.objective_ = self.record_.objective
        return self

    def score(self, channels: ChannelSet | None = None) -> float:
        """Echo-SINR objective of the fitted design (optionally on new channels)."""
        if not hasattr(self, "record_"):
            raise RuntimeError("call fit before score")
        rec = self.record_
        if channels is None or rec.tx is None:
            return rec.objective
        check_channel_set(channels, self.config_)
        if self.config_.protocol in ("STAR", "ACTIVE", "PASSIVE"):
            from .baselines import bs_echo_objective
            return bs_echo_objective(channels, rec.ris, rec.tx, rec.filters,
                                     self.config_)
        return echo_objective(channels, rec.ris, rec.tx, rec.filters, self.config_)


def aligned_phases(channels, space: str) -> np.ndarray:
    """Cascade-aligned element phases for one face.

    Elements are assigned round-robin to that half-space's users, sorted far
    to near, so every user (the weakest first) owns a coherent sub-array.
    Faces without users align toward their first target.
    """
    m_elems = channels.m_elems
    H = channels.bs_ris
    _, _, vh = np.linalg.svd(H, full_matrices=False)
    drive = H @ vh[0].conj()              # per-element response to the dominant beam
    users = sorted(channels.users_in(space),
                   key=lambda k: -channels.geometry.d_ru[k])
    phases = np.zeros(m_elems)
    if users:
        for m in range(m_elems):
            g = channels.ris_user[users[m % len(users)]]
            phases[m] = np.angle(g[m]) - np.angle(drive[m])
    elif channels.targets[space].alpha.size:
        b = channels.targets[space].departure[:, 0]
        phases = -(np.angle(b) + np.angle(drive))
    return phases


def aligned_init(channels, cfg, rng) -> RisConfiguration:
    """Protocol-feasible start with coherently aligned phases (feasibility fallback)."""
    ris = default_init(cfg.protocol, channels.m_elems, cfg.beta_max, rng)
    ris.theta_r = np.abs(ris.theta_r) * np.exp(1j * aligned_phases(channels, "r"))
    ris.theta_t = np.abs(ris.theta_t) * np.exp(1j * aligned_phases(channels, "t"))
    return ris


def best_effort_start(channels, cfg, restart: int = 0, make_ris=None,
                      n_draws: int = 3):
    """Best (tx, ris, slack) found by the QoS feasibility search.

    Alternates the globally exact transmit slack step (phase-rotated SOC) with
    coefficient slack steps; STAR/PASSIVE first climb on the relaxed amplitude
    set before projecting onto their equality sets. Several seeded coefficient
    draws are tried; the best design is returned even when the slack stays
    negative (the caller decides whether a shortfall is acceptable).
    """
    def min_slack(r, t):
        if cfg.users == 0:
            return np.inf
        return min(comm_sinr(k, channels, r, t, cfg)
                   / user_gamma_threshold(k, channels, r, cfg) - 1.0
                   for k in range(cfg.users))

    def tx_slack_step(r, t):
        model = build_tx_socp(channels, r, None, None, t, cfg, feasibility=True)
        sol = conic.solve(model.program, tol=cfg.solver_tol)
        if not sol.ok:
            return t
        cand = model.unpack(sol.x)
        return cand if min_slack(r, cand) > min_slack(r, t) else t

    relax_first = cfg.protocol in ("STAR", "PASSIVE")
    best = None
    for draw in range(n_draws):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7, restart, draw]))
        if make_ris is not None:
            ris = make_ris(rng)
        elif draw == 1:
            ris = aligned_init(channels, cfg, rng)
        else:
            ris = default_init(cfg.protocol, channels.m_elems, cfg.beta_max, rng)
        tx = initial_transmit_design(channels, ris, cfg)
        if cfg.users == 0:
            return tx, ris
        phases = ((False, _FEASIBILITY_ROUNDS), (True, _FEASIBILITY_ROUNDS)) \
            if relax_first else ((True, _FEASIBILITY_ROUNDS),)
        slack = min_slack(ris, tx)
        for project, rounds in phases:
            for _ in range(rounds):
                if project and slack > _FEASIBILITY_MARGIN:
                    break
                tx = tx_slack_step(ris, tx)
                ris, _ = improve_qos_slack(channels, tx, cfg, ris, project=project)
                slack = min_slack(ris, tx)
            if not project:
                # land on the protocol's equality set and repair the transmit side
                from .risopt import project_protocol
                ris = project_protocol(ris)
                tx = tx_slack_step(ris, tx)
                slack = min_slack(ris, tx)
        if best is None or slack > best[0]:
            best = (slack, tx, ris)
        if slack > 0.0:
            break
    slack, tx, ris = best
    return tx, ris, slack


def find_feasible_start(channels, cfg, restart: int = 0, make_ris=None,
                        n_draws: int = 3):
    """Initial (tx, ris) meeting the QoS set; raises when none is found."""
    tx, ris, slack = best_effort_start(channels, cfg, restart, make_ris, n_draws)
    if slack <= 0.0:
        raise InfeasibleStart(
            f"no QoS-feasible start found (slack {slack:.4g}) for {cfg.protocol}")
    tx = ensure_qos_feasible(channels, ris, cfg, tx)
    return tx, ris


def _project_extrapolated(tx, ris, channels, cfg):
    """Pull an extrapolated state back into the feasible set (budget rescaling)."""
    from .metrics import bs_power
    from .ris import amplification_power
    p = bs_power(tx)
    if p > cfg.bs_budget_w:
        shrink = np.sqrt(cfg.bs_budget_w / p) * (1.0 - 1e-9)
        tx = TransmitDesign(tx.W * shrink, tx.F * shrink)
    out = ris.copy()
    if cfg.amplitude_form == "modulus_sum":
        budget = np.sqrt(cfg.beta_max)
        mods = np.abs(out.theta_r) + np.abs(out.theta_t)
        over = mods > budget
        if np.any(over):
            shrink = budget / mods[over] * (1.0 - 1e-9)
            out.theta_r[over] *= shrink
            out.theta_t[over] *= shrink
    total = np.abs(out.theta_r) ** 2 + np.abs(out.theta_t) ** 2
    over = total > cfg.beta_max
    if np.any(over):
        shrink = np.sqrt(cfg.beta_max / total[over]) * (1.0 - 1e-9)
        out.theta_r[over] *= shrink
        out.theta_t[over] *= shrink
    amp = amplification_power(out, tx.W, tx.F, channels.bs_ris, cfg.noise_ris_w)
    if amp > cfg.ris_budget_w:
        shrink = np.sqrt(cfg.ris_budget_w / amp) * (1.0 - 1e-9)
        out.theta_r *= shrink
        out.theta_t *= shrink
    return tx, out


def _try_extrapolation(channels, cfg, tx, ris, prev_tx, prev_ris, g_now, g_prev2):
    """Safeguarded over-relaxation along the last outer displacement.

    The extrapolated state is projected back into the power/amplitude sets;
    when the jump leaves the QoS set, the exact transmit feasibility step
    repairs it and one transmit pass re-polishes. A candidate is adopted only
    if it keeps every constraint and strictly improves the true objective, so
    the monotone audit is untouched. This pays off on ill-conditioned
    instances whose block iterates crawl along a flat valley.
    """
    from .ris import validate as ris_validate
    if cfg.protocol != "ES":
        return None
    if g_now - g_prev2 <= 0.0:
        return None

    def qos_ok(r, t):
        return cfg.users == 0 or all(
            comm_sinr(k, channels, r, t, cfg)
            >= user_gamma_threshold(k, channels, r, cfg) * (1.0 - 1e-9)
            for k in range(cfg.users))

    for beta in (24.0, 8.0, 2.0):
        cand_tx = TransmitDesign(tx.W + beta * (tx.W - prev_tx.W),
                                 tx.F + beta * (tx.F - prev_tx.F))
        cand_ris = ris.copy()
        cand_ris.theta_r = ris.theta_r + beta * (ris.theta_r - prev_ris.theta_r)
        cand_ris.theta_t = ris.theta_t + beta * (ris.theta_t - prev_ris.theta_t)
        cand_tx, cand_ris = _project_extrapolated(cand_tx, cand_ris, channels, cfg)
        if ris_validate(cand_ris, cfg.beta_max):
            continue
        if not qos_ok(cand_ris, cand_tx):
            try:
                cand_tx = ensure_qos_feasible(channels, cand_ris, cfg, cand_tx,
                                              max_rounds=2)
            except InfeasibleStart:
                continue
            filters = optimal_filters(channels, cand_ris, cand_tx, cfg)
            cand_tx, _ = solve_tx(channels, cand_ris, filters, cfg, cand_tx)
        filters = optimal_filters(channels, cand_ris, cand_tx, cfg)
        obj = echo_objective(channels, cand_ris, cand_tx, filters, cfg)
        if obj > g_now and qos_ok(cand_ris, cand_tx):
            return (obj, cand_tx, cand_ris, filters)
    return None


def _fit_alternating(channels, cfg, make_ris=None) -> SolutionRecord:
    t_start = time.perf_counter()
    last_error = None
    tx = ris = None
    for restart in range(cfg.restarts):
        try:
            tx, ris = find_feasible_start(channels, cfg, restart, make_ris)
            last_error = None
            break
        except InfeasibleStart as exc:
            last_error = exc
    if last_error is not None:
        raise last_error

    blocks, objectives, traces = [], [], []
    filters = None
    prev = None
    prev_state = None
    converged = False
    for it in range(cfg.max_outer_iters):
        t0 = time.perf_counter()
        filters = optimal_filters(channels, ris, tx, cfg)
        g_filter = echo_objective(channels, ris, tx, filters, cfg)
        blocks.append(BlockStep(it, "filter", g_filter,
                                1e3 * (time.perf_counter() - t0)))

        t0 = time.perf_counter()
        tx, tx_trace = solve_tx(channels, ris, filters, cfg, tx)
        g_tx = echo_objective(channels, ris, tx, filters, cfg)
        blocks.append(BlockStep(it, "tx", g_tx, 1e3 * (time.perf_counter() - t0)))

        t0 = time.perf_counter()
        ris, ris_trace = solve_ris(channels, tx, filters, cfg, ris)
        g_ris = echo_objective(channels, ris, tx, filters, cfg)
        blocks.append(BlockStep(it, "ris", g_ris, 1e3 * (time.perf_counter() - t0)))

        if prev is not None and prev_state is not None and g_ris > prev:
            t0 = time.perf_counter()
            accel = _try_extrapolation(channels, cfg, tx, ris,
                                       prev_state[0], prev_state[1], g_ris, prev)
            if accel is not None:
                g_ris, tx, ris, filters = accel
                blocks.append(BlockStep(it, "accel", g_ris,
                                        1e3 * (time.perf_counter() - t0)))
        prev_state = (tx, ris)

        traces.append({"tx": tx_trace, "ris": ris_trace})
        objectives.append(g_ris)
        if prev is not None and stalled(prev, g_ris, cfg.ao_tol):
            converged = True
            break
        prev = g_ris

    report = audit(channels, ris, tx, filters, cfg)
    rates = np.array([user_rate(k, channels, ris, tx, cfg) for k in range(cfg.users)])
    per_space = {d: sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
                 for d in SPACES}
    return SolutionRecord(
        protocol=cfg.protocol,
        objective=objectives[-1] if objectives else 0.0,
        objectives=objectives,
        blocks=blocks,
        tx=tx, ris=ris, filters=filters,
        sensing_sinr=per_space,
        rates=rates,
        report=report,
        converged=converged,
        outer_iters=len(objectives),
        monotone=_monotone_audit([s.objective for s in blocks], 10.0 * cfg.solver_tol),
        wall_s=time.perf_counter() - t_start,
        traces=traces,
        time_split=ris.time_split,
    )


def _fit_at_time_split(channels, cfg, tau_r: float) -> SolutionRecord:
    """One full AO run with the time split held fixed.

    The transmit design is shared by both phases (it is block-constant); the
    split enters through the objective weights and the per-phase QoS inflation.
    """
    def make_ris(rng):
        m = channels.m_elems
        amp = np.sqrt(cfg.beta_max / 2.0)
        return RisConfiguration(
            "TS",
            theta_r=amp * np.exp(1j * rng.uniform(0, 2 * np.pi, m)),
            theta_t=amp * np.exp(1j * rng.uniform(0, 2 * np.pi, m)),
            time_split=(tau_r, 1.0 - tau_r))

    return _fit_alternating(channels, cfg, make_ris)


def _fit_time_switching(channels, cfg) -> SolutionRecord:
    """Time-split search: coarse scan, then golden section around the best cell.

    The QoS inflation makes extreme splits infeasible, so the scan first finds
    a feasible neighborhood (golden section alone cannot bracket through
    infeasible endpoints).
    """
    t_start = time.perf_counter()
    cache = {}

    def evaluate(tau_r):
        key = round(tau_r, 6)
        if key not in cache:
            if tau_r < 1e-3 or tau_r > 1.0 - 1e-3:
                cache[key] = None
            else:
                try:
                    cache[key] = _fit_at_time_split(channels, cfg, tau_r)
                except InfeasibleStart:
                    cache[key] = None
        rec = cache[key]
        return -np.inf if rec is None else rec.objective

    coarse = [0.3, 0.4, 0.5, 0.6, 0.7]
    values = {tau: evaluate(tau) for tau in coarse}
    tau_seed = max(values, key=values.get)
    if not np.isfinite(values[tau_seed]):
        raise InfeasibleStart("no feasible time split found for TS")

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = max(0.0, tau_seed - 0.1), min(1.0, tau_seed + 0.1)
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    values[c] = evaluate(c)
    values[d] = evaluate(d)
    while hi - lo > cfg.ts_tau_tol:
        if values[c] >= values[d]:
            hi, d = d, c
            c = hi - invphi * (hi - lo)
            values.setdefault(c, evaluate(c))
        else:
            lo, c = c, d
            d = lo + invphi * (hi - lo)
            values.setdefault(d, evaluate(d))
    tau_best = max(values, key=values.get)
    record = cache[round(tau_best, 6)]
    record.wall_s = time.perf_counter() - t_start
    return record


def complexity_report(cfg: ScenarioConfig, record: SolutionRecord | None = None) -> str:
    """Per-iteration cost expressions instantiated with the configured sizes.

    Includes measured per-block wall times when a solved record is supplied.
    """
    k, j, n, m, m_s = cfg.users, cfg.targets, cfg.n_tx, cfg.m_elems, cfg.m_sense
    eig = (j * m_s) ** 3
    tx_cost = (k + j) ** 4 * n ** 4 + (4 * k + 4 * j) * n ** 2 * np.log(1.0 / cfg.sca_tol)
    ris_cost = (k + j) ** 4 * m ** 4 + (4 * k + 4 * j) * m ** 2 * np.log(1.0 / cfg.sca_tol)
    lines = [
        "per-iteration complexity at the configured sizes",
        f"  filter eigendecomposition: O((J*M_s)^3) = O({eig:.6g})",
        f"  transmit SOCP: O((K+J)^4 N^4 + (4K+4J) N^2 log(1/eps)) = O({tx_cost:.6g})",
        f"  panel SOCP: O((K+J)^4 M^4 + (4K+4J) M^2 log(1/eps)) = O({ris_cost:.6g})",
    ]
    if record is not None and record.blocks:
        per_block = {}
        for step in record.blocks:
            per_block.setdefault(step.block, []).append(step.wall_ms)
        for name in ("filter", "tx", "ris"):
            if name in per_block:
                lines.append(f"  measured mean {name} block: "
                             f"{np.mean(per_block[name]):.3f} ms")
    return "\n".join(lines)
