"""Closed-form performance evaluation: user SINR/rate, echo SINR, powers, beampatterns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, ris_tx_steering
from .config import ScenarioConfig
from .geometry import SPACES
from .ris import RisConfiguration, amplification_power, validate as ris_validate

AUDIT_REL_TOL = 1e-6


@dataclass
class TransmitDesign:
    """User beamformers W (N x K columns w_k) and sensing beamformers F (N x N)."""

    W: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=complex))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=complex))
        if not (np.all(np.isfinite(self.W.real)) and np.all(np.isfinite(self.F.real))):
            raise ValueError("transmit design must be finite")

    @property
    def n_tx(self) -> int:
        return self.W.shape[0]

    def power(self) -> float:
        return bs_power(self)

    def copy(self) -> "TransmitDesign":
        return TransmitDesign(self.W.copy(), self.F.copy())


@dataclass
class SensingFilters:
    """Receive filters m_r, m_t for the two-sided sensing elements."""

    m_r: np.ndarray
    m_t: np.ndarray
    degenerate: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m_r = np.asarray(self.m_r, dtype=complex)
        self.m_t = np.asarray(self.m_t, dtype=complex)

    def filter(self, space: str) -> np.ndarray:
        return self.m_r if space == "r" else self.m_t


def bs_power(tx: TransmitDesign) -> float:
    """Total BS transmit power sum_k ||w_k||^2 + sum_n ||f_n||^2."""
    return float(np.sum(np.abs(tx.W) ** 2) + np.sum(np.abs(tx.F) ** 2))


def comm_sinr(k: int, channels: ChannelSet, ris: RisConfiguration,
              tx: TransmitDesign, cfg: ScenarioConfig) -> float:
    """Receive SINR of user k through its own half-space coefficients."""
    d = channels.user_space(k)
    g = channels.ris_user[k]
    effective = (g.conj() * ris.theta(d)) @ channels.bs_ris  # row g^H Theta_d H
    sig = np.abs(effective @ tx.W[:, k]) ** 2
    others = np.abs(effective @ tx.W) ** 2
    interference = float(np.sum(others) - others[k])
    interference += float(np.sum(np.abs(effective @ tx.F) ** 2))
    amplified_noise = cfg.noise_ris_w * float(np.sum(np.abs(g.conj() * ris.theta(d)) ** 2))
    return float(sig / (interference + amplified_noise + cfg.noise_user_w))


def user_rate(k, channels, ris, tx, cfg) -> float:
    return float(np.log2(1.0 + comm_sinr(k, channels, ris, tx, cfg)))


def _echo_row(d, channels, ris, filters):
    """Row m_d^H G_d Theta_d H mapping a transmit column to its filtered echo."""
    m = filters.filter(d)
    front = (m.conj() @ channels.response(d)) * ris.theta(d)
    return front @ channels.bs_ris


def sensing_sinr_scalar(d: str, channels: ChannelSet, ris: RisConfiguration,
                        tx: TransmitDesign, filters: SensingFilters,
                        cfg: ScenarioConfig) -> float:
    """Echo SINR at the sensing elements of half-space d, term-by-term form."""
    m = filters.filter(d)
    echo = _echo_row(d, channels, ris, filters)
    num = float(np.sum(np.abs(echo @ tx.W) ** 2) + np.sum(np.abs(echo @ tx.F) ** 2))
    leak = m.conj() @ channels.bs_sensor[d]
    den = float(np.sum(np.abs(leak @ tx.W) ** 2) + np.sum(np.abs(leak @ tx.F) ** 2))
    den += cfg.noise_ris_w * float(
        np.sum(np.abs((m.conj() @ channels.response(d)) * ris.theta(d)) ** 2))
    den += cfg.noise_sense_w * float(np.sum(np.abs(m) ** 2))
    return num / den


def sensing_covariances(d: str, channels: ChannelSet, ris: RisConfiguration,
                        tx: TransmitDesign, cfg: ScenarioConfig):
    """Quadratic-form pair (signal, interference-plus-noise) of the echo SINR.

    signal = G Theta H R_x H^H Theta^H G^H with R_x the transmit covariance;
    noise adds the BS-to-sensor leakage sandwich, the amplified panel noise
    sigma_r^2 G Theta Theta^H G^H and sigma_s^2 I. Both are Hermitian and the
    noise part is positive definite for sigma_s^2 > 0.
    """
    cols = np.concatenate([tx.W, tx.F], axis=1)
    front = channels.response(d) * ris.theta(d)[None, :]  # G_d Theta_d
    path = front @ channels.bs_ris @ cols                 # (M_s, K+N)
    signal = path @ path.conj().T
    leak = channels.bs_sensor[d] @ cols
    noise = leak @ leak.conj().T
    noise += cfg.noise_ris_w * (front @ front.conj().T)
    noise += cfg.noise_sense_w * np.eye(cfg.m_sense)
    signal = 0.5 * (signal + signal.conj().T)
    noise = 0.5 * (noise + noise.conj().T)
    return signal, noise


def sensing_sinr_matrix(d, channels, ris, tx, filters, cfg) -> float:
    """Echo SINR as the generalized Rayleigh quotient of the covariance pair."""
    signal, noise = sensing_covariances(d, channels, ris, tx, cfg)
    m = filters.filter(d)
    den = float(np.real(m.conj() @ noise @ m))
    if den <= 0.0 or not np.isfinite(den):
        raise np.linalg.LinAlgError("echo noise covariance is numerically singular")
    return float(np.real(m.conj() @ signal @ m)) / den


def space_weights(ris: RisConfiguration) -> dict:
    """Objective weights per space: TS weights each face by its time fraction."""
    if ris.protocol == "TS" and ris.time_split is not None:
        return {"r": float(ris.time_split[0]), "t": float(ris.time_split[1])}
    return {"r": 1.0, "t": 1.0}


def user_gamma_threshold(k: int, channels, ris, cfg) -> float:
    """QoS SINR threshold for user k; TS users must clear R_th within their phase."""
    if ris.protocol == "TS" and ris.time_split is not None:
        tau = space_weights(ris)[channels.user_space(k)]
        if tau <= 0.0:
            return np.inf
        return 2.0 ** (cfg.r_th / tau) - 1.0
    return cfg.gamma_th


def echo_objective(channels, ris, tx, filters, cfg) -> float:
    """Optimization objective: (time-weighted) sum of the per-space echo SINRs."""
    w = space_weights(ris)
    return sum(w[d] * sensing_sinr_scalar(d, channels, ris, tx, filters, cfg)
               for d in SPACES)


@dataclass
class MetricsReport:
    per_user_sinr: np.ndarray
    per_user_rate: np.ndarray
    sensing_sinr: dict
    objective: float
    bs_power: float
    ris_power: float
    feasible: bool
    violations: list


def evaluate(channels, ris, tx, filters, cfg) -> MetricsReport:
    sinrs = np.array([comm_sinr(k, channels, ris, tx, cfg) for k in range(cfg.users)])
    rates = np.log2(1.0 + sinrs)
    per_space = {d: sensing_sinr_scalar(d, channels, ris, tx, filters, cfg) for d in SPACES}
    report = audit(channels, ris, tx, filters, cfg)
    return MetricsReport(
        per_user_sinr=sinrs,
        per_user_rate=rates,
        sensing_sinr=per_space,
        objective=sum(per_space.values()),
        bs_power=bs_power(tx),
        ris_power=amplification_power(ris, tx.W, tx.F, channels.bs_ris, cfg.noise_ris_w),
        feasible=report.ok,
        violations=report.violations,
    )


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list
    slacks: dict


def audit(channels, ris, tx, filters, cfg,
          rel_tol: float = AUDIT_REL_TOL) -> FeasibilityReport:
    """Check a solution against its protocol's constraint set (relative tolerance).

    TS rates are scaled by each user's serving time fraction before the QoS
    check.
    """
    violations = []
    slacks = {}

    p = bs_power(tx)
    slacks["bs_power"] = cfg.bs_budget_w - p
    if p > cfg.bs_budget_w * (1.0 + rel_tol):
        violations.append(f"BS power {p:.6g} exceeds budget {cfg.bs_budget_w:.6g}")

    weights = space_weights(ris)
    scale = np.array([weights[channels.user_space(k)] if ris.protocol == "TS" else 1.0
                      for k in range(cfg.users)])
    rates = scale * np.array(
        [user_rate(k, channels, ris, tx, cfg) for k in range(cfg.users)])
    slacks["rate_min"] = float(rates.min() - cfg.r_th) if rates.size else 0.0
    if np.any(rates < cfg.r_th * (1.0 - rel_tol)):
        worst = int(np.argmin(rates))
        violations.append(
            f"user {worst} rate {rates[worst]:.6g} below threshold {cfg.r_th}")

    violations.extend(ris_validate(ris, cfg.beta_max))

    if ris.protocol in ("ES", "MS", "ACTIVE", "TS"):
        if ris.protocol == "TS":
            amp = max(
                amplification_power(ris, tx.W, tx.F, channels.bs_ris,
                                    cfg.noise_ris_w, spaces=(d,))
                for d in SPACES)
        else:
            amp = amplification_power(ris, tx.W, tx.F, channels.bs_ris, cfg.noise_ris_w)
        slacks["ris_power"] = cfg.ris_budget_w - amp
        if amp > cfg.ris_budget_w * (1.0 + rel_tol):
            violations.append(
                f"panel power {amp:.6g} exceeds budget {cfg.ris_budget_w:.6g}")

    for d in SPACES:
        norm_sq = float(np.sum(np.abs(filters.filter(d)) ** 2))
        if abs(norm_sq - cfg.p_sense) > cfg.p_sense * rel_tol:
            violations.append(f"filter m_{d} norm^2 {norm_sq:.9g} != {cfg.p_sense}")

    return FeasibilityReport(ok=not violations, violations=violations, slacks=slacks)


def beampattern(ris: RisConfiguration, tx: TransmitDesign, channels: ChannelSet,
                elev_grid_deg, azim_grid_deg, spacing: float = 0.5) -> dict:
    """Radiated power through each face over an (elevation, azimuth) grid.

    gain(phi, varphi) measures the alignment of the transmitted excitation with
    the panel steering vector of that direction, the quantity the echo response
    G = A diag(alpha) B^H rewards, so target directions show up as peaks.
    Returns per-face arrays of shape (len(elev), len(azim)).
    """
    elev = np.deg2rad(np.asarray(elev_grid_deg, dtype=float))
    azim = np.deg2rad(np.asarray(azim_grid_deg, dtype=float))
    m_y, m_z = channels.m_y, channels.m_z
    ee, aa = np.meshgrid(elev, azim, indexing="ij")
    vert_arg = spacing * np.sin(ee.ravel())
    horiz_arg = spacing * np.cos(ee.ravel()) * np.cos(aa.ravel())
    idx_z = np.arange(m_z)
    idx_y = np.arange(m_y)
    ramp_z = np.exp(-2j * np.pi * vert_arg[:, None] * idx_z[None, :])
    ramp_y = np.exp(-2j * np.pi * horiz_arg[:, None] * idx_y[None, :])
    # rows are b(phi, varphi)^T laid out as kron(vert, horiz)
    grid = (ramp_z[:, :, None] * ramp_y[:, None, :]).reshape(len(vert_arg), m_y * m_z)
    cols = np.concatenate([tx.W, tx.F], axis=1)
    maps = {}
    for d in SPACES:
        excitation = (ris.theta(d)[:, None] * (channels.bs_ris @ cols))
        response = grid.conj() @ excitation
        maps[d] = np.sum(np.abs(response) ** 2, axis=1).reshape(len(elev), len(azim))
    return maps
