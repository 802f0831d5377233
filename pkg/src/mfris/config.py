"""Scenario configuration: unit conversions, defaults, validation, JSON ingestion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

PROTOCOLS = ("ES", "MS", "TS", "STAR", "ACTIVE", "PASSIVE")

# BS-over-RIS budget gap in dB at the default operating point (30 vs 15 dBm),
# used to split a total watt budget between the two.
_SPLIT_GAP_DB = 15.0


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def dbm_to_watts(x_dbm: float) -> float:
    """Convert a power in dBm to watts: 10^((x - 30) / 10)."""
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    if p_watts <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_watts) + 30.0


def db_to_linear(x_db: float) -> float:
    """Convert a dB ratio to a linear ratio: 10^(x / 10)."""
    return 10.0 ** (x_db / 10.0)


def upa_factorization(m: int) -> tuple[int, int]:
    """Split an element count into (m_y, m_z) with m_z the largest divisor <= sqrt(m)."""
    if m < 1:
        raise ConfigError(f"element count must be >= 1, got {m}")
    m_z = int(math.isqrt(m))
    while m % m_z != 0:
        m_z -= 1
    return m // m_z, m_z


@dataclass
class ScenarioConfig:
    """All counts, powers, noise levels, channel constants and loop tolerances.

    Powers are configured in dBm and exposed in watts through properties.
    ``p_total_dbm`` is the total-power label used by sweep axes; the physical
    watt budget enforced by the optimizer is ``total_budget_w`` which always
    equals the sum of the BS and RIS budgets.
    """

    n_tx: int = 8                      # N: BS antennas
    m_elems: int = 32                  # M: reflection/refraction elements
    m_y: int | None = None             # UPA columns (horizontal), m_y * m_z = M
    m_z: int | None = None             # UPA rows (vertical)
    m_sense: int = 8                   # M_s: sensing elements
    m_v: int | None = None             # vertical sensing elements, m_v + m_h = M_s
    m_h: int | None = None
    users_r: int = 2                   # K_r
    users_t: int = 2                   # K_t
    targets_r: int = 2                 # J_r
    targets_t: int = 2                 # J_t
    p_total_dbm: float | None = 45.0
    p_bs_dbm: float | None = None
    p_ris_dbm: float | None = None
    p_sense: float = 1.0               # receive-filter norm-squared
    r_th: float = 1.0                  # per-user rate threshold, bit/s/Hz
    noise_user_dbm: float = -80.0      # sigma_k^2
    noise_ris_dbm: float = -80.0       # sigma_r^2
    noise_sense_dbm: float = -80.0     # sigma_s^2
    rician_k_db: float = 10.0
    h0_db: float = -30.0               # reference path gain at 1 m
    alpha0: float = 2.8                # path-loss exponent, applied as d^(-alpha0)
    rcs: float = 1.0                   # radar cross-section scale for echo coefficients
    beta_max: float = 100.0            # per-element power-amplification cap (20 dB)
    element_spacing_ratio: float = 0.5
    protocol: str = "ES"
    amplitude_form: str = "modulus_sum"  # ES coupled-amplitude constraint in the SOCP
    seed: int = 0
    solver_tol: float = 1e-9
    sca_tol: float = 1e-3              # epsilon_1 = epsilon_2
    ao_tol: float = 1e-3               # epsilon_3
    max_sca_iters: int = 30
    max_outer_iters: int = 50
    restarts: int = 1
    ts_tau_tol: float = 0.1            # golden-section interval tolerance for TS
    # Optional explicit placement; omitted entries are sampled from the deployment box.
    user_positions: list | None = None     # K rows of [x, y, z], first users_r with x < 0
    target_positions: list | None = None   # J rows of [x, y, z]
    target_angles_deg: list | None = None  # J rows of [horizontal_deg, vertical_deg]
    target_range_m: float = 15.0           # RIS-to-target range used with target_angles_deg

    def __post_init__(self):
        if self.m_y is None or self.m_z is None:
            self.m_y, self.m_z = upa_factorization(self.m_elems)
        if self.m_v is None or self.m_h is None:
            self.m_v = self.m_sense // 2
            self.m_h = self.m_sense - self.m_v
        self._resolve_power_budgets()
        self.validate()

    def _resolve_power_budgets(self):
        """Reconcile the power triple so p_bs + p_ris = p_total holds in watts.

        Omitted budgets are derived: a lone total is split with the default
        15 dB BS/RIS gap; a lone pair defines the total; a full triple must
        already be watt-consistent.
        """
        have_bs, have_ris = self.p_bs_dbm is not None, self.p_ris_dbm is not None
        if self.p_total_dbm is None:
            if not (have_bs and have_ris):
                raise ConfigError("either p_total_dbm or both p_bs_dbm/p_ris_dbm required")
            self.p_total_dbm = watts_to_dbm(
                dbm_to_watts(self.p_bs_dbm) + dbm_to_watts(self.p_ris_dbm))
            return
        total_w = dbm_to_watts(self.p_total_dbm)
        if have_bs and have_ris:
            split_w = dbm_to_watts(self.p_bs_dbm) + dbm_to_watts(self.p_ris_dbm)
            if abs(split_w - total_w) > 1e-9 * total_w:
                raise ConfigError(
                    f"p_bs + p_ris = {split_w:.6g} W does not match "
                    f"p_total = {total_w:.6g} W")
        elif have_bs:
            rest = total_w - dbm_to_watts(self.p_bs_dbm)
            if rest <= 0.0:
                raise ConfigError("p_bs_dbm exceeds the total power budget")
            self.p_ris_dbm = watts_to_dbm(rest)
        elif have_ris:
            rest = total_w - dbm_to_watts(self.p_ris_dbm)
            if rest <= 0.0:
                raise ConfigError("p_ris_dbm exceeds the total power budget")
            self.p_bs_dbm = watts_to_dbm(rest)
        else:
            ratio = db_to_linear(_SPLIT_GAP_DB)
            self.p_bs_dbm = watts_to_dbm(total_w * ratio / (1.0 + ratio))
            self.p_ris_dbm = watts_to_dbm(total_w / (1.0 + ratio))

    # -- derived quantities -------------------------------------------------

    @property
    def users(self) -> int:
        return self.users_r + self.users_t

    @property
    def targets(self) -> int:
        return self.targets_r + self.targets_t

    @property
    def p_total_watts(self) -> float:
        return dbm_to_watts(self.p_total_dbm)

    @property
    def p_bs_watts(self) -> float:
        return dbm_to_watts(self.p_bs_dbm)

    @property
    def p_ris_watts(self) -> float:
        return dbm_to_watts(self.p_ris_dbm)

    @property
    def total_budget_w(self) -> float:
        """Physical watt budget shared by all protocols (equals p_total_watts)."""
        return self.p_bs_watts + self.p_ris_watts

    @property
    def bs_budget_w(self) -> float:
        """BS transmit budget actually enforced; STAR/PASSIVE take the full budget."""
        if self.protocol in ("STAR", "PASSIVE"):
            return self.total_budget_w
        return self.p_bs_watts

    @property
    def ris_budget_w(self) -> float:
        return self.p_ris_watts

    @property
    def noise_user_w(self) -> float:
        return dbm_to_watts(self.noise_user_dbm)

    @property
    def noise_ris_w(self) -> float:
        return dbm_to_watts(self.noise_ris_dbm)

    @property
    def noise_sense_w(self) -> float:
        return dbm_to_watts(self.noise_sense_dbm)

    @property
    def rician_k(self) -> float:
        return db_to_linear(self.rician_k_db)

    @property
    def h0(self) -> float:
        return db_to_linear(self.h0_db)

    @property
    def gamma_th(self) -> float:
        """QoS SINR threshold 2^R_th - 1."""
        return 2.0 ** self.r_th - 1.0

    @property
    def ris_elems(self) -> int:
        """Elements actually deployed: 2M for the ACTIVE/PASSIVE baselines."""
        return 2 * self.m_elems if self.protocol in ("ACTIVE", "PASSIVE") else self.m_elems

    def ris_upa(self) -> tuple[int, int]:
        """(m_y, m_z) of the deployed panel, refactorized for 2M layouts."""
        if self.protocol in ("ACTIVE", "PASSIVE"):
            return upa_factorization(2 * self.m_elems)
        return self.m_y, self.m_z

    # -- validation ----------------------------------------------------------

    def validate(self):
        counts = dict(n_tx=self.n_tx, m_elems=self.m_elems, m_sense=self.m_sense)
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value}")
        for name in ("users_r", "users_t", "targets_r", "targets_t"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.m_y * self.m_z != self.m_elems:
            raise ConfigError(
                f"m_y * m_z = {self.m_y}*{self.m_z} does not factorize m_elems={self.m_elems}")
        if self.m_v + self.m_h != self.m_sense:
            raise ConfigError(
                f"m_v + m_h = {self.m_v}+{self.m_h} does not split m_sense={self.m_sense}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}, expected one of {PROTOCOLS}")
        if self.amplitude_form not in ("modulus_sum", "power"):
            raise ConfigError(f"unknown amplitude_form {self.amplitude_form!r}")
        positives = dict(
            p_sense=self.p_sense, alpha0=self.alpha0, rcs=self.rcs,
            element_spacing_ratio=self.element_spacing_ratio,
            solver_tol=self.solver_tol, sca_tol=self.sca_tol, ao_tol=self.ao_tol,
            r_th=self.r_th, ts_tau_tol=self.ts_tau_tol, target_range_m=self.target_range_m,
        )
        for name, value in positives.items():
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be strictly positive, got {value}")
        if self.beta_max < 0.0:
            raise ConfigError(f"beta_max must be >= 0, got {self.beta_max}")
        if self.protocol == "ACTIVE" and self.beta_max < 1.0:
            raise ConfigError("ACTIVE protocol needs beta_max >= 1 (per-element gain >= 1)")
        for name in ("max_sca_iters", "max_outer_iters", "restarts"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.p_bs_watts <= 0.0 or self.p_ris_watts <= 0.0:
            raise ConfigError("power budgets must be strictly positive")
        if self.user_positions is not None and len(self.user_positions) != self.users:
            raise ConfigError(
                f"user_positions has {len(self.user_positions)} entries but "
                f"users_r + users_t = {self.users}")
        if self.target_positions is not None and len(self.target_positions) != self.targets:
            raise ConfigError(
                f"target_positions has {len(self.target_positions)} entries but "
                f"targets_r + targets_t = {self.targets}")
        if self.target_angles_deg is not None and len(self.target_angles_deg) != self.targets:
            raise ConfigError(
                f"target_angles_deg has {len(self.target_angles_deg)} entries but "
                f"targets_r + targets_t = {self.targets}")

    def with_updates(self, **kwargs) -> "ScenarioConfig":
        """Copy with fields replaced; re-derives UPA splits when counts change."""
        if "m_elems" in kwargs and "m_y" not in kwargs:
            kwargs.setdefault("m_y", None)
            kwargs.setdefault("m_z", None)
        if "m_sense" in kwargs and "m_v" not in kwargs:
            kwargs.setdefault("m_v", None)
            kwargs.setdefault("m_h", None)
        if "p_total_dbm" in kwargs and "p_bs_dbm" not in kwargs:
            kwargs.setdefault("p_bs_dbm", None)
            kwargs.setdefault("p_ris_dbm", None)
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}


def load_config(source) -> ScenarioConfig:
    """Build a validated config from a JSON document, path, dict or empty input.

    Every key is optional; omitted keys take the default operating point.
    Unknown keys and invariant violations raise ConfigError with the field name.
    """
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = dict(source)
    else:
        text = str(source)
        if text.strip() == "":
            data = {}
        elif text.lstrip().startswith("{"):
            data = json.loads(text)
        else:
            with open(text) as fh:
                data = json.load(fh)
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
