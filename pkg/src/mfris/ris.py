"""Panel coefficient state, operating-protocol feasible sets and random draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PROTOCOLS
from .geometry import SPACES

FEASIBILITY_TOL = 1e-9  # solver iterates are only epsilon-feasible


def half_split_mask(m_elems: int) -> np.ndarray:
    """Fixed group assignment for 2M layouts: first half serves the reflection space."""
    mask = np.zeros(m_elems, dtype=int)
    mask[: m_elems // 2] = 1
    return mask


@dataclass
class RisConfiguration:
    """Reflection/refraction coefficient vectors plus protocol bookkeeping.

    ``theta_r``/``theta_t`` hold the per-element complex gains sqrt(beta) e^{j psi}.
    Under TS they are the two time-phase coefficient sets (one face active per
    phase); ``mode_mask`` marks reflection-mode elements for MS and the
    reflect-serving group for ACTIVE/PASSIVE.
    """

    protocol: str
    theta_r: np.ndarray
    theta_t: np.ndarray
    mode_mask: np.ndarray | None = None
    time_split: tuple | None = None

    def __post_init__(self):
        self.theta_r = np.asarray(self.theta_r, dtype=complex)
        self.theta_t = np.asarray(self.theta_t, dtype=complex)
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.theta_r.shape != self.theta_t.shape or self.theta_r.ndim != 1:
            raise ValueError("theta_r and theta_t must be 1-D vectors of equal length")

    @property
    def m_elems(self) -> int:
        return len(self.theta_r)

    def theta(self, space: str) -> np.ndarray:
        return self.theta_r if space == "r" else self.theta_t

    def matrix(self, space: str) -> np.ndarray:
        return np.diag(self.theta(space))

    def beta(self, space: str) -> np.ndarray:
        return np.abs(self.theta(space)) ** 2

    def copy(self) -> "RisConfiguration":
        return RisConfiguration(
            protocol=self.protocol,
            theta_r=self.theta_r.copy(),
            theta_t=self.theta_t.copy(),
            mode_mask=None if self.mode_mask is None else self.mode_mask.copy(),
            time_split=self.time_split,
        )

    def validate(self, beta_max: float, tol: float = FEASIBILITY_TOL) -> list:
        """Protocol feasibility violations; empty list when the state is feasible."""
        return validate(self, beta_max, tol)


def validate(cfg: RisConfiguration, beta_max: float, tol: float = FEASIBILITY_TOL) -> list:
    violations = []
    slack = tol * max(1.0, beta_max)
    beta_r, beta_t = cfg.beta("r"), cfg.beta("t")

    def check_range(beta, face, upper):
        if np.any(beta > upper + slack):
            violations.append(
                f"face {face}: per-element power exceeds {upper} "
                f"(max {beta.max():.6g})")

    if cfg.protocol in ("ES", "MS", "TS"):
        check_range(beta_r, "r", beta_max)
        check_range(beta_t, "t", beta_max)
        if cfg.protocol in ("ES", "MS"):
            total = beta_r + beta_t
            if np.any(total > beta_max + slack):
                violations.append(
                    f"sum amplification exceeds beta_max (max {total.max():.6g} "
                    f"> {beta_max})")
        if cfg.protocol == "MS":
            product = np.abs(cfg.theta_r * cfg.theta_t)
            if np.any(product > slack):
                violations.append("MS element active in both modes")
        if cfg.protocol == "TS":
            if cfg.time_split is None:
                violations.append("TS requires a time split")
            else:
                tau_r, tau_t = cfg.time_split
                if not (-tol <= tau_r <= 1 + tol and -tol <= tau_t <= 1 + tol
                        and abs(tau_r + tau_t - 1.0) <= tol):
                    violations.append(f"time split ({tau_r}, {tau_t}) not a unit partition")
    elif cfg.protocol == "STAR":
        total = beta_r + beta_t
        if np.any(np.abs(total - 1.0) > slack):
            violations.append(
                f"STAR per-element power sum != 1 (max deviation "
                f"{np.abs(total - 1.0).max():.3g})")
    elif cfg.protocol in ("ACTIVE", "PASSIVE"):
        if cfg.mode_mask is None:
            violations.append(f"{cfg.protocol} requires a group mask")
        else:
            serve_r = cfg.mode_mask.astype(bool)
            for face, beta, serving in (("r", beta_r, serve_r), ("t", beta_t, ~serve_r)):
                off = beta[~serving]
                if off.size and np.any(off > slack):
                    violations.append(f"face {face}: non-serving elements active")
                on = beta[serving]
                if cfg.protocol == "ACTIVE":
                    if on.size and (np.any(on < 1.0 - slack)
                                    or np.any(on > beta_max + slack)):
                        violations.append(
                            f"face {face}: serving amplification outside [1, beta_max]")
                else:
                    if on.size and np.any(np.abs(on - 1.0) > slack):
                        violations.append(f"face {face}: serving elements not unit modulus")
    return violations


def random_feasible(protocol: str, m_elems: int, beta_max: float,
                    rng: np.random.Generator) -> RisConfiguration:
    """Uniform draw from the protocol's feasible set (constructively feasible)."""
    phase_r = rng.uniform(0.0, 2.0 * np.pi, m_elems)
    phase_t = rng.uniform(0.0, 2.0 * np.pi, m_elems)
    mode_mask = None
    time_split = None
    if protocol == "ES":
        total = rng.uniform(0.0, beta_max, m_elems)
        frac = rng.uniform(0.0, 1.0, m_elems)
        beta_r, beta_t = total * frac, total * (1.0 - frac)
    elif protocol == "MS":
        mode_mask = (rng.uniform(size=m_elems) < 0.5).astype(int)
        amp = rng.uniform(0.0, beta_max, m_elems)
        beta_r = amp * mode_mask
        beta_t = amp * (1 - mode_mask)
    elif protocol == "TS":
        beta_r = rng.uniform(0.0, beta_max, m_elems)
        beta_t = rng.uniform(0.0, beta_max, m_elems)
        tau_r = rng.uniform(0.0, 1.0)
        time_split = (tau_r, 1.0 - tau_r)
    elif protocol == "STAR":
        beta_r = rng.uniform(0.0, 1.0, m_elems)
        beta_t = 1.0 - beta_r
    elif protocol in ("ACTIVE", "PASSIVE"):
        mode_mask = half_split_mask(m_elems)
        serve_r = mode_mask.astype(bool)
        if protocol == "ACTIVE":
            amp = rng.uniform(1.0, beta_max, m_elems)
        else:
            amp = np.ones(m_elems)
        beta_r = np.where(serve_r, amp, 0.0)
        beta_t = np.where(serve_r, 0.0, amp)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    return RisConfiguration(
        protocol=protocol,
        theta_r=np.sqrt(beta_r) * np.exp(1j * phase_r),
        theta_t=np.sqrt(beta_t) * np.exp(1j * phase_t),
        mode_mask=mode_mask,
        time_split=time_split,
    )


def default_init(protocol: str, m_elems: int, beta_max: float,
                 rng: np.random.Generator) -> RisConfiguration:
    """Deterministic-amplitude starting point: random phases, mid/feasible amplitudes."""
    cfg = random_feasible(protocol, m_elems, beta_max, rng)
    if protocol == "ES":
        amp = np.sqrt(beta_max / 4.0)  # beta_max/4 per face keeps the modulus-sum budget
        cfg.theta_r = amp * np.exp(1j * np.angle(cfg.theta_r))
        cfg.theta_t = amp * np.exp(1j * np.angle(cfg.theta_t))
    elif protocol == "TS":
        amp = np.sqrt(beta_max)
        cfg.theta_r = amp * np.exp(1j * np.angle(cfg.theta_r))
        cfg.theta_t = amp * np.exp(1j * np.angle(cfg.theta_t))
        cfg.time_split = (0.5, 0.5)
    elif protocol == "STAR":
        amp = np.sqrt(0.5)
        cfg.theta_r = amp * np.exp(1j * np.angle(cfg.theta_r))
        cfg.theta_t = amp * np.exp(1j * np.angle(cfg.theta_t))
    elif protocol == "ACTIVE":
        serve_r = cfg.mode_mask.astype(bool)
        amp = np.sqrt((1.0 + beta_max) / 2.0)
        cfg.theta_r = np.where(serve_r, amp * np.exp(1j * np.angle(cfg.theta_r)), 0.0)
        cfg.theta_t = np.where(serve_r, 0.0, amp * np.exp(1j * np.angle(cfg.theta_t)))
    return cfg


def amplification_power(ris: RisConfiguration, W, F, H, sigma_r2,
                        spaces=SPACES) -> float:
    """Power drawn by the panel: amplified signal plus amplified thermal noise.

    sum_d sum_k ||Theta_d H w_k||^2 + sum_d sum_n ||Theta_d H f_n||^2
    + sigma_r^2 sum_d ||Theta_d||_F^2 over the requested spaces.
    """
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    total = 0.0
    for d in spaces:
        theta = ris.theta(d)
        through = theta[:, None] * H
        if W.size:
            total += float(np.sum(np.abs(through @ W) ** 2))
        if F.size:
            total += float(np.sum(np.abs(through @ F) ** 2))
        total += sigma_r2 * float(np.sum(np.abs(theta) ** 2))
    return total
